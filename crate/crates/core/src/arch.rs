//! Candidate architectures and the searchable space around them.
//!
//! An architecture is a stack of `n_c` cells. Every layer of cell `c` has
//! `w_c = base_width_c * w_m` output channels, every cell has `d_c` layers,
//! and layer `i` (zero-based) of cell `c` concatenates
//! `min{(i - 1) * w_c, t_c}` channels from earlier layers of the same cell
//! for `i` in `2..d_c`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate architecture.
///
/// The derived ordering is lexicographic on `(w_m, n_c, d_c, t)` and is the
/// tie-break order used by every search routine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchConfig {
    pub w_m: u32,
    pub n_c: u32,
    pub d_c: u32,
    /// Per-cell skip budgets, serialized as `"t1;t2;t3"`.
    #[serde(with = "skip_list")]
    pub t: Vec<u32>,
}

impl ArchConfig {
    pub fn new(w_m: u32, d_c: u32, t: Vec<u32>) -> Self {
        ArchConfig {
            w_m,
            n_c: t.len() as u32,
            d_c,
            t,
        }
    }

    /// The `"t1;t2;t3"` form used in CSV and JSON records.
    pub fn t_string(&self) -> String {
        skip_list::join(&self.t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let config: ArchConfig = serde_json::from_str(s)?;
        if config.t.len() != config.n_c as usize {
            return Err(Error::Data(format!(
                "n_c = {} but t has {} entries",
                config.n_c,
                config.t.len()
            )));
        }
        Ok(config)
    }
}

impl fmt::Display for ArchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "w_m={} n_c={} d_c={} t={}",
            self.w_m,
            self.n_c,
            self.d_c,
            self.t_string()
        )
    }
}

pub(crate) mod skip_list {
    use serde::de::{self, SeqAccess, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn join(t: &[u32]) -> String {
        t.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse(s: &str) -> Result<Vec<u32>, String> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|_| format!("invalid skip budget {part:?} in {s:?}"))
            })
            .collect()
    }

    pub fn serialize<S: Serializer>(t: &[u32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&join(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u32>, D::Error> {
        struct SkipVisitor;

        impl<'de> Visitor<'de> for SkipVisitor {
            type Value = Vec<u32>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a \"t1;t2;...\" string or an array of integers")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Vec<u32>, E> {
                parse(v).map_err(E::custom)
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<u32>, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element::<u32>()? {
                    out.push(v);
                }
                Ok(out)
            }
        }

        d.deserialize_any(SkipVisitor)
    }
}

/// Bounds and coupling rules of the searchable set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSpec {
    pub w_m_min: u32,
    pub w_m_max: u32,
    pub d_c_min: u32,
    pub d_c_max: u32,
    /// Cell count. When `n_c_max` is set this is the lower end of a range.
    pub n_c: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c_max: Option<u32>,
    /// Base channel count per cell; cells past the end keep doubling.
    pub base_widths: Vec<u32>,
    pub t1_min: u32,
    /// `t_{c+1} >= coupling * t_c`.
    #[serde(default = "default_coupling")]
    pub coupling: u32,
}

fn default_coupling() -> u32 {
    2
}

impl Default for SpaceSpec {
    fn default() -> Self {
        SpaceSpec {
            w_m_min: 1,
            w_m_max: 3,
            d_c_min: 5,
            d_c_max: 30,
            n_c: 3,
            n_c_max: None,
            base_widths: vec![16, 32, 64],
            t1_min: 5,
            coupling: 2,
        }
    }
}

impl SpaceSpec {
    pub fn check(&self) -> Result<()> {
        if self.w_m_min == 0 {
            return Err(Error::Domain("w_m_min must be at least 1".into()));
        }
        if self.n_c == 0 {
            return Err(Error::Domain("n_c must be at least 1".into()));
        }
        if self.base_widths.is_empty() || self.base_widths.contains(&0) {
            return Err(Error::Domain(
                "base_widths must be non-empty and positive".into(),
            ));
        }
        if self.coupling == 0 {
            return Err(Error::Domain("coupling factor must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_c_range(&self) -> std::ops::RangeInclusive<u32> {
        self.n_c..=self.n_c_max.unwrap_or(self.n_c)
    }

    pub fn max_cells(&self) -> u32 {
        self.n_c_max.unwrap_or(self.n_c).max(self.n_c)
    }

    pub fn has_cell_range(&self) -> bool {
        self.n_c_max.is_some_and(|m| m > self.n_c)
    }

    /// Base width of zero-based cell `c`.
    pub fn base_width(&self, c: usize) -> u32 {
        match self.base_widths.get(c) {
            Some(&w) => w,
            None => {
                let last = *self.base_widths.last().expect("checked non-empty");
                let extra = (c + 1 - self.base_widths.len()) as u32;
                last << extra
            }
        }
    }

    /// Per-cell widths for `n_c` cells at multiplier `w_m`; no range check.
    pub fn widths(&self, w_m: u32, n_c: u32) -> Vec<u32> {
        (0..n_c as usize)
            .map(|c| self.base_width(c) * w_m)
            .collect()
    }

    /// Upper bound on `t_c`: the concatenation size of a cell's last layer.
    pub fn skip_ceiling(&self, c: usize, w_m: u32, d_c: u32) -> u32 {
        self.base_width(c) * w_m * d_c.saturating_sub(2)
    }
}

/// Per-cell channel counts for a width multiplier.
pub fn cell_widths(w_m: u32, spec: &SpaceSpec) -> Result<Vec<u32>> {
    if w_m < spec.w_m_min || w_m > spec.w_m_max {
        return Err(Error::Domain(format!(
            "w_m = {w_m} outside [{}, {}]",
            spec.w_m_min, spec.w_m_max
        )));
    }
    Ok(spec.widths(w_m, spec.n_c))
}

/// A single failed search-space constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WidthMultiplier {
        w_m: u32,
        min: u32,
        max: u32,
    },
    Depth {
        d_c: u32,
        min: u32,
        max: u32,
    },
    CellCount {
        n_c: u32,
        min: u32,
        max: u32,
    },
    SkipLength {
        n_c: u32,
        len: usize,
    },
    /// `t_1` below the floor.
    SkipFloor {
        t1: u32,
        min: u32,
    },
    /// `t_{cell}` below `coupling * t_{cell-1}`; `cell` is one-based.
    Coupling {
        cell: usize,
        t: u32,
        prev: u32,
        factor: u32,
    },
    /// `t_{cell}` above `base * w_m * (d_c - 2)`; `cell` is one-based.
    Ceiling {
        cell: usize,
        t: u32,
        base: u32,
        w_m: u32,
        d_c: u32,
        ceiling: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::WidthMultiplier { w_m, min, max } => {
                write!(f, "w_m = {w_m} outside [{min}, {max}]")
            }
            Violation::Depth { d_c, min, max } => write!(f, "d_c = {d_c} outside [{min}, {max}]"),
            Violation::CellCount { n_c, min, max } => {
                write!(f, "n_c = {n_c} outside [{min}, {max}]")
            }
            Violation::SkipLength { n_c, len } => {
                write!(f, "t has {len} entries but n_c = {n_c}")
            }
            Violation::SkipFloor { t1, min } => write!(f, "t_1 < {min} (t_1 = {t1})"),
            Violation::Coupling {
                cell,
                t,
                prev,
                factor,
            } => write!(
                f,
                "t_{cell} < {factor}·t_{} ({t} < {})",
                cell - 1,
                factor * prev
            ),
            Violation::Ceiling {
                cell,
                base,
                w_m,
                d_c,
                ceiling,
                ..
            } => write!(f, "t_{cell} > {base}·{w_m}·({d_c}−2)={ceiling}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.messages().join("; "))
    }
}

/// Checks every search-space constraint and reports all that fail.
pub fn validate(config: &ArchConfig, spec: &SpaceSpec) -> ValidationReport {
    let mut violations = Vec::new();
    if config.w_m < spec.w_m_min || config.w_m > spec.w_m_max {
        violations.push(Violation::WidthMultiplier {
            w_m: config.w_m,
            min: spec.w_m_min,
            max: spec.w_m_max,
        });
    }
    if config.d_c < spec.d_c_min || config.d_c > spec.d_c_max {
        violations.push(Violation::Depth {
            d_c: config.d_c,
            min: spec.d_c_min,
            max: spec.d_c_max,
        });
    }
    let n_c_range = spec.n_c_range();
    if !n_c_range.contains(&config.n_c) {
        violations.push(Violation::CellCount {
            n_c: config.n_c,
            min: *n_c_range.start(),
            max: *n_c_range.end(),
        });
    }
    if config.t.len() != config.n_c as usize {
        violations.push(Violation::SkipLength {
            n_c: config.n_c,
            len: config.t.len(),
        });
    }
    for (c, &t) in config.t.iter().enumerate() {
        if c == 0 {
            if t < spec.t1_min {
                violations.push(Violation::SkipFloor {
                    t1: t,
                    min: spec.t1_min,
                });
            }
        } else {
            let prev = config.t[c - 1];
            if (t as u64) < spec.coupling as u64 * prev as u64 {
                violations.push(Violation::Coupling {
                    cell: c + 1,
                    t,
                    prev,
                    factor: spec.coupling,
                });
            }
        }
        let ceiling = spec.skip_ceiling(c, config.w_m, config.d_c);
        if t > ceiling {
            violations.push(Violation::Ceiling {
                cell: c + 1,
                t,
                base: spec.base_width(c),
                w_m: config.w_m,
                d_c: config.d_c,
                ceiling,
            });
        }
    }
    ValidationReport { violations }
}

/// Number of skip-budget sequences for fixed `(w_m, n_c, d_c)`.
///
/// Counts `t_1 in [t1_min, U_1]`, `t_{c+1} in [k * t_c, U_{c+1}]` by a backward
/// pass with suffix sums, which is the nested sum over `t_1 .. t_{n_c - 1}`
/// with the innermost sum taken in closed form.
fn count_skip_sequences(spec: &SpaceSpec, w_m: u32, n_c: u32, d_c: u32) -> BigUint {
    let n = n_c as usize;
    let ceilings: Vec<u64> = (0..n)
        .map(|c| spec.skip_ceiling(c, w_m, d_c) as u64)
        .collect();
    let k = spec.coupling as u64;

    // completions[t] = number of valid (t_{c+1}, ..) given t_c = t.
    let last = ceilings[n - 1] as usize;
    let mut completions: Vec<BigUint> = vec![BigUint::from(1u32); last + 1];
    for c in (0..n - 1).rev() {
        let next = &completions;
        // suffix[v] = sum_{u >= v} next[u]
        let mut suffix = vec![BigUint::zero(); next.len() + 1];
        for v in (0..next.len()).rev() {
            suffix[v] = &suffix[v + 1] + &next[v];
        }
        let cap = ceilings[c] as usize;
        let current: Vec<BigUint> = (0..=cap)
            .map(|t| {
                let lo = k * t as u64;
                if lo as usize >= suffix.len() {
                    BigUint::zero()
                } else {
                    suffix[lo as usize].clone()
                }
            })
            .collect();
        completions = current;
    }
    let lo = spec.t1_min as usize;
    completions
        .iter()
        .skip(lo)
        .fold(BigUint::zero(), |acc, v| acc + v)
}

/// Exact size of the search space.
pub fn search_space_size(spec: &SpaceSpec) -> BigUint {
    let mut total = BigUint::zero();
    if spec.check().is_err() {
        return total;
    }
    for n_c in spec.n_c_range() {
        for w_m in spec.w_m_min..=spec.w_m_max {
            for d_c in spec.d_c_min..=spec.d_c_max {
                total += count_skip_sequences(spec, w_m, n_c, d_c);
            }
        }
    }
    total
}

/// Visits every valid configuration in lexicographic order.
///
/// The callback receives a reused buffer; clone it to keep it.
pub fn for_each_config<F: FnMut(&ArchConfig)>(spec: &SpaceSpec, mut f: F) {
    if spec.check().is_err() {
        return;
    }
    fn fill<F: FnMut(&ArchConfig)>(
        spec: &SpaceSpec,
        config: &mut ArchConfig,
        cell: usize,
        f: &mut F,
    ) {
        if cell == config.n_c as usize {
            f(config);
            return;
        }
        let lo = if cell == 0 {
            spec.t1_min as u64
        } else {
            spec.coupling as u64 * config.t[cell - 1] as u64
        };
        let hi = spec.skip_ceiling(cell, config.w_m, config.d_c) as u64;
        for t in lo..=hi {
            config.t[cell] = t as u32;
            fill(spec, config, cell + 1, f);
        }
    }

    for w_m in spec.w_m_min..=spec.w_m_max {
        for n_c in spec.n_c_range() {
            for d_c in spec.d_c_min..=spec.d_c_max {
                let mut config = ArchConfig {
                    w_m,
                    n_c,
                    d_c,
                    t: vec![0; n_c as usize],
                };
                fill(spec, &mut config, 0, &mut f);
            }
        }
    }
}

/// Draws `n` configurations uniformly from the valid set.
///
/// Rejection sampling from the axis-aligned bounding box of the space. With a
/// cell-count range, budgets of absent cells must land on their lower bound,
/// which keeps every valid configuration equally likely.
pub fn sample_uniform(spec: &SpaceSpec, seed: u64, n: usize) -> Result<Vec<ArchConfig>> {
    spec.check()?;
    if search_space_size(spec).is_zero() {
        return Err(Error::InfeasibleSpace);
    }
    let max_cells = spec.max_cells() as usize;
    let mut lo = Vec::with_capacity(max_cells);
    let mut hi = Vec::with_capacity(max_cells);
    for c in 0..max_cells {
        let floor = if c == 0 {
            spec.t1_min as u64
        } else {
            lo[c - 1] * spec.coupling as u64
        };
        lo.push(floor);
        hi.push(spec.skip_ceiling(c, spec.w_m_max, spec.d_c_max) as u64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut draw = vec![0u64; max_cells];
    while out.len() < n {
        let w_m = rng.random_range(spec.w_m_min..=spec.w_m_max);
        let n_c = rng.random_range(spec.n_c_range());
        let d_c = rng.random_range(spec.d_c_min..=spec.d_c_max);
        let mut in_box = true;
        for c in 0..max_cells {
            if lo[c] > hi[c] {
                in_box = false;
                break;
            }
            draw[c] = rng.random_range(lo[c]..=hi[c]);
        }
        if !in_box {
            continue;
        }
        if draw[n_c as usize..]
            .iter()
            .zip(&lo[n_c as usize..])
            .any(|(d, l)| d != l)
        {
            continue;
        }
        let config = ArchConfig {
            w_m,
            n_c,
            d_c,
            t: draw[..n_c as usize].iter().map(|&v| v as u32).collect(),
        };
        if validate(&config, spec).is_valid() {
            out.push(config);
        }
    }
    Ok(out)
}

/// Input tensor shape and kernel size used when expanding a config into layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerGeometry {
    pub h0: u32,
    pub w0: u32,
    pub c0: u32,
    pub kx: u32,
    pub ky: u32,
}

impl Default for LayerGeometry {
    fn default() -> Self {
        LayerGeometry {
            h0: 32,
            w0: 32,
            c0: 3,
            kx: 3,
            ky: 3,
        }
    }
}

/// One convolution layer of a realized architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayerDescriptor {
    /// Zero-based cell index.
    pub cell: u32,
    /// Zero-based layer index within the cell.
    pub layer: u32,
    pub kx: u32,
    pub ky: u32,
    pub n_if: u32,
    pub n_of: u32,
    pub h: u32,
    pub w: u32,
    pub concat_count: u32,
}

/// Channels concatenated at zero-based layer `i` of a cell of width `w_c`.
pub fn concat_count(i: u32, d_c: u32, w_c: u32, t_c: u32) -> u32 {
    if i >= 2 && i < d_c {
        ((i - 1) * w_c).min(t_c)
    } else {
        0
    }
}

/// Expands a config into `n_c * d_c` layer descriptors.
///
/// Feature maps halve (ceiling division) at every cell boundary after the
/// first cell. Only the shape of the config is checked here.
pub fn realize_layers(
    config: &ArchConfig,
    spec: &SpaceSpec,
    geometry: &LayerGeometry,
) -> Result<Vec<LayerDescriptor>> {
    if config.t.len() != config.n_c as usize {
        return Err(Error::Domain(format!(
            "t has {} entries but n_c = {}",
            config.t.len(),
            config.n_c
        )));
    }
    spec.check()?;
    let widths = spec.widths(config.w_m, config.n_c);
    let mut layers = Vec::with_capacity((config.n_c * config.d_c) as usize);
    let (mut h, mut w) = (geometry.h0, geometry.w0);
    let mut prev_width = geometry.c0;
    for (c, (&w_c, &t_c)) in widths.iter().zip(&config.t).enumerate() {
        if c > 0 {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        for i in 0..config.d_c {
            let concat = concat_count(i, config.d_c, w_c, t_c);
            let n_if = match i {
                0 => prev_width,
                _ => w_c + concat,
            };
            layers.push(LayerDescriptor {
                cell: c as u32,
                layer: i,
                kx: geometry.kx,
                ky: geometry.ky,
                n_if,
                n_of: w_c,
                h,
                w,
                concat_count: concat,
            });
        }
        prev_width = w_c;
    }
    Ok(layers)
}
