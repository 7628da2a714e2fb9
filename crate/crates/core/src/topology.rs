//! NN-Degree: the summed average node degree of an architecture's cells.
//!
//! Each channel is a node and each convolution kernel a link. A cell of width
//! `w_c` and depth `d_c` has `w_c * d_c` nodes and `w_c^2 * d_c` short-range
//! links, so its lattice term is `w_c`. Its `SC_c` skip links add
//! `SC_c / (w_c * d_c)`, where `SC_c = w_c * sum_i min{(i - 1) * w_c, t_c}`.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::arch::{concat_count, validate, ArchConfig, LayerDescriptor, SpaceSpec};
use crate::error::{Error, Result};

pub type Exact = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDegree {
    pub width: u32,
    pub depth: u32,
    /// Skip-connection kernels `SC_c`.
    pub skip_connections: u64,
    pub lattice: f64,
    pub random: f64,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub g: f64,
    pub g_lattice: f64,
    pub g_random: f64,
    pub per_cell: Vec<CellDegree>,
    #[serde(skip)]
    pub exact: Exact,
    #[serde(skip)]
    pub exact_random: Vec<Exact>,
}

impl DegreeReport {
    pub fn skip_connections(&self) -> Vec<u64> {
        self.per_cell.iter().map(|c| c.skip_connections).collect()
    }

    pub fn total_skip_connections(&self) -> u64 {
        self.per_cell.iter().map(|c| c.skip_connections).sum()
    }
}

fn to_f64(r: &Exact) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// NN-Degree of a config that has already passed validation.
pub fn nn_degree(config: &ArchConfig, spec: &SpaceSpec) -> Result<DegreeReport> {
    let report = validate(config, spec);
    if !report.is_valid() {
        return Err(Error::Domain(format!("invalid config {config}: {report}")));
    }
    nn_degree_unchecked(config, spec)
}

/// NN-Degree without search-space validation; only the config's shape is checked.
pub fn nn_degree_unchecked(config: &ArchConfig, spec: &SpaceSpec) -> Result<DegreeReport> {
    if config.t.len() != config.n_c as usize {
        return Err(Error::Domain(format!(
            "t has {} entries but n_c = {}",
            config.t.len(),
            config.n_c
        )));
    }
    if config.d_c == 0 {
        return Err(Error::Domain("d_c must be positive".into()));
    }
    spec.check()?;
    let widths = spec.widths(config.w_m, config.n_c);
    let d_c = config.d_c as u64;

    let mut per_cell = Vec::with_capacity(widths.len());
    let mut exact_random = Vec::with_capacity(widths.len());
    let mut lattice = 0u64;
    let mut random = Exact::zero();
    for (&w_c, &t_c) in widths.iter().zip(&config.t) {
        let concat: u64 = (2..config.d_c)
            .map(|i| concat_count(i, config.d_c, w_c, t_c) as u64)
            .sum();
        let skip_connections = w_c as u64 * concat;
        let random_c = Exact::new(concat, d_c);
        lattice += w_c as u64;
        random += random_c;
        per_cell.push(CellDegree {
            width: w_c,
            depth: config.d_c,
            skip_connections,
            lattice: w_c as f64,
            random: to_f64(&random_c),
            degree: to_f64(&(random_c + Exact::from_integer(w_c as u64))),
        });
        exact_random.push(random_c);
    }
    let exact = random + Exact::from_integer(lattice);
    Ok(DegreeReport {
        g: to_f64(&exact),
        g_lattice: lattice as f64,
        g_random: to_f64(&random),
        per_cell,
        exact,
        exact_random,
    })
}

/// Kernel and node tallies of one cell, counted layer by layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellKernels {
    /// All kernels of the cell, `sum N_if * N_of`.
    pub kernels: u64,
    /// Short-range kernels, `w_c * w_c` per layer.
    pub lattice_kernels: u64,
    /// Skip kernels, `concat_count * w_c` per layer.
    pub skip_kernels: u64,
    pub nodes: u64,
}

impl CellKernels {
    pub fn lattice_degree(&self) -> Exact {
        Exact::new(self.lattice_kernels, self.nodes)
    }

    pub fn skip_degree(&self) -> Exact {
        Exact::new(self.skip_kernels, self.nodes)
    }

    pub fn degree(&self) -> Exact {
        self.lattice_degree() + self.skip_degree()
    }
}

/// Brute-force link counting over realized layers, grouped by cell.
///
/// Independent of [`nn_degree`]: it only looks at the layer descriptors.
pub fn count_kernels_oracle(layers: &[LayerDescriptor]) -> Vec<CellKernels> {
    let mut cells: Vec<CellKernels> = Vec::new();
    for layer in layers {
        let c = layer.cell as usize;
        if cells.len() <= c {
            cells.resize(c + 1, CellKernels::default());
        }
        let cell = &mut cells[c];
        let out = layer.n_of as u64;
        cell.kernels += layer.n_if as u64 * out;
        cell.lattice_kernels += out * out;
        cell.skip_kernels += layer.concat_count as u64 * out;
        cell.nodes += out;
    }
    cells
}

/// Sum of per-cell degrees from [`count_kernels_oracle`].
pub fn oracle_degree(cells: &[CellKernels]) -> Exact {
    cells
        .iter()
        .fold(Exact::zero(), |acc, cell| acc + cell.degree())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{realize_layers, LayerGeometry};

    fn cfg(w_m: u32, d_c: u32, t: &[u32]) -> ArchConfig {
        ArchConfig::new(w_m, d_c, t.to_vec())
    }

    #[test]
    fn zero_skip_budget_leaves_width_sum() {
        let r = nn_degree_unchecked(&cfg(1, 5, &[0, 0, 0]), &SpaceSpec::default()).unwrap();
        assert_eq!(r.exact, Exact::from_integer(112));
        assert_eq!(r.g_random, 0.0);
        assert!(nn_degree(&cfg(1, 5, &[0, 0, 0]), &SpaceSpec::default()).is_err());
    }

    #[test]
    fn hand_expanded_examples() {
        let spec = SpaceSpec::default();
        let r = nn_degree(&cfg(1, 5, &[5, 10, 20]), &spec).unwrap();
        assert_eq!(r.exact, Exact::from_integer(133));
        assert_eq!(r.g, 133.0);
        assert_eq!(r.g_lattice, 112.0);
        assert_eq!(r.g_random, 21.0);
        assert_eq!(r.skip_connections(), vec![240, 960, 3840]);

        let r = nn_degree(&cfg(2, 5, &[5, 10, 20]), &spec).unwrap();
        assert_eq!(r.exact, Exact::from_integer(245));
    }

    #[test]
    fn oracle_counts_single_cell() {
        let spec = SpaceSpec {
            base_widths: vec![16],
            n_c: 1,
            ..SpaceSpec::default()
        };
        let layers = realize_layers(&cfg(1, 5, &[5]), &spec, &LayerGeometry::default()).unwrap();
        let cells = count_kernels_oracle(&layers);
        assert_eq!(cells[0].skip_kernels, 240);
        assert_eq!(cells[0].nodes, 80);
        assert_eq!(cells[0].skip_degree(), Exact::from_integer(3));

        let layers = realize_layers(&cfg(1, 5, &[0]), &spec, &LayerGeometry::default()).unwrap();
        assert_eq!(count_kernels_oracle(&layers)[0].skip_kernels, 0);
    }

    #[test]
    fn non_integer_degree_stays_exact() {
        let spec = SpaceSpec::default();
        let c = cfg(1, 7, &[5, 11, 23]);
        let r = nn_degree(&c, &spec).unwrap();
        let layers = realize_layers(&c, &spec, &LayerGeometry::default()).unwrap();
        assert_eq!(oracle_degree(&count_kernels_oracle(&layers)), r.exact);
        assert_ne!(*r.exact.denom(), 1);
    }
}
