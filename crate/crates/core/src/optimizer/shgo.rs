//! Derivative-free global minimization over an integer box.
//!
//! The box is sampled on a lattice of step `λ` per axis (plus each upper
//! bound). Lattice points that beat every lattice neighbour are refined by
//! best-improvement descent over single-axis and paired-axis moves. Paired
//! moves and optional repair moves let the descent slide along active
//! constraint boundaries. Axes whose lattice would exceed the point budget
//! start with a coarser step that is halved down to `λ` during descent.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Cap on lattice points evaluated in the global pass.
const MAX_LATTICE: usize = 200_000;

/// Outcome of one objective call, ranked feasibility-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub feasible: bool,
    /// Minimized.
    pub value: f64,
    /// Constraint excess; ranks infeasible points only.
    pub violation: f64,
}

impl Score {
    pub fn feasible(value: f64) -> Self {
        Score {
            feasible: true,
            value,
            violation: 0.0,
        }
    }

    pub fn infeasible(value: f64, violation: f64) -> Self {
        Score {
            feasible: false,
            value,
            violation,
        }
    }

    /// `Less` means `self` ranks better. NaN ranks last.
    pub fn cmp_rank(&self, other: &Score) -> Ordering {
        fn nan_last(a: f64, b: f64) -> Ordering {
            match (a.is_nan(), b.is_nan()) {
                (false, false) => a.partial_cmp(&b).expect("not NaN"),
                (a, b) => a.cmp(&b),
            }
        }
        match (self.feasible, other.feasible) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (true, true) => nan_last(self.value, other.value),
            (false, false) => nan_last(self.violation, other.violation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShgoOptions {
    /// Lattice step `λ`; at least 1.
    pub step: i64,
    /// Upper bound on the number of lattice points in the global pass.
    pub max_lattice: usize,
    /// Move set used by the descent.
    pub moves: Moves,
    /// When a move from a feasible point lands on an infeasible one, scan up
    /// to this many steps along each unmoved axis for the nearest feasible
    /// repair and offer it as a move; 0 disables repairs.
    pub repair: i64,
}

/// Descent move sets, each scaled by the current per-axis step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moves {
    /// `±e_i`.
    Axes,
    /// `±e_i` and `±e_i ± e_j`.
    Pairs,
    /// Every non-zero vector in `{-1, 0, 1}^n`; `n` must be at most [`MAX_FULL_DIMS`].
    Full,
}

pub const MAX_FULL_DIMS: usize = 8;

impl ShgoOptions {
    pub fn new(step: i64) -> Self {
        ShgoOptions {
            step,
            max_lattice: MAX_LATTICE,
            moves: Moves::Pairs,
            repair: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShgoOutcome {
    pub point: Vec<i64>,
    pub score: Score,
    /// Distinct points for which the objective returned a score.
    pub evaluations: u64,
    pub local_minimizers: usize,
    /// Distinct descent end points, best first.
    pub endpoints: Vec<(Vec<i64>, Score)>,
}

fn better(a: (&[i64], &Score), b: (&[i64], &Score)) -> bool {
    a.1.cmp_rank(b.1).then_with(|| a.0.cmp(b.0)) == Ordering::Less
}

struct Memo<F> {
    f: F,
    seen: HashMap<Vec<i64>, Option<Score>>,
    evaluations: u64,
    best: Option<(Vec<i64>, Score)>,
}

impl<F: FnMut(&[i64]) -> Option<Score>> Memo<F> {
    fn get(&mut self, p: &[i64]) -> Option<Score> {
        if let Some(s) = self.seen.get(p) {
            return *s;
        }
        let s = (self.f)(p);
        if let Some(score) = s {
            self.evaluations += 1;
            let replace = match &self.best {
                None => true,
                Some((bp, bs)) => better((p, &score), (bp, bs)),
            };
            if replace {
                self.best = Some((p.to_vec(), score));
            }
        }
        self.seen.insert(p.to_vec(), s);
        s
    }
}

/// Minimizes `f` over the integer box `[lo, hi]` with lattice step `step`.
///
/// `f` returns `None` for points outside its domain; those are never
/// minimizers and are not counted as evaluations.
pub fn shgo_minimize<F>(f: F, lo: &[i64], hi: &[i64], step: i64) -> Result<ShgoOutcome>
where
    F: FnMut(&[i64]) -> Option<Score>,
{
    shgo_minimize_with(f, lo, hi, &ShgoOptions::new(step))
}

fn check_box(lo: &[i64], hi: &[i64], step: i64) -> Result<()> {
    if lo.is_empty() || hi.len() != lo.len() {
        return Err(Error::Domain(
            "search box needs matching, non-empty bounds".into(),
        ));
    }
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(Error::Domain("search box is empty".into()));
    }
    if step < 1 {
        return Err(Error::Domain(format!(
            "step must be at least 1, got {step}"
        )));
    }
    Ok(())
}

/// [`shgo_minimize`] with explicit options.
pub fn shgo_minimize_with<F>(
    f: F,
    lo: &[i64],
    hi: &[i64],
    options: &ShgoOptions,
) -> Result<ShgoOutcome>
where
    F: FnMut(&[i64]) -> Option<Score>,
{
    check_box(lo, hi, options.step)?;
    let dims = lo.len();
    let lambda = options.step;

    let steps = axis_steps(lo, hi, lambda, options.max_lattice.max(1));
    let axes: Vec<Vec<i64>> = (0..dims)
        .map(|d| {
            let mut axis: Vec<i64> = (lo[d]..=hi[d]).step_by(steps[d] as usize).collect();
            if axis.last() != Some(&hi[d]) {
                axis.push(hi[d]);
            }
            axis
        })
        .collect();

    let mut memo = Memo {
        f,
        seen: HashMap::new(),
        evaluations: 0,
        best: None,
    };

    // Global pass: every lattice point, in odometer order.
    let total: usize = axes.iter().map(Vec::len).product();
    let mut grid: Vec<Option<Score>> = Vec::with_capacity(total);
    let mut index = vec![0usize; dims];
    let mut point: Vec<i64> = axes.iter().map(|a| a[0]).collect();
    for _ in 0..total {
        grid.push(memo.get(&point));
        for d in (0..dims).rev() {
            index[d] += 1;
            if index[d] < axes[d].len() {
                point[d] = axes[d][index[d]];
                break;
            }
            index[d] = 0;
            point[d] = axes[d][0];
        }
    }

    // Lattice-local minimizers: better than every lattice neighbour.
    let mut strides = vec![1usize; dims];
    for d in (0..dims.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * axes[d + 1].len();
    }
    let coords = |flat: usize| -> Vec<usize> {
        (0..dims)
            .map(|d| (flat / strides[d]) % axes[d].len())
            .collect()
    };
    let to_point =
        |idx: &[usize]| -> Vec<i64> { idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect() };
    let mut minimizers = Vec::new();
    for (flat, score) in grid.iter().enumerate() {
        let Some(score) = score else { continue };
        let idx = coords(flat);
        let p = to_point(&idx);
        let mut is_min = true;
        'axes: for d in 0..dims {
            for delta in [-1i64, 1] {
                let j = idx[d] as i64 + delta;
                if j < 0 || j as usize >= axes[d].len() {
                    continue;
                }
                let nflat = (flat as i64 + delta * strides[d] as i64) as usize;
                if let Some(ns) = &grid[nflat] {
                    let mut q = p.clone();
                    q[d] = axes[d][j as usize];
                    if better((&q, ns), (&p, score)) {
                        is_min = false;
                        break 'axes;
                    }
                }
            }
        }
        if is_min {
            minimizers.push(p);
        }
    }
    drop(grid);

    let mut endpoints = Vec::new();
    for start in &minimizers {
        if let Some(end) = descend(&mut memo, start.clone(), lo, hi, &steps, lambda, options) {
            endpoints.push(end);
        }
    }
    finish(memo, endpoints, minimizers.len())
}

/// Descent alone from `start` inside `[lo, hi]`, with steps halving from
/// `initial` down to `options.step`.
pub fn local_descent<F>(
    f: F,
    start: &[i64],
    lo: &[i64],
    hi: &[i64],
    initial: i64,
    options: &ShgoOptions,
) -> Result<ShgoOutcome>
where
    F: FnMut(&[i64]) -> Option<Score>,
{
    check_box(lo, hi, options.step)?;
    if start.len() != lo.len() {
        return Err(Error::Domain("start point has the wrong dimension".into()));
    }
    if options.moves == Moves::Full && lo.len() > MAX_FULL_DIMS {
        return Err(Error::Domain(format!(
            "full move set supports at most {MAX_FULL_DIMS} dimensions, got {}",
            lo.len()
        )));
    }
    let mut memo = Memo {
        f,
        seen: HashMap::new(),
        evaluations: 0,
        best: None,
    };
    let steps = vec![initial.max(options.step); lo.len()];
    let endpoints = descend(
        &mut memo,
        start.to_vec(),
        lo,
        hi,
        &steps,
        options.step,
        options,
    )
    .into_iter()
    .collect();
    finish(memo, endpoints, 0)
}

fn finish<F>(
    memo: Memo<F>,
    mut endpoints: Vec<(Vec<i64>, Score)>,
    local_minimizers: usize,
) -> Result<ShgoOutcome> {
    endpoints.sort_by(|a, b| a.1.cmp_rank(&b.1).then_with(|| a.0.cmp(&b.0)));
    endpoints.dedup_by(|a, b| a.0 == b.0);
    match memo.best {
        Some((point, score)) if score.feasible => Ok(ShgoOutcome {
            point,
            score,
            evaluations: memo.evaluations,
            local_minimizers,
            endpoints,
        }),
        Some((point, score)) => Err(Error::infeasible(
            format!(
                "no feasible point among {} evaluated (least violation {})",
                memo.evaluations, score.violation
            ),
            Some(point),
        )),
        None => Err(Error::infeasible(
            "no point of the box lies in the domain",
            None,
        )),
    }
}

/// Per-axis lattice steps: `λ` unless the lattice would exceed `max_points`.
fn axis_steps(lo: &[i64], hi: &[i64], lambda: i64, max_points: usize) -> Vec<i64> {
    let count = |span: i64, step: i64| (span / step + 1) as usize;
    let spans: Vec<i64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let mut steps = vec![lambda; spans.len()];
    let total = |steps: &[i64]| -> f64 {
        spans
            .iter()
            .zip(steps)
            .map(|(&s, &st)| count(s, st) as f64)
            .product()
    };
    // Coarsen the longest axis until the budget holds.
    while total(&steps) > max_points as f64 {
        let (d, _) = spans
            .iter()
            .zip(&steps)
            .enumerate()
            .map(|(d, (&s, &st))| (d, count(s, st)))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if count(spans[d], steps[d]) <= 2 {
            break;
        }
        steps[d] *= 2;
    }
    steps
}

/// Moves from `p` under `moves`, clipped to the box; moves that clip to a
/// no-op on any moved axis are dropped.
fn neighbours(p: &[i64], lo: &[i64], hi: &[i64], steps: &[i64], moves: Moves) -> Vec<Vec<i64>> {
    let n = p.len();
    let mut out = Vec::new();
    let mut push = |dirs: &[(usize, i64)]| {
        let mut q = p.to_vec();
        for &(d, dir) in dirs {
            q[d] = (p[d] + dir * steps[d]).clamp(lo[d], hi[d]);
            if q[d] == p[d] {
                return;
            }
        }
        out.push(q);
    };
    match moves {
        Moves::Axes | Moves::Pairs => {
            for d in 0..n {
                for dir in [-1i64, 1] {
                    push(&[(d, dir)]);
                }
            }
            if moves == Moves::Pairs {
                for d1 in 0..n {
                    for d2 in d1 + 1..n {
                        for (a, b) in [(-1i64, -1i64), (-1, 1), (1, -1), (1, 1)] {
                            push(&[(d1, a), (d2, b)]);
                        }
                    }
                }
            }
        }
        Moves::Full => {
            let total = 3usize.pow(n as u32);
            for code in 0..total {
                let mut rest = code;
                let mut dirs = Vec::with_capacity(n);
                for d in 0..n {
                    let dir = (rest % 3) as i64 - 1;
                    rest /= 3;
                    if dir != 0 {
                        dirs.push((d, dir));
                    }
                }
                if !dirs.is_empty() {
                    push(&dirs);
                }
            }
        }
    }
    out
}

/// Nearest feasible points reached from the infeasible `q` by moving one
/// axis not in `moved`.
fn repairs<F: FnMut(&[i64]) -> Option<Score>>(
    memo: &mut Memo<F>,
    q: &[i64],
    moved: &[bool],
    lo: &[i64],
    hi: &[i64],
    steps: &[i64],
    limit: i64,
) -> Vec<(Vec<i64>, Score)> {
    let mut out = Vec::new();
    for j in (0..q.len()).filter(|&j| !moved[j]) {
        for dir in [-1i64, 1] {
            for k in 1..=limit {
                let v = q[j] + dir * k * steps[j];
                if v < lo[j] || v > hi[j] {
                    break;
                }
                let mut r = q.to_vec();
                r[j] = v;
                if let Some(s) = memo.get(&r) {
                    if s.feasible {
                        out.push((r, s));
                        break;
                    }
                }
            }
        }
    }
    out
}

/// Best-improvement descent with moves clipped to the box; returns the end point.
fn descend<F: FnMut(&[i64]) -> Option<Score>>(
    memo: &mut Memo<F>,
    mut p: Vec<i64>,
    lo: &[i64],
    hi: &[i64],
    initial: &[i64],
    lambda: i64,
    options: &ShgoOptions,
) -> Option<(Vec<i64>, Score)> {
    let mut current = memo.get(&p)?;
    let mut steps = initial.to_vec();
    loop {
        let mut best: Option<(Vec<i64>, Score)> = None;
        let offer = |q: Vec<i64>, s: Score, best: &mut Option<(Vec<i64>, Score)>| {
            let beats = match best {
                None => better((&q, &s), (&p, &current)),
                Some((bq, bs)) => better((&q, &s), (bq, bs)),
            };
            if beats {
                *best = Some((q, s));
            }
        };
        for q in neighbours(&p, lo, hi, &steps, options.moves) {
            let Some(s) = memo.get(&q) else { continue };
            if options.repair > 0 && current.feasible && !s.feasible {
                let moved: Vec<bool> = (0..p.len()).map(|d| q[d] != p[d]).collect();
                for (r, rs) in repairs(memo, &q, &moved, lo, hi, &steps, options.repair) {
                    offer(r, rs, &mut best);
                }
            }
            offer(q, s, &mut best);
        }
        match best {
            Some((q, s)) => {
                p = q;
                current = s;
            }
            None if steps.iter().all(|&s| s == lambda) => return Some((p, current)),
            None => {
                for s in &mut steps {
                    *s = (*s / 2).max(lambda);
                }
            }
        }
    }
}
