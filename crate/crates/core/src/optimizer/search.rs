use std::cmp::Ordering;
use std::collections::HashMap;

use log::{debug, info};
use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::shgo::{local_descent, shgo_minimize, Moves, ShgoOptions, ShgoOutcome, MAX_FULL_DIMS};
use super::{
    compare_candidates, evaluate_unchecked, Constraints, Evaluation, Objective, ObjectiveMode,
    SearchResult, TraceEntry,
};
use crate::arch::{
    for_each_config, sample_uniform, search_space_size, validate, ArchConfig, SpaceSpec,
};
use crate::error::{Error, Result};
use crate::hwmodel::{CostModels, HwConfig};

pub const DEFAULT_STEP: i64 = 4;

/// Coarse end points refined by a step-1 pass, per `w_m`.
const FINE_STARTS: usize = 3;

/// Evaluated configs per depth used as final descent starts.
const POLISH_STARTS: usize = 3;

/// Longest repair scan in the final descent.
const REPAIR_STEPS: i64 = 64;

/// Largest space `brute_force_search` will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Maps integer search points to configs.
///
/// Coordinates are `[w_m]? [n_c]? d_c s_1 .. s_C` where the budgets follow
/// from slacks: `t_1 = s_1`, `t_{c+1} = k * t_c + s_{c+1}`. Every point
/// satisfies the coupling rule by construction; points over a ceiling map to
/// `None`. In budget mode the last coordinates are `t_1 .. t_C` themselves
/// and points breaking the coupling rule map to `None`.
struct Mapping<'a> {
    spec: &'a SpaceSpec,
    fixed_w_m: Option<u32>,
    budgets: bool,
}

impl<'a> Mapping<'a> {
    fn new(spec: &'a SpaceSpec, fixed_w_m: Option<u32>) -> Self {
        Mapping {
            spec,
            fixed_w_m,
            budgets: false,
        }
    }

    fn with_budgets(spec: &'a SpaceSpec, fixed_w_m: Option<u32>) -> Self {
        Mapping {
            spec,
            fixed_w_m,
            budgets: true,
        }
    }

    fn bounds(&self) -> (Vec<i64>, Vec<i64>) {
        let spec = self.spec;
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        if self.fixed_w_m.is_none() {
            lo.push(spec.w_m_min as i64);
            hi.push(spec.w_m_max as i64);
        }
        if spec.has_cell_range() {
            let r = spec.n_c_range();
            lo.push(*r.start() as i64);
            hi.push(*r.end() as i64);
        }
        lo.push(spec.d_c_min as i64);
        hi.push(spec.d_c_max as i64);

        let w_hi = self.fixed_w_m.unwrap_or(spec.w_m_max);
        let k = spec.coupling as i64;
        let mut t_floor = spec.t1_min as i64;
        for c in 0..spec.max_cells() as usize {
            let ceiling = spec.skip_ceiling(c, w_hi, spec.d_c_max) as i64;
            if self.budgets {
                lo.push(t_floor);
                hi.push(ceiling.max(t_floor));
                t_floor *= k;
            } else if c == 0 {
                lo.push(t_floor);
                hi.push(ceiling.max(t_floor));
            } else {
                t_floor *= k;
                lo.push(0);
                hi.push((ceiling - t_floor).max(0));
            }
        }
        (lo, hi)
    }

    fn config(&self, p: &[i64]) -> Option<ArchConfig> {
        let spec = self.spec;
        let mut it = p.iter().copied();
        let w_m = match self.fixed_w_m {
            Some(w) => w,
            None => it.next()? as u32,
        };
        let n_c = if spec.has_cell_range() {
            it.next()? as u32
        } else {
            spec.n_c
        };
        let d_c = it.next()? as u32;
        let slacks: Vec<i64> = it.collect();
        let mut t = Vec::with_capacity(n_c as usize);
        let mut prev = 0i64;
        for (c, &s) in slacks.iter().take(n_c as usize).enumerate() {
            let v = if c == 0 || self.budgets {
                s
            } else {
                spec.coupling as i64 * prev + s
            };
            if v > u32::MAX as i64 {
                return None;
            }
            t.push(v as u32);
            prev = v;
        }
        let config = ArchConfig { w_m, n_c, d_c, t };
        validate(&config, spec).is_valid().then_some(config)
    }

    /// Inverse of [`Mapping::config`]; unused cells get zero slack.
    fn point(&self, config: &ArchConfig) -> Vec<i64> {
        let spec = self.spec;
        let mut p = Vec::new();
        if self.fixed_w_m.is_none() {
            p.push(config.w_m as i64);
        }
        if spec.has_cell_range() {
            p.push(config.n_c as i64);
        }
        p.push(config.d_c as i64);
        let k = spec.coupling as i64;
        let mut prev = 0i64;
        for c in 0..spec.max_cells() as usize {
            match config.t.get(c) {
                Some(&t) => {
                    let t = t as i64;
                    p.push(if c == 0 || self.budgets {
                        t
                    } else {
                        t - k * prev
                    });
                    prev = t;
                }
                None if self.budgets => p.push(prev.max(spec.t1_min as i64) * k),
                None => p.push(0),
            }
        }
        p
    }
}

/// Memoized objective over configs.
struct Evaluator<'a> {
    spec: &'a SpaceSpec,
    objective: &'a Objective,
    constraints: &'a Constraints,
    memo: HashMap<ArchConfig, Evaluation>,
    error: Option<Error>,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a SpaceSpec, objective: &'a Objective, constraints: &'a Constraints) -> Self {
        Evaluator {
            spec,
            objective,
            constraints,
            memo: HashMap::new(),
            error: None,
        }
    }

    fn eval(&mut self, config: &ArchConfig) -> Option<Evaluation> {
        if let Some(e) = self.memo.get(config) {
            return Some(*e);
        }
        if self.error.is_some() {
            return None;
        }
        match evaluate_unchecked(config, self.spec, self.objective, self.constraints) {
            Ok(e) => {
                self.memo.insert(config.clone(), e);
                Some(e)
            }
            Err(err) => {
                self.error = Some(err);
                None
            }
        }
    }

    fn shgo(
        &mut self,
        mapping: &Mapping,
        lo: &[i64],
        hi: &[i64],
        step: i64,
    ) -> Result<ShgoOutcome> {
        let out = shgo_minimize(
            |p| {
                mapping
                    .config(p)
                    .and_then(|c| self.eval(&c))
                    .map(|e| e.score())
            },
            lo,
            hi,
            step,
        );
        match self.error.take() {
            Some(err) => Err(err),
            None => out,
        }
    }

    fn descend(&mut self, mapping: &Mapping, start: &[i64], initial: i64) -> Result<ShgoOutcome> {
        let (lo, hi) = mapping.bounds();
        let mut options = ShgoOptions::new(1);
        if lo.len() <= MAX_FULL_DIMS {
            options.moves = Moves::Full;
        }
        options.repair = REPAIR_STEPS;
        let out = local_descent(
            |p| {
                mapping
                    .config(p)
                    .and_then(|c| self.eval(&c))
                    .map(|e| e.score())
            },
            start,
            &lo,
            &hi,
            initial,
            &options,
        );
        match self.error.take() {
            Some(err) => Err(err),
            None => out,
        }
    }

    fn candidate(&mut self, mapping: &Mapping, point: &[i64]) -> (ArchConfig, Evaluation) {
        let config = mapping
            .config(point)
            .expect("outcome point maps to a config");
        let eval = self.memo[&config];
        (config, eval)
    }

    /// The `k` best evaluated configs with the given width and depth.
    fn best_at(&self, w_m: u32, d_c: u32, k: usize) -> Vec<ArchConfig> {
        let mut at: Vec<_> = self
            .memo
            .iter()
            .filter(|(c, _)| c.w_m == w_m && c.d_c == d_c)
            .collect();
        at.sort_by(|a, b| compare_candidates((a.0, a.1), (b.0, b.1)));
        at.into_iter().take(k).map(|(c, _)| c.clone()).collect()
    }

    fn least_infeasible(&self) -> Option<Vec<i64>> {
        self.memo
            .iter()
            .min_by(|a, b| compare_candidates((a.0, a.1), (b.0, b.1)))
            .map(|(c, _)| flatten(c))
    }
}

fn flatten(c: &ArchConfig) -> Vec<i64> {
    [c.w_m, c.n_c, c.d_c]
        .iter()
        .chain(&c.t)
        .map(|&v| v as i64)
        .collect()
}

fn better_of(
    a: Option<(ArchConfig, Evaluation)>,
    b: Option<(ArchConfig, Evaluation)>,
) -> Option<(ArchConfig, Evaluation)> {
    match (a, b) {
        (Some(a), Some(b)) => {
            if compare_candidates((&b.0, &b.1), (&a.0, &a.1)) == Ordering::Less {
                Some(b)
            } else {
                Some(a)
            }
        }
        (a, b) => a.or(b),
    }
}

/// `config` moved to depth `d_c` with budgets lowered to fit its ceilings.
fn rescale_depth(spec: &SpaceSpec, config: &ArchConfig, d_c: u32) -> Option<ArchConfig> {
    let mut t: Vec<u32> = config
        .t
        .iter()
        .enumerate()
        .map(|(c, &t)| t.min(spec.skip_ceiling(c, config.w_m, d_c)))
        .collect();
    for c in (0..t.len().saturating_sub(1)).rev() {
        t[c] = t[c].min(t[c + 1] / spec.coupling);
    }
    let moved = ArchConfig {
        w_m: config.w_m,
        n_c: config.n_c,
        d_c,
        t,
    };
    validate(&moved, spec).is_valid().then_some(moved)
}

fn entry(level: &str, config: &ArchConfig, eval: &Evaluation) -> TraceEntry {
    TraceEntry {
        level: level.to_string(),
        w_m: config.w_m,
        config: config.clone(),
        value: eval.value,
        feasible: eval.feasible,
    }
}

fn precheck(
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
    step: i64,
) -> Result<()> {
    if step < 1 {
        return Err(Error::Domain(format!(
            "step must be at least 1, got {step}"
        )));
    }
    spec.check()?;
    objective.require(constraints)?;
    if search_space_size(spec) == BigUint::from(0u32) {
        return Err(Error::InfeasibleSpace);
    }
    Ok(())
}

/// Per-`w_m` coarse search at step `λ`, step-1 searches in the `±2λ` boxes
/// around the best coarse end points, then a descent in budget coordinates
/// over the full box from the per-`w_m` winner; returns the best per-`w_m`
/// winner.
pub fn hierarchical_search(
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
    step: i64,
) -> Result<SearchResult> {
    precheck(spec, objective, constraints, step)?;
    let mut ev = Evaluator::new(spec, objective, constraints);
    let mut trace = Vec::new();
    let mut cas: Option<(ArchConfig, Evaluation)> = None;

    for w_m in spec.w_m_min..=spec.w_m_max {
        let mapping = Mapping::new(spec, Some(w_m));
        let (lo, hi) = mapping.bounds();
        let mut winner = None;
        let centers: Vec<Vec<i64>> = match ev.shgo(&mapping, &lo, &hi, step) {
            Ok(out) => {
                let cand = ev.candidate(&mapping, &out.point);
                trace.push(entry("coarse", &cand.0, &cand.1));
                winner = Some(cand);
                let mut centers = vec![out.point];
                for (p, _) in out.endpoints {
                    if centers.len() >= FINE_STARTS {
                        break;
                    }
                    if !centers.contains(&p) {
                        centers.push(p);
                    }
                }
                centers
            }
            Err(Error::Infeasible {
                best_point: Some(p),
                ..
            }) => vec![p],
            Err(Error::Infeasible {
                best_point: None, ..
            }) => {
                debug!("w_m = {w_m}: no valid lattice point");
                continue;
            }
            Err(e) => return Err(e),
        };

        let radius = 2 * step;
        for center in &centers {
            let flo: Vec<i64> = center
                .iter()
                .zip(&lo)
                .map(|(c, l)| (c - radius).max(*l))
                .collect();
            let fhi: Vec<i64> = center
                .iter()
                .zip(&hi)
                .map(|(c, h)| (c + radius).min(*h))
                .collect();
            match ev.shgo(&mapping, &flo, &fhi, 1) {
                Ok(out) => {
                    let cand = ev.candidate(&mapping, &out.point);
                    trace.push(entry("fine", &cand.0, &cand.1));
                    winner = better_of(winner, Some(cand));
                }
                Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
        }

        if let Some((config, _)) = winner.clone() {
            let polish = Mapping::with_budgets(spec, Some(w_m));
            let mut starts: Vec<ArchConfig> = Vec::new();
            for d_c in spec.d_c_min..=spec.d_c_max {
                starts.extend(ev.best_at(w_m, d_c, POLISH_STARTS));
                starts.extend(rescale_depth(spec, &config, d_c));
            }
            starts.sort();
            starts.dedup();
            for start in &starts {
                match ev.descend(&polish, &polish.point(start), step) {
                    Ok(out) => {
                        let cand = ev.candidate(&polish, &out.point);
                        if cand.0 != config {
                            trace.push(entry("polish", &cand.0, &cand.1));
                        }
                        winner = better_of(winner, Some(cand));
                    }
                    Err(Error::Infeasible { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if let Some(w) = winner {
            debug!("w_m = {w_m}: {} value {}", w.0, w.1.value);
            cas = better_of(cas, Some(w));
        }
    }

    let evaluations = ev.memo.len() as u64;
    info!("hierarchical search: {evaluations} evaluations");
    match cas {
        Some((best, eval)) => Ok(finish(best, eval, evaluations, trace)),
        None => Err(Error::infeasible(
            format!("no feasible configuration found in {evaluations} evaluations"),
            ev.least_infeasible(),
        )),
    }
}

/// Single lattice search with `w_m` as an ordinary coordinate.
pub fn one_level_search(
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
    step: i64,
) -> Result<SearchResult> {
    precheck(spec, objective, constraints, step)?;
    let mut ev = Evaluator::new(spec, objective, constraints);
    let mapping = Mapping::new(spec, None);
    let (lo, hi) = mapping.bounds();
    match ev.shgo(&mapping, &lo, &hi, step) {
        Ok(out) => {
            let (best, eval) = ev.candidate(&mapping, &out.point);
            let trace = vec![entry("global", &best, &eval)];
            Ok(finish(best, eval, ev.memo.len() as u64, trace))
        }
        Err(Error::Infeasible { message, .. }) => {
            Err(Error::infeasible(message, ev.least_infeasible()))
        }
        Err(e) => Err(e),
    }
}

/// Samples `n` configs and returns the feasible one with the largest NN-Degree.
pub fn training_free_search(
    spec: &SpaceSpec,
    costs: &CostModels,
    hw: &HwConfig,
    constraints: &Constraints,
    n: usize,
    seed: u64,
) -> Result<SearchResult> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let objective = Objective::new(ObjectiveMode::NnDegree, None, costs.clone(), hw.clone());
    objective.require(constraints)?;
    let samples = sample_uniform(spec, seed, n)?;
    let mut best: Option<(ArchConfig, Evaluation)> = None;
    let mut feasible = 0usize;
    for config in samples {
        let eval = evaluate_unchecked(&config, spec, &objective, constraints)?;
        if !eval.feasible {
            continue;
        }
        feasible += 1;
        best = better_of(best, Some((config, eval)));
    }
    info!("training-free search: {feasible} of {n} samples feasible");
    match best {
        Some((config, eval)) => {
            let trace = vec![entry("sample", &config, &eval)];
            Ok(finish(config, eval, n as u64, trace))
        }
        None => Err(Error::infeasible(
            format!("0 of {n} samples feasible (feasibility rate 0)"),
            None,
        )),
    }
}

/// Exhaustive search; refuses spaces larger than [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_search(
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
) -> Result<SearchResult> {
    spec.check()?;
    objective.require(constraints)?;
    let size = search_space_size(spec);
    if size.to_u64().is_none_or(|s| s > BRUTE_FORCE_LIMIT) {
        return Err(Error::TooLarge {
            size: size.to_string(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if size == BigUint::from(0u32) {
        return Err(Error::InfeasibleSpace);
    }
    let mut best: Option<(ArchConfig, Evaluation)> = None;
    let mut worst_err = None;
    let mut evaluations = 0u64;
    for_each_config(spec, |config| {
        if worst_err.is_some() {
            return;
        }
        match evaluate_unchecked(config, spec, objective, constraints) {
            Ok(eval) => {
                evaluations += 1;
                let replace = match &best {
                    None => true,
                    Some((bc, be)) => {
                        compare_candidates((config, &eval), (bc, be)) == Ordering::Less
                    }
                };
                if replace {
                    best = Some((config.clone(), eval));
                }
            }
            Err(e) => worst_err = Some(e),
        }
    });
    if let Some(e) = worst_err {
        return Err(e);
    }
    match best {
        Some((config, eval)) if eval.feasible => {
            let trace = vec![entry("exhaustive", &config, &eval)];
            Ok(finish(config, eval, evaluations, trace))
        }
        Some((config, _)) => Err(Error::infeasible(
            format!("none of {evaluations} configurations is feasible"),
            Some(flatten(&config)),
        )),
        None => Err(Error::InfeasibleSpace),
    }
}

fn finish(
    best: ArchConfig,
    eval: Evaluation,
    evaluations: u64,
    trace: Vec<TraceEntry>,
) -> SearchResult {
    SearchResult {
        best,
        value: eval.value,
        metrics: eval.metrics,
        evaluations,
        feasible: eval.feasible,
        trace,
    }
}
