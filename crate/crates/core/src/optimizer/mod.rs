//! Constrained architecture objective and the searches that optimize it.

mod search;
mod shgo;

use std::cmp::Ordering;

use serde::Serialize;

use crate::arch::{ArchConfig, SpaceSpec};
use crate::error::{Error, Result};
use crate::hwmodel::{features_unchecked, CostModels, HwConfig};
use crate::predictor::AccuracyModel;
use crate::topology::nn_degree;

pub use search::{
    brute_force_search, hierarchical_search, one_level_search, training_free_search,
    BRUTE_FORCE_LIMIT, DEFAULT_STEP,
};
pub use shgo::{
    local_descent, shgo_minimize, shgo_minimize_with, Moves, Score, ShgoOptions, ShgoOutcome,
};

/// Upper and lower bounds on predicted metrics; `None` disables a bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Constraints {
    pub theta_min: Option<f64>,
    pub area_max: Option<f64>,
    pub latency_max: Option<f64>,
    pub energy_max: Option<f64>,
}

impl Constraints {
    pub fn check(&self) -> Result<()> {
        if let Some(t) = self.theta_min {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Domain(format!(
                    "theta_min must lie in (0, 1), got {t}"
                )));
            }
        }
        for (name, v) in [
            ("area_max", self.area_max),
            ("latency_max", self.latency_max),
            ("energy_max", self.energy_max),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// `theta / (A * L * E)`.
    Full,
    /// `theta / (L * E)`, for targets without an area model.
    Device,
    /// NN-Degree alone.
    NnDegree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub mode: ObjectiveMode,
    pub accuracy: Option<AccuracyModel>,
    pub costs: CostModels,
    pub hw: HwConfig,
}

impl Objective {
    pub fn new(
        mode: ObjectiveMode,
        accuracy: Option<AccuracyModel>,
        costs: CostModels,
        hw: HwConfig,
    ) -> Self {
        Objective {
            mode,
            accuracy,
            costs,
            hw,
        }
    }

    fn needs_hw_terms(&self) -> bool {
        matches!(self.mode, ObjectiveMode::Full | ObjectiveMode::Device)
    }

    /// Fails when a model needed by the mode or an active bound is missing.
    pub fn require(&self, constraints: &Constraints) -> Result<()> {
        constraints.check()?;
        self.hw.check()?;
        let hw_terms = self.needs_hw_terms();
        if (hw_terms || constraints.theta_min.is_some()) && self.accuracy.is_none() {
            return Err(Error::State("accuracy model not fitted".into()));
        }
        if (hw_terms || constraints.latency_max.is_some()) && self.costs.latency.is_none() {
            return Err(Error::State("latency model not fitted".into()));
        }
        if (hw_terms || constraints.energy_max.is_some()) && self.costs.energy.is_none() {
            return Err(Error::State("energy model not fitted".into()));
        }
        Ok(())
    }
}

/// Predicted metrics of one configuration; absent models leave fields empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub theta: Option<f64>,
    pub area_mm2: f64,
    pub latency_ms: Option<f64>,
    pub energy_mj: Option<f64>,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub feasible: bool,
    /// Sum of relative bound excesses; zero when feasible.
    pub violation: f64,
    pub metrics: Metrics,
}

impl Evaluation {
    /// Minimization score: higher objective values score lower.
    pub fn score(&self) -> Score {
        Score {
            feasible: self.feasible,
            value: -self.value,
            violation: self.violation,
        }
    }
}

/// Objective value, feasibility and metrics of a valid config.
pub fn evaluate(
    config: &ArchConfig,
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
) -> Result<Evaluation> {
    objective.require(constraints)?;
    evaluate_unchecked(config, spec, objective, constraints)
}

pub(crate) fn evaluate_unchecked(
    config: &ArchConfig,
    spec: &SpaceSpec,
    objective: &Objective,
    constraints: &Constraints,
) -> Result<Evaluation> {
    let g = nn_degree(config, spec)?.g;
    let f = features_unchecked(config, spec, &objective.hw)?;
    let theta = objective.accuracy.map(|m| m.predict(g)).transpose()?;
    let latency = objective.costs.latency.map(|m| m.predict(&f));
    let energy = objective.costs.energy.map(|m| m.predict(&f));
    let area = objective.costs.predict_area(&f, &objective.hw);
    let metrics = Metrics {
        theta,
        area_mm2: area,
        latency_ms: latency,
        energy_mj: energy,
        g,
    };

    let missing = |what: &str| Error::State(format!("{what} model not fitted"));
    let value = match objective.mode {
        ObjectiveMode::Full => {
            theta.ok_or_else(|| missing("accuracy"))?
                / (area
                    * latency.ok_or_else(|| missing("latency"))?
                    * energy.ok_or_else(|| missing("energy"))?)
        }
        ObjectiveMode::Device => {
            theta.ok_or_else(|| missing("accuracy"))?
                / (latency.ok_or_else(|| missing("latency"))?
                    * energy.ok_or_else(|| missing("energy"))?)
        }
        ObjectiveMode::NnDegree => g,
    };

    let mut violation = 0.0;
    if let Some(min) = constraints.theta_min {
        let t = theta.ok_or_else(|| missing("accuracy"))?;
        violation += ((min - t) / min).max(0.0);
    }
    let mut upper = |bound: Option<f64>, v: Option<f64>, what: &str| -> Result<()> {
        if let Some(max) = bound {
            let v = v.ok_or_else(|| missing(what))?;
            violation += ((v - max) / max).max(0.0);
        }
        Ok(())
    };
    upper(constraints.area_max, Some(area), "area")?;
    upper(constraints.latency_max, latency, "latency")?;
    upper(constraints.energy_max, energy, "energy")?;

    let feasible = violation == 0.0 && value.is_finite();
    Ok(Evaluation {
        value,
        feasible,
        violation,
        metrics,
    })
}

/// Feasibility-first order with a lexicographic tie-break; `Less` is better.
pub fn compare_candidates(
    a: (&ArchConfig, &Evaluation),
    b: (&ArchConfig, &Evaluation),
) -> Ordering {
    a.1.score()
        .cmp_rank(&b.1.score())
        .then_with(|| a.0.cmp(b.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub level: String,
    pub w_m: u32,
    pub config: ArchConfig,
    pub value: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: ArchConfig,
    pub value: f64,
    pub metrics: Metrics,
    /// Distinct objective evaluations.
    pub evaluations: u64,
    pub feasible: bool,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("search result serializes")
    }
}
