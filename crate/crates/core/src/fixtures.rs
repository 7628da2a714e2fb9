//! Synthetic ground-truth models and measurement tables.
//!
//! Lets the whole fit-and-search pipeline run without a circuit simulator or
//! trained networks. Weights are drawn per feature and rescaled so that every
//! feature contributes a comparable share of the target over the space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::arch::{sample_uniform, ArchConfig, SpaceSpec};
use crate::error::{Error, Result};
use crate::hwmodel::{
    features, fit_area, fit_energy, fit_latency, AreaModel, CostModels, EnergyModel, Features,
    HwConfig, LatencyModel,
};
use crate::predictor::{fit_accuracy, AccuracyModel, AccuracySample};
use crate::topology::nn_degree;

/// Configs drawn to estimate feature scales.
const SCALE_SAMPLES: usize = 64;

/// Typical latency (ms) and per-config energy (mJ) of the synthetic device.
const LATENCY_TARGET: f64 = 5.0;
const ENERGY_TARGET: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub accuracy: AccuracyModel,
    pub latency: LatencyModel,
    pub energy: EnergyModel,
    pub area: AreaModel,
}

impl SyntheticTruth {
    /// Random ground truth whose scales fit `spec` and `hw`.
    pub fn for_space(spec: &SpaceSpec, hw: &HwConfig, seed: u64) -> Result<Self> {
        hw.check()?;
        let probe = sample_uniform(spec, seed ^ 0x5eed, SCALE_SAMPLES)?;
        let mut feats = Vec::with_capacity(probe.len());
        let mut gs = Vec::with_capacity(probe.len());
        for c in &probe {
            feats.push(features(c, spec, hw)?);
            gs.push(nn_degree(c, spec)?.g);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        gs.sort_by(f64::total_cmp);
        let g_ref = gs[gs.len() / 2];
        let a = rng.random_range(0.95..1.05);
        let b = rng.random_range(0.5..2.0) * g_ref;
        let c = rng.random_range(-4.0..-2.0);
        let accuracy = AccuracyModel::new(a, b, c)?;

        let mean = |f: &dyn Fn(&Features) -> Vec<f64>, j: usize| -> f64 {
            feats.iter().map(|x| f(x)[j]).sum::<f64>() / feats.len() as f64
        };
        let mut lat = [0.0; 6];
        for (j, w) in lat.iter_mut().enumerate() {
            let m = mean(&|f| f.latency_row(), j);
            *w = if m > 0.0 {
                rng.random_range(0.2..1.0) * LATENCY_TARGET / 6.0 / m
            } else {
                rng.random_range(0.2..1.0) * 1e-3
            };
        }
        let mut en = [0.0; 7];
        for (j, w) in en.iter_mut().enumerate() {
            let m = mean(&|f| f.energy_row(), j);
            *w = if m > 0.0 {
                rng.random_range(0.2..1.0) * ENERGY_TARGET / 7.0 / m
            } else {
                rng.random_range(0.2..1.0) * 1e-6
            };
        }
        let area = AreaModel {
            per_tile: (hw.a_tile + hw.a_router) * rng.random_range(0.8..1.2),
            rest: hw.a_rest * rng.random_range(0.8..1.2),
            rmse: 0.0,
        };
        Ok(SyntheticTruth {
            accuracy,
            latency: LatencyModel::from_weights(&lat, 0.0)?,
            energy: EnergyModel::from_weights(&en, 0.0)?,
            area,
        })
    }

    pub fn cost_models(&self) -> CostModels {
        CostModels {
            latency: Some(self.latency),
            energy: Some(self.energy),
            area: Some(self.area),
        }
    }
}

/// One synthetic measurement row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub config: ArchConfig,
    pub accuracy: f64,
    pub latency_ms: f64,
    pub energy_mj: f64,
    pub area_mm2: f64,
}

/// `n` uniformly drawn configs measured by `truth` with multiplicative
/// Gaussian noise of relative size `noise`.
pub fn generate_samples(
    spec: &SpaceSpec,
    hw: &HwConfig,
    truth: &SyntheticTruth,
    n: usize,
    seed: u64,
    noise: f64,
) -> Result<Vec<SampleRow>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Domain(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    let configs = sample_uniform(spec, seed, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut jitter = |v: f64| {
        if noise == 0.0 {
            v
        } else {
            v * (1.0 + noise * normal.sample(&mut rng))
        }
    };
    let mut rows = Vec::with_capacity(n);
    for config in configs {
        let f = features(&config, spec, hw)?;
        let g = nn_degree(&config, spec)?.g;
        let theta = jitter(truth.accuracy.predict(g)?).clamp(1e-6, 1.0 - 1e-6);
        rows.push(SampleRow {
            accuracy: theta,
            latency_ms: jitter(truth.latency.predict(&f)),
            energy_mj: jitter(truth.energy.predict(&f)),
            area_mm2: jitter(truth.area.predict(f.tiles)),
            config,
        });
    }
    Ok(rows)
}

/// Small seeded space for exhaustive cross-checks.
///
/// Three width multipliers keep `w_m^2` independent of `w_m` in the fits.
/// Sizes stay well below the brute-force limit while the skip-budget axes are
/// long enough that a step-1 box of radius `2λ` does not cover them.
pub fn reduced_spec(seed: u64) -> SpaceSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.random_range(2..=4u32);
    let d_c_min = rng.random_range(4..=6u32);
    SpaceSpec {
        w_m_min: 1,
        w_m_max: 3,
        d_c_min,
        d_c_max: d_c_min + rng.random_range(2..=4u32),
        n_c: 3,
        n_c_max: None,
        base_widths: vec![base, 2 * base, 4 * base],
        t1_min: rng.random_range(1..=3u32),
        coupling: 2,
    }
}

/// Fitted accuracy and cost models from measurement rows.
pub fn fit_models(
    spec: &SpaceSpec,
    hw: &HwConfig,
    rows: &[SampleRow],
) -> Result<(AccuracyModel, CostModels)> {
    let mut acc = Vec::with_capacity(rows.len());
    let mut lat = Vec::with_capacity(rows.len());
    let mut en = Vec::with_capacity(rows.len());
    let mut area = Vec::with_capacity(rows.len());
    for r in rows {
        let f = features(&r.config, spec, hw)?;
        acc.push(AccuracySample::new(
            nn_degree(&r.config, spec)?.g,
            r.accuracy,
        ));
        lat.push((f, r.latency_ms));
        en.push((f, r.energy_mj));
        area.push((f.tiles, r.area_mm2));
    }
    Ok((
        fit_accuracy(&acc)?,
        CostModels {
            latency: Some(fit_latency(&lat)?),
            energy: Some(fit_energy(&en)?),
            area: Some(fit_area(&area)?),
        },
    ))
}
