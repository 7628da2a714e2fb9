//! Three-parameter accuracy predictor over NN-Degree.
//!
//! `theta(g) = 1 / (a + exp(b / g + c))`. For fixed `a` the model is linear
//! in `(b, c)` after the transform `ln(1/theta - a) = b * (1/g) + c`, so the
//! fit searches over `a` alone and solves `(b, c)` in closed form at every
//! trial value.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub n_samples: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySample {
    pub g: f64,
    pub theta: f64,
}

impl AccuracySample {
    pub fn new(g: f64, theta: f64) -> Self {
        AccuracySample { g, theta }
    }
}

impl AccuracyModel {
    /// An unfitted model with the given parameters.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !b.is_finite() || !c.is_finite() {
            return Err(Error::Domain(format!(
                "accuracy model needs finite parameters with a > 0 (a={a}, b={b}, c={c})"
            )));
        }
        Ok(AccuracyModel {
            a,
            b,
            c,
            n_samples: 0,
            rmse: 0.0,
        })
    }

    pub fn predict(&self, g: f64) -> Result<f64> {
        predict_accuracy(self, g)
    }

    /// Whether predictions increase with NN-Degree.
    pub fn is_increasing(&self) -> bool {
        self.b > 0.0
    }

    /// Limit of the prediction as `g` grows without bound.
    pub fn asymptote(&self) -> f64 {
        1.0 / (self.a + self.c.exp())
    }
}

pub fn predict_accuracy(model: &AccuracyModel, g: f64) -> Result<f64> {
    if !g.is_finite() || g <= 0.0 {
        return Err(Error::Domain(format!(
            "NN-Degree must be positive, got {g}"
        )));
    }
    Ok(eval(model.a, model.b, model.c, g))
}

fn eval(a: f64, b: f64, c: f64, g: f64) -> f64 {
    1.0 / (a + (b / g + c).exp())
}

pub fn rmse(model: &AccuracyModel, samples: &[AccuracySample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("rmse of an empty sample set".into()));
    }
    let mut sum = 0.0;
    for s in samples {
        let e = predict_accuracy(model, s.g)? - s.theta;
        sum += e * e;
    }
    Ok((sum / samples.len() as f64).sqrt())
}

fn check_samples(samples: &[AccuracySample]) -> Result<()> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!(
            "accuracy fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        if !s.g.is_finite() || s.g <= 0.0 {
            return Err(Error::Data(format!(
                "sample {i}: NN-Degree {} is not positive",
                s.g
            )));
        }
        // Asymptote 1/a may exceed 1; the file loader enforces (0, 1).
        if !s.theta.is_finite() || s.theta <= 0.0 {
            return Err(Error::Data(format!(
                "sample {i}: accuracy {} is not positive",
                s.theta
            )));
        }
    }
    let first = samples[0].g;
    if samples.iter().all(|s| s.g == first) {
        return Err(Error::Fit("all samples share one NN-Degree value".into()));
    }
    Ok(())
}

/// Closed-form `(b, c)` for a fixed `a` and the resulting accuracy-space RMSE.
#[derive(Debug, Clone, Copy)]
struct Profile {
    a: f64,
    b: f64,
    c: f64,
    rmse: f64,
}

fn profile(a: f64, samples: &[AccuracySample]) -> Profile {
    let n = samples.len() as f64;
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for s in samples {
        xs.push(1.0 / s.g);
        ys.push((1.0 / s.theta - a).ln());
    }
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let b = sxy / sxx;
    let c = y_mean - b * x_mean;
    let mut sum = 0.0;
    for s in samples {
        let e = eval(a, b, c, s.g) - s.theta;
        sum += e * e;
    }
    let rmse = (sum / n).sqrt();
    Profile {
        a,
        b,
        c,
        rmse: if rmse.is_finite() {
            rmse
        } else {
            f64::INFINITY
        },
    }
}

const GRID_POINTS: usize = 512;
const GOLDEN_ITERS: usize = 200;

/// Fits `(a, b, c)` by minimizing accuracy-space RMSE.
///
/// `a` ranges over `(0, min_i 1/theta_i)`: a uniform grid locates the basin and
/// golden-section search refines it inside the bracketing grid cells.
pub fn fit_accuracy(samples: &[AccuracySample]) -> Result<AccuracyModel> {
    check_samples(samples)?;
    let a_hi = samples
        .iter()
        .map(|s| 1.0 / s.theta)
        .fold(f64::INFINITY, f64::min);

    let grid: Vec<f64> = (1..=GRID_POINTS)
        .map(|k| a_hi * k as f64 / (GRID_POINTS + 1) as f64)
        .collect();
    let mut best = profile(grid[0], samples);
    let mut best_k = 0;
    for (k, &a) in grid.iter().enumerate().skip(1) {
        let p = profile(a, samples);
        if p.rmse < best.rmse {
            best = p;
            best_k = k;
        }
    }

    let mut lo = if best_k == 0 { 0.0 } else { grid[best_k - 1] };
    let mut hi = if best_k + 1 < grid.len() {
        grid[best_k + 1]
    } else {
        a_hi
    };
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut p1 = profile(x1, samples);
    let mut p2 = profile(x2, samples);
    for _ in 0..GOLDEN_ITERS {
        for p in [p1, p2] {
            if p.rmse < best.rmse {
                best = p;
            }
        }
        if hi - lo <= f64::EPSILON * a_hi {
            break;
        }
        if p1.rmse <= p2.rmse {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - ratio * (hi - lo);
            p1 = profile(x1, samples);
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + ratio * (hi - lo);
            p2 = profile(x2, samples);
        }
    }

    if !best.rmse.is_finite() || !best.b.is_finite() || !best.c.is_finite() {
        return Err(Error::Fit("accuracy fit did not converge".into()));
    }
    let mut model = AccuracyModel::new(best.a, best.b, best.c)?;
    model.n_samples = samples.len();
    model.rmse = rmse(&model, samples)?;
    if !model.is_increasing() {
        warn!(
            "fitted accuracy model has b = {:.6} <= 0: accuracy does not increase with NN-Degree",
            model.b
        );
    }
    Ok(model)
}
