//! Ordinary least squares without intercept.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest (after column
/// equilibration) are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub rmse: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares weights for `y ≈ X w`.
///
/// Columns are scaled to unit norm before an SVD solve. `names` labels the
/// columns in rank-deficiency errors.
pub fn fit_linear(rows: &[Vec<f64>], targets: &[f64], names: Option<&[&str]>) -> Result<LinearFit> {
    let n = rows.len();
    if n != targets.len() {
        return Err(Error::Fit(format!(
            "{n} feature rows but {} targets",
            targets.len()
        )));
    }
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::Fit("no features".into()));
    }
    if n < p {
        return Err(Error::Fit(format!(
            "need at least as many rows as features ({n} rows, {p} features)"
        )));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(Error::Fit(format!(
            "row {i} has {} features, expected {p}",
            row.len()
        )));
    }
    if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite value in fit data".into()));
    }

    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(targets);
    let label = |j: usize| -> String {
        names
            .and_then(|ns| ns.get(j))
            .map_or_else(|| format!("column {j}"), |s| (*s).to_string())
    };

    let scale: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|&s| s == 0.0) {
        return Err(Error::Fit(format!(
            "rank-deficient design: {} is identically zero",
            label(j)
        )));
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }

    let svd = xs.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let null_dirs: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= RANK_TOL * sigma_max)
        .map(|(k, _)| k)
        .collect();
    if !null_dirs.is_empty() {
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let mut dependent: Vec<usize> = Vec::new();
        for &k in &null_dirs {
            for j in 0..p {
                if v_t[(k, j)].abs() > 1e-6 && !dependent.contains(&j) {
                    dependent.push(j);
                }
            }
        }
        dependent.sort_unstable();
        let cols: Vec<String> = dependent.into_iter().map(label).collect();
        return Err(Error::Fit(format!(
            "rank-deficient design: linearly dependent columns {}",
            cols.join(", ")
        )));
    }

    let w_scaled = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::Fit(format!("least-squares solve failed: {e}")))?;
    let weights: Vec<f64> = w_scaled.iter().zip(&scale).map(|(w, s)| w / s).collect();
    let residual = &y - &x * DVector::from_column_slice(&weights);
    let residuals: Vec<f64> = residual.iter().copied().collect();
    let rmse = (residual.norm_squared() / n as f64).sqrt();
    Ok(LinearFit {
        weights,
        rmse,
        residuals,
    })
}

/// `|X^T r| / (|X|_F |r|)`, zero when the residual vanishes.
pub fn residual_orthogonality(rows: &[Vec<f64>], residuals: &[f64]) -> f64 {
    let p = rows.first().map_or(0, Vec::len);
    let r_norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
    let x_norm = rows.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if r_norm == 0.0 || x_norm == 0.0 {
        return 0.0;
    }
    let mut dot = vec![0.0; p];
    for (row, r) in rows.iter().zip(residuals) {
        for (d, x) in dot.iter_mut().zip(row) {
            *d += x * r;
        }
    }
    dot.iter().map(|d| d * d).sum::<f64>().sqrt() / (x_norm * r_norm)
}
