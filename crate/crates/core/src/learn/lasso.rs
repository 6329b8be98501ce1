//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)·|y - b0 - Zβ|² + λ·|β|₁` on standardized features `Z`
//! (zero mean, unit population variance). The intercept is unpenalized.
//! Coefficients are returned in the original feature units.

use crate::error::{Error, Result};
use crate::numeric::mix64;

use super::{Dataset, LinearModel, Standardizer};

#[derive(Debug, Clone, PartialEq)]
pub struct LassoParams {
    pub lambda: f64,
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoParams {
    fn default() -> Self {
        LassoParams {
            lambda: 0.0,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

/// Cross-validated choice of λ over a log-spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoCv {
    pub folds: usize,
    pub n_lambdas: usize,
    /// Smallest λ as a fraction of the λ that zeroes every slope.
    pub min_ratio: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoCv {
    fn default() -> Self {
        LassoCv {
            folds: 5,
            n_lambdas: 20,
            min_ratio: 1e-3,
            seed: 0,
            tol: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

struct Standardized {
    /// Column-major standardized features.
    z: Vec<Vec<f64>>,
    /// (1/n) Σ z² per column: 1, or 0 for constant columns.
    norm: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
    scaler: Standardizer,
}

fn standardize(d: &Dataset) -> Standardized {
    let n = d.n_samples();
    let scaler = Standardizer::fit(d);
    let z: Vec<Vec<f64>> = (0..d.n_features())
        .map(|f| {
            (0..n)
                .map(|i| (d.value(i, f) - scaler.means[f]) / scaler.scales[f])
                .collect()
        })
        .collect();
    let norm = z.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
    let y_mean = crate::numeric::sum(d.targets().iter().copied()) / n as f64;
    let yc = d.targets().iter().map(|v| v - y_mean).collect();
    Standardized {
        z,
        norm,
        y_mean,
        yc,
        scaler,
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Coordinate descent from `beta` (updated in place).
fn descend(s: &Standardized, lambda: f64, beta: &mut [f64], tol: f64, max_sweeps: usize) -> Result<usize> {
    let n = s.yc.len() as f64;
    let mut resid: Vec<f64> = s.yc.clone();
    for (j, b) in beta.iter().enumerate() {
        if *b != 0.0 {
            for (r, z) in resid.iter_mut().zip(&s.z[j]) {
                *r -= z * b;
            }
        }
    }
    for sweep in 1..=max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..beta.len() {
            if s.norm[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let zj = &s.z[j];
            let rho = zj.iter().zip(&resid).map(|(z, r)| z * r).sum::<f64>() / n + s.norm[j] * beta[j];
            let new = soft_threshold(rho, lambda) / s.norm[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, z) in resid.iter_mut().zip(zj) {
                    *r -= z * delta;
                }
                beta[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
        }
        if max_delta < tol {
            return Ok(sweep);
        }
    }
    Err(Error::Convergence {
        what: format!("lasso coordinate descent (λ = {lambda})"),
        iterations: max_sweeps,
    })
}

fn to_model(s: &Standardized, beta: &[f64], names: &[String]) -> LinearModel {
    let coef: Vec<f64> = beta.iter().zip(&s.scaler.scales).map(|(b, sd)| b / sd).collect();
    let intercept = s.y_mean - coef.iter().zip(&s.scaler.means).map(|(c, m)| c * m).sum::<f64>();
    LinearModel {
        intercept,
        coef,
        feature_names: names.to_vec(),
    }
}

/// Smallest λ for which every standardized slope is zero.
pub fn lambda_max(d: &Dataset) -> f64 {
    let s = standardize(d);
    let n = d.n_samples() as f64;
    s.z.iter()
        .map(|c| (c.iter().zip(&s.yc).map(|(z, y)| z * y).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

pub fn fit_lasso(d: &Dataset, params: &LassoParams) -> Result<LinearModel> {
    if !(params.lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("lasso λ must be nonnegative, got {}", params.lambda)));
    }
    let s = standardize(d);
    let mut beta = vec![0.0; d.n_features()];
    descend(&s, params.lambda, &mut beta, params.tol, params.max_sweeps)?;
    Ok(to_model(&s, &beta, d.feature_names()))
}

/// Descending log-spaced λ grid from `lambda_max` to `lambda_max * min_ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if n <= 1 {
        return vec![lambda_max];
    }
    (0..n)
        .map(|i| lambda_max * min_ratio.powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Fit with λ chosen by k-fold cross-validated mean squared error. Returns
/// the model refitted on all rows and the chosen λ.
pub fn fit_lasso_cv(d: &Dataset, cv: &LassoCv) -> Result<(LinearModel, f64)> {
    let n = d.n_samples();
    let lmax = lambda_max(d);
    let grid = lambda_grid(lmax, cv.n_lambdas, cv.min_ratio);
    let k = cv.folds.max(2);
    let fold_of: Vec<usize> = (0..n).map(|i| (mix64(cv.seed ^ mix64(i as u64)) % k as u64) as usize).collect();

    let mut mse = vec![0.0; grid.len()];
    let mut counted = 0usize;
    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|i| fold_of[*i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| fold_of[*i] == fold).collect();
        if train.len() < 2 || test.is_empty() {
            continue;
        }
        let dt = d.subset(&train)?;
        let s = standardize(&dt);
        let mut beta = vec![0.0; d.n_features()];
        for (li, &lambda) in grid.iter().enumerate() {
            descend(&s, lambda, &mut beta, cv.tol, cv.max_sweeps)?;
            let m = to_model(&s, &beta, d.feature_names());
            let err: f64 = test
                .iter()
                .map(|&i| {
                    let e = d.targets()[i] - m.predict_row(d.row(i));
                    e * e
                })
                .sum::<f64>()
                / test.len() as f64;
            mse[li] += err;
        }
        counted += 1;
    }
    let best = if counted == 0 {
        grid.len() - 1
    } else {
        let mut best = 0;
        for (i, v) in mse.iter().enumerate() {
            if *v < mse[best] {
                best = i;
            }
        }
        best
    };
    // Refit along the path to the chosen λ for warm starts.
    let s = standardize(d);
    let mut beta = vec![0.0; d.n_features()];
    for &lambda in &grid[..=best] {
        descend(&s, lambda, &mut beta, cv.tol, cv.max_sweeps)?;
    }
    Ok((to_model(&s, &beta, d.feature_names()), grid[best]))
}
