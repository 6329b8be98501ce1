use crate::error::{Error, Result};

use super::Dataset;

/// `intercept + coef · x`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Relative pivot size below which a column counts as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Least-squares solution of `a x ≈ b` by Householder QR.
///
/// `a` is row-major with `n_cols` columns. Fails with [`Error::SingularFit`]
/// when a column is (numerically) a combination of earlier ones.
pub fn solve_least_squares(a: &[f64], n_cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    let m = b.len();
    if n_cols == 0 || a.len() != m * n_cols {
        return Err(Error::InvalidInput("design matrix shape mismatch".into()));
    }
    if m < n_cols {
        return Err(Error::SingularFit(format!(
            "{m} observations cannot determine {n_cols} coefficients"
        )));
    }
    // Column-major working copy.
    let mut q: Vec<Vec<f64>> = (0..n_cols).map(|j| (0..m).map(|i| a[i * n_cols + j]).collect()).collect();
    let mut rhs = b.to_vec();
    let col_norms: Vec<f64> = q.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut diag = vec![0.0; n_cols];

    for k in 0..n_cols {
        let norm = q[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= RANK_TOL * col_norms[k].max(f64::MIN_POSITIVE) {
            return Err(Error::SingularFit(format!("design column {k} is linearly dependent")));
        }
        let alpha = if q[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = q[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 > 0.0 {
            for col in q.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&rhs[k..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in rhs[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }
    // Back substitution on R (upper triangle of q, diagonal in `diag`).
    let mut x = vec![0.0; n_cols];
    for k in (0..n_cols).rev() {
        let mut s = rhs[k];
        for j in k + 1..n_cols {
            s -= q[j][k] * x[j];
        }
        x[k] = s / diag[k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularFit("non-finite coefficients".into()));
    }
    Ok(x)
}

/// Ordinary least squares with an unpenalized intercept.
pub fn fit_ols(d: &Dataset) -> Result<LinearModel> {
    let p = d.n_features() + 1;
    let mut a = Vec::with_capacity(d.n_samples() * p);
    for i in 0..d.n_samples() {
        a.push(1.0);
        a.extend_from_slice(d.row(i));
    }
    let beta = solve_least_squares(&a, p, d.targets())?;
    Ok(LinearModel {
        intercept: beta[0],
        coef: beta[1..].to_vec(),
        feature_names: d.feature_names().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn recovers_noiseless_line() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.7 - 3.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = fit_ols(&Dataset::new(rows, y, names(1)).unwrap()).unwrap();
        assert!((m.coef[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residuals_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(-10.0..10.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.5 * r[0] - 2.0 * r[1] + 0.1 * r[2] * r[2] + rng.random_range(-1.0..1.0))
            .collect();
        let d = Dataset::new(rows, y, names(3)).unwrap();
        let m = fit_ols(&d).unwrap();
        let resid: Vec<f64> = (0..d.n_samples()).map(|i| d.targets()[i] - m.predict_row(d.row(i))).collect();
        let rnorm: f64 = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(resid.iter().sum::<f64>().abs() < 1e-6 * rnorm * (d.n_samples() as f64).sqrt());
        for f in 0..3 {
            let col = d.column(f);
            let cnorm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-6 * cnorm * rnorm, "column {f}: {dot}");
        }
    }

    #[test]
    fn duplicated_column_is_singular() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            fit_ols(&Dataset::new(rows, y, names(2)).unwrap()),
            Err(Error::SingularFit(_))
        ));
        // A constant feature duplicates the intercept.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(fit_ols(&Dataset::new(rows, y, names(2)).unwrap()).is_err());
    }
}
