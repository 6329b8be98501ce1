use crate::error::{Error, Result};

use super::{Dataset, Standardizer};

/// k-nearest-neighbour mean on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    pub k: usize,
    pub scaler: Standardizer,
    /// Standardized training rows, row-major.
    pub points: Vec<f64>,
    pub targets: Vec<f64>,
    pub n_features: usize,
}

pub fn fit_knn(d: &Dataset, k: usize) -> Result<Knn> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let scaler = Standardizer::fit(d);
    let p = d.n_features();
    let mut points = vec![0.0; d.n_samples() * p];
    for i in 0..d.n_samples() {
        scaler.transform_row(d.row(i), &mut points[i * p..(i + 1) * p]);
    }
    Ok(Knn {
        k: k.min(d.n_samples()),
        scaler,
        points,
        targets: d.targets().to_vec(),
        n_features: p,
    })
}

impl Knn {
    /// Mean target of the `k` nearest rows; distance ties go to the lower
    /// row index.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let p = self.n_features;
        let mut q = vec![0.0; p];
        self.scaler.transform_row(row, &mut q);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .chunks_exact(p)
            .enumerate()
            .map(|(i, pt)| (pt.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k;
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_by(cmp);
        dist.iter().map(|(_, i)| self.targets[*i]).sum::<f64>() / k as f64
    }
}
