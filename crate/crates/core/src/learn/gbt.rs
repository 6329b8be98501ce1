//! Gradient-boosted regression trees with squared-error loss.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numeric::{mean, mix64};

use super::tree::{grow_sorted, presort, MaxFeatures, Tree, TreeParams};
use super::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Fraction of rows drawn without replacement for each stage.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 300,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// `base + learning_rate * Σ tree(x)`. Trees hold unshrunk leaf values.
#[derive(Debug, Clone, PartialEq)]
pub struct Gbt {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub n_features: usize,
    gains: Vec<f64>,
    stage_losses: Vec<f64>,
}

impl Gbt {
    pub(crate) fn from_parts(base: f64, learning_rate: f64, trees: Vec<Tree>, n_features: usize) -> Gbt {
        let mut gains = vec![0.0; n_features];
        for t in &trees {
            for (a, b) in gains.iter_mut().zip(t.gains()) {
                *a += b;
            }
        }
        Gbt {
            base,
            learning_rate,
            trees,
            n_features,
            gains,
            stage_losses: Vec::new(),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    /// Per-feature gain summed over every split, measured on the residuals
    /// each tree was fitted to (before shrinkage).
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Training mean squared error after the base value (index 0) and after
    /// each stage. Empty for models loaded from a dump.
    pub fn stage_losses(&self) -> &[f64] {
        &self.stage_losses
    }
}

pub fn fit_gbt(d: &Dataset, params: &GbtParams) -> Gbt {
    let n = d.n_samples();
    let y = d.targets();
    let base = mean(y).unwrap_or(0.0);
    let tp = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: MaxFeatures::All,
    };
    let all: Vec<usize> = (0..n).collect();
    let global = presort(d, &all);
    let mut pred = vec![base; n];
    let mut resid: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut stage_losses = vec![mse(&resid)];
    let take = ((params.subsample.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(1, n);
    let mut trees = Vec::with_capacity(params.n_trees.max(1));
    for stage in 0..params.n_trees.max(1) {
        let sorted = if take < n {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(params.seed ^ mix64(stage as u64 + 1)));
            let mut keep = vec![false; n];
            for i in sample(&mut rng, n, take) {
                keep[i] = true;
            }
            global.iter().map(|o| o.iter().copied().filter(|&i| keep[i]).collect()).collect()
        } else {
            global.clone()
        };
        let tree = grow_sorted(d, &resid, sorted, &tp, None);
        for i in 0..n {
            pred[i] += params.learning_rate * tree.predict_row(d.row(i));
            resid[i] = y[i] - pred[i];
        }
        stage_losses.push(mse(&resid));
        trees.push(tree);
    }
    let mut g = Gbt::from_parts(base, params.learning_rate, trees, d.n_features());
    g.stage_losses = stage_losses;
    g
}
