use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::numeric::mix64;

use super::tree::{grow_sorted, presort, MaxFeatures, Tree, TreeParams};
use super::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    /// Resample rows with replacement for each tree. When false every tree
    /// sees every row once.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            tree: TreeParams {
                max_depth: 8,
                min_leaf: 1,
                max_features: MaxFeatures::Sqrt,
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
}

impl Forest {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn gains(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, b) in g.iter_mut().zip(t.gains()) {
                *a += b;
            }
        }
        g
    }
}

/// Expand a global presort into per-feature orderings where row `i`
/// appears `counts[i]` times.
fn expand(global: &[Vec<usize>], counts: &[u32]) -> Vec<Vec<usize>> {
    global
        .iter()
        .map(|order| {
            let mut out = Vec::with_capacity(order.len());
            for &i in order {
                for _ in 0..counts[i] {
                    out.push(i);
                }
            }
            out
        })
        .collect()
}

/// Trees are grown in parallel, each from its own seeded stream, and
/// collected in index order so the result does not depend on scheduling.
pub fn fit_forest(d: &Dataset, params: &ForestParams) -> Forest {
    let n = d.n_samples();
    let all: Vec<usize> = (0..n).collect();
    let global = presort(d, &all);
    let n_trees = params.n_trees.max(1);
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(params.seed ^ mix64(t as u64 + 1)));
            let sorted = if params.bootstrap {
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                expand(&global, &counts)
            } else {
                global.clone()
            };
            grow_sorted(d, d.targets(), sorted, &params.tree, Some(&mut rng))
        })
        .collect();
    Forest {
        trees,
        n_features: d.n_features(),
    }
}
