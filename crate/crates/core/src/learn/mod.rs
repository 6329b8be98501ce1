//! Regression engines for sensor calibration and the mapping model.
//!
//! All fits are deterministic given the dataset row order, hyperparameters,
//! and seed. Ties are always broken toward the lowest index.

pub(crate) mod dump;
mod forest;
mod gbt;
mod knn;
mod lasso;
mod linear;
pub(crate) mod tree;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use dump::{read_regressor, write_regressor};
pub use forest::{fit_forest, Forest, ForestParams};
pub use gbt::{fit_gbt, Gbt, GbtParams};
pub use knn::{fit_knn, Knn};
pub use lasso::{fit_lasso, fit_lasso_cv, LassoCv, LassoParams};
pub use linear::{fit_ols, solve_least_squares, LinearModel};
pub use tree::{fit_tree, MaxFeatures, Node, Tree, TreeParams};

/// Row-major feature matrix with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    n_features: usize,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        let mut x = Vec::with_capacity(rows.len() * n_features);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_features {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} features, expected {n_features}",
                    r.len()
                )));
            }
            x.extend_from_slice(r);
        }
        Self::from_flat(x, y, feature_names)
    }

    pub fn from_flat(x: Vec<f64>, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_features = feature_names.len();
        if y.is_empty() {
            return Err(Error::Empty("dataset has no samples".into()));
        }
        if n_features == 0 || x.len() != y.len() * n_features {
            return Err(Error::InvalidInput("feature matrix shape does not match targets".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate feature name `{dup}`")));
        }
        Ok(Dataset {
            x,
            y,
            n_features,
            feature_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.n_features + f]
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|i| self.value(i, f)).collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let mut x = Vec::with_capacity(rows.len() * self.n_features);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset::from_flat(x, y, self.feature_names.clone())
    }

    /// Same features, different targets.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::from_flat(self.x.clone(), y, self.feature_names.clone())
    }
}

/// Per-column mean and population std used by the scale-sensitive models.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Zero-variance columns get scale 1 so they standardize to zero.
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(d: &Dataset) -> Self {
        let n = d.n_samples() as f64;
        let mut means = Vec::with_capacity(d.n_features());
        let mut scales = Vec::with_capacity(d.n_features());
        for f in 0..d.n_features() {
            let col = d.column(f);
            let m = crate::numeric::sum(col.iter().copied()) / n;
            let var = crate::numeric::sum(col.iter().map(|v| (v - m) * (v - m))) / n;
            means.push(m);
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Standardizer { means, scales }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (j, v) in row.iter().enumerate() {
            out[j] = (v - self.means[j]) / self.scales[j];
        }
    }
}

/// Which family a regressor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegressorKind {
    Gbt,
    Forest,
    Ols,
    Lasso,
    Knn,
    Tree,
    Average,
}

impl RegressorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegressorKind::Gbt => "gbt",
            RegressorKind::Forest => "forest",
            RegressorKind::Ols => "ols",
            RegressorKind::Lasso => "lasso",
            RegressorKind::Knn => "knn",
            RegressorKind::Tree => "tree",
            RegressorKind::Average => "average",
        }
    }

    pub fn is_tree_based(&self) -> bool {
        matches!(self, RegressorKind::Gbt | RegressorKind::Forest | RegressorKind::Tree)
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gbt" => RegressorKind::Gbt,
            "forest" => RegressorKind::Forest,
            "ols" => RegressorKind::Ols,
            "lasso" => RegressorKind::Lasso,
            "knn" => RegressorKind::Knn,
            "tree" => RegressorKind::Tree,
            "average" => RegressorKind::Average,
            other => return Err(Error::Config(format!("unknown regressor kind `{other}`"))),
        })
    }
}

/// Predicts the value of one input feature unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Passthrough {
    pub feature: usize,
}

pub fn fit_average(d: &Dataset, passthrough_feature: &str) -> Result<Passthrough> {
    let feature = d
        .feature_index(passthrough_feature)
        .ok_or_else(|| Error::Config(format!("no feature named `{passthrough_feature}`")))?;
    Ok(Passthrough { feature })
}

/// A fitted regressor of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Ols(LinearModel),
    Lasso(LinearModel),
    Knn(Knn),
    Tree(Tree),
    Forest(Forest),
    Gbt(Gbt),
    Average(Passthrough),
}

impl Regressor {
    pub fn kind(&self) -> RegressorKind {
        match self {
            Regressor::Ols(_) => RegressorKind::Ols,
            Regressor::Lasso(_) => RegressorKind::Lasso,
            Regressor::Knn(_) => RegressorKind::Knn,
            Regressor::Tree(_) => RegressorKind::Tree,
            Regressor::Forest(_) => RegressorKind::Forest,
            Regressor::Gbt(_) => RegressorKind::Gbt,
            Regressor::Average(_) => RegressorKind::Average,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Ols(m) | Regressor::Lasso(m) => m.predict_row(row),
            Regressor::Knn(m) => m.predict_row(row),
            Regressor::Tree(m) => m.predict_row(row),
            Regressor::Forest(m) => m.predict_row(row),
            Regressor::Gbt(m) => m.predict_row(row),
            Regressor::Average(m) => row[m.feature],
        }
    }

    pub fn predict(&self, d: &Dataset) -> Vec<f64> {
        (0..d.n_samples()).map(|i| self.predict_row(d.row(i))).collect()
    }

    /// Per-feature total squared-error reduction over all splits.
    pub fn gain_table(&self) -> Result<GainTable> {
        match self {
            Regressor::Tree(t) => Ok(GainTable(t.gains())),
            Regressor::Forest(f) => Ok(GainTable(f.gains())),
            Regressor::Gbt(g) => Ok(GainTable(g.gains().to_vec())),
            other => Err(Error::Unsupported(format!("gain table for `{}`", other.kind()))),
        }
    }
}

/// Per-feature summed squared-error reduction, indexed like the training
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable(pub Vec<f64>);

impl GainTable {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

pub fn gain_table(r: &Regressor) -> Result<GainTable> {
    r.gain_table()
}

/// Hyperparameters for every regressor kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gbt: GbtParams,
    pub forest: ForestParams,
    pub knn_k: usize,
    pub lasso: LassoCv,
    pub tree: TreeParams,
    /// Feature copied through by the `average` baseline.
    pub passthrough: String,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            gbt: GbtParams::default(),
            forest: ForestParams::default(),
            knn_k: 5,
            lasso: LassoCv::default(),
            tree: TreeParams::default(),
            passthrough: "mean_mobile".into(),
        }
    }
}

/// Fit one regressor kind with the given hyperparameters.
pub fn fit(kind: RegressorKind, d: &Dataset, params: &ModelParams) -> Result<Regressor> {
    Ok(match kind {
        RegressorKind::Ols => Regressor::Ols(fit_ols(d)?),
        RegressorKind::Lasso => Regressor::Lasso(fit_lasso_cv(d, &params.lasso)?.0),
        RegressorKind::Knn => Regressor::Knn(fit_knn(d, params.knn_k)?),
        RegressorKind::Tree => Regressor::Tree(fit_tree(d, &params.tree)),
        RegressorKind::Forest => Regressor::Forest(fit_forest(d, &params.forest)),
        RegressorKind::Gbt => Regressor::Gbt(fit_gbt(d, &params.gbt)),
        RegressorKind::Average => Regressor::Average(fit_average(d, &params.passthrough)?),
    })
}
