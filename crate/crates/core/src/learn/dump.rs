//! Versioned plain-text model dumps.
//!
//! ```text
//! pmfuse-model 1
//! kind gbt
//! features mean_mobile,road_length.primary
//! base 31.5
//! learning_rate 0.1
//! trees 300 2100
//! tree_id,node_id,feature,threshold,left,right,leaf_value
//! 0,0,1,120.5,1,4,0
//! 0,1,-1,0,-1,-1,-3.25
//! ...
//! node_stats 2100
//! tree_id,node_id,n_samples,gain
//! ...
//! end
//! ```
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, so a reloaded model predicts bit-for-bit identically.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::{Forest, Gbt, Knn, LinearModel, Node, Passthrough, Regressor, RegressorKind, Standardizer, Tree};

pub(crate) const TREE_HEADER: &str = "tree_id,node_id,feature,threshold,left,right,leaf_value";
const STATS_HEADER: &str = "tree_id,node_id,n_samples,gain";

fn werr(e: std::io::Error) -> Error {
    Error::io("<model dump>", e)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Tree section: counts line, the flat node table, then per-node statistics.
pub(crate) fn write_trees<W: Write>(w: &mut W, trees: &[Tree]) -> Result<()> {
    let rows: usize = trees.iter().map(|t| t.nodes.len()).sum();
    writeln!(w, "trees {} {rows}", trees.len()).map_err(werr)?;
    writeln!(w, "{TREE_HEADER}").map_err(werr)?;
    for (t, tree) in trees.iter().enumerate() {
        for (i, n) in tree.nodes.iter().enumerate() {
            match n.feature {
                Some(f) => writeln!(w, "{t},{i},{f},{},{},{},{}", n.threshold, n.left, n.right, n.value),
                None => writeln!(w, "{t},{i},-1,0,-1,-1,{}", n.value),
            }
            .map_err(werr)?;
        }
    }
    writeln!(w, "node_stats {rows}").map_err(werr)?;
    writeln!(w, "{STATS_HEADER}").map_err(werr)?;
    for (t, tree) in trees.iter().enumerate() {
        for (i, n) in tree.nodes.iter().enumerate() {
            writeln!(w, "{t},{i},{},{}", n.n_samples, n.gain).map_err(werr)?;
        }
    }
    Ok(())
}

/// Line reader that skips blank lines and `#` comments and reports
/// positions in parse errors.
pub(crate) struct TextReader<R> {
    inner: R,
    source: String,
    line: u64,
    buf: String,
}

impl<R: BufRead> TextReader<R> {
    pub(crate) fn new(inner: R, source: &str) -> Self {
        TextReader {
            inner,
            source: source.to_string(),
            line: 0,
            buf: String::new(),
        }
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.source.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    pub(crate) fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            self.buf.clear();
            let n = self
                .inner
                .read_line(&mut self.buf)
                .map_err(|e| Error::io(self.source.clone(), e))?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            let t = self.buf.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some(t.to_string()));
            }
        }
    }

    pub(crate) fn line(&mut self) -> Result<String> {
        self.next_line()?.ok_or_else(|| self.error("unexpected end of file"))
    }

    pub(crate) fn expect(&mut self, exact: &str) -> Result<()> {
        let l = self.line()?;
        if l != exact {
            return Err(self.error(format!("expected `{exact}`, found `{l}`")));
        }
        Ok(())
    }

    /// Read a `key value` line and return the value.
    pub(crate) fn field(&mut self, key: &str) -> Result<String> {
        let l = self.line()?;
        match l.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            None if l == key => Ok(String::new()),
            _ => Err(self.error(format!("expected `{key}`, found `{l}`"))),
        }
    }

    pub(crate) fn f64(&self, s: &str) -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.error(format!("invalid number `{s}`")))
    }

    pub(crate) fn usize(&self, s: &str) -> Result<usize> {
        s.trim().parse().map_err(|_| self.error(format!("invalid count `{s}`")))
    }

    pub(crate) fn f64_list(&self, s: &str) -> Result<Vec<f64>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|v| self.f64(v)).collect()
    }

    pub(crate) fn header(&mut self, magic: &str, version: u32) -> Result<()> {
        let l = self.line()?;
        let expected = format!("{magic} {version}");
        if l != expected {
            return Err(self.error(format!("expected header `{expected}`, found `{l}`")));
        }
        Ok(())
    }

    pub(crate) fn trees(&mut self, n_features: usize) -> Result<Vec<Tree>> {
        let counts = self.field("trees")?;
        let (nt, nr) = counts
            .split_once(' ')
            .ok_or_else(|| self.error("trees line needs a tree count and a row count"))?;
        let (n_trees, n_rows) = (self.usize(nt)?, self.usize(nr)?);
        self.expect(TREE_HEADER)?;
        let mut trees: Vec<Tree> = Vec::with_capacity(n_trees);
        for _ in 0..n_rows {
            let l = self.line()?;
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 7 {
                return Err(self.error(format!("tree row needs 7 fields, found {}", c.len())));
            }
            let (t, i) = (self.usize(c[0])?, self.usize(c[1])?);
            if t == trees.len() {
                trees.push(Tree {
                    nodes: Vec::new(),
                    n_features,
                });
            }
            let n_trees_seen = trees.len();
            let tree = match trees.get_mut(t) {
                Some(tree) if t + 1 == n_trees_seen && tree.nodes.len() == i => tree,
                _ => return Err(self.error(format!("tree rows out of order at tree {t} node {i}"))),
            };
            let value = self.f64(c[6])?;
            let node = if c[2].trim() == "-1" {
                Node {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    value,
                    n_samples: 0,
                    gain: 0.0,
                }
            } else {
                let f = self.usize(c[2])?;
                let (left, right) = (self.usize(c[4])?, self.usize(c[5])?);
                if f >= n_features || left <= i || right <= i {
                    return Err(self.error(format!("invalid split node {i} in tree {t}")));
                }
                Node {
                    feature: Some(f),
                    threshold: self.f64(c[3])?,
                    left,
                    right,
                    value,
                    n_samples: 0,
                    gain: 0.0,
                }
            };
            tree.nodes.push(node);
        }
        if trees.len() != n_trees || trees.is_empty() {
            return Err(self.error(format!("expected {n_trees} trees, found {}", trees.len())));
        }
        for (t, tree) in trees.iter().enumerate() {
            let len = tree.nodes.len();
            if tree.nodes.iter().any(|n| n.feature.is_some() && (n.left >= len || n.right >= len)) {
                return Err(self.error(format!("tree {t} references a missing node")));
            }
        }
        let stats = self.field("node_stats")?;
        if self.usize(&stats)? != n_rows {
            return Err(self.error("node_stats count does not match the tree rows"));
        }
        self.expect(STATS_HEADER)?;
        for _ in 0..n_rows {
            let l = self.line()?;
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != 4 {
                return Err(self.error("node_stats row needs 4 fields"));
            }
            let (t, i) = (self.usize(c[0])?, self.usize(c[1])?);
            let n_samples = self.usize(c[2])?;
            let gain = self.f64(c[3])?;
            let node = trees
                .get_mut(t)
                .and_then(|tr| tr.nodes.get_mut(i))
                .ok_or_else(|| self.error(format!("node_stats for missing node {t}/{i}")))?;
            node.n_samples = n_samples;
            node.gain = gain;
        }
        Ok(trees)
    }
}

/// Write a fitted regressor with the names of the features it consumes.
pub fn write_regressor<W: Write>(w: &mut W, r: &Regressor, feature_names: &[String]) -> Result<()> {
    if let Some(bad) = feature_names.iter().find(|n| n.is_empty() || n.contains([',', ' ', '\n'])) {
        return Err(Error::InvalidInput(format!("feature name `{bad}` cannot be written to a model dump")));
    }
    writeln!(w, "pmfuse-model 1").map_err(werr)?;
    writeln!(w, "kind {}", r.kind()).map_err(werr)?;
    writeln!(w, "features {}", feature_names.join(",")).map_err(werr)?;
    match r {
        Regressor::Ols(m) | Regressor::Lasso(m) => {
            writeln!(w, "intercept {}", m.intercept).map_err(werr)?;
            writeln!(w, "coef {}", join(&m.coef)).map_err(werr)?;
        }
        Regressor::Knn(m) => {
            writeln!(w, "k {}", m.k).map_err(werr)?;
            writeln!(w, "means {}", join(&m.scaler.means)).map_err(werr)?;
            writeln!(w, "scales {}", join(&m.scaler.scales)).map_err(werr)?;
            writeln!(w, "points {}", m.targets.len()).map_err(werr)?;
            for (y, row) in m.targets.iter().zip(m.points.chunks_exact(m.n_features)) {
                writeln!(w, "{y},{}", join(row)).map_err(werr)?;
            }
        }
        Regressor::Tree(t) => write_trees(w, std::slice::from_ref(t))?,
        Regressor::Forest(f) => write_trees(w, &f.trees)?,
        Regressor::Gbt(g) => {
            writeln!(w, "base {}", g.base).map_err(werr)?;
            writeln!(w, "learning_rate {}", g.learning_rate).map_err(werr)?;
            write_trees(w, &g.trees)?;
        }
        Regressor::Average(p) => writeln!(w, "passthrough {}", feature_names[p.feature]).map_err(werr)?,
    }
    writeln!(w, "end").map_err(werr)?;
    Ok(())
}

/// Read a model dump; returns the regressor and its feature names.
pub fn read_regressor<R: BufRead>(input: R, source: &str) -> Result<(Regressor, Vec<String>)> {
    let mut r = TextReader::new(input, source);
    r.header("pmfuse-model", 1)?;
    let kind_s = r.field("kind")?;
    let kind: RegressorKind = kind_s.parse().map_err(|_| r.error(format!("unknown kind `{kind_s}`")))?;
    let names: Vec<String> = r.field("features")?.split(',').map(str::to_string).collect();
    let p = names.len();
    let linear = |r: &mut TextReader<R>| -> Result<LinearModel> {
        let intercept = r.field("intercept").and_then(|s| r.f64(&s))?;
        let coef = r.field("coef").and_then(|s| r.f64_list(&s))?;
        if coef.len() != p {
            return Err(r.error("coefficient count does not match features"));
        }
        Ok(LinearModel {
            intercept,
            coef,
            feature_names: names.clone(),
        })
    };
    let model = match kind {
        RegressorKind::Ols => Regressor::Ols(linear(&mut r)?),
        RegressorKind::Lasso => Regressor::Lasso(linear(&mut r)?),
        RegressorKind::Knn => {
            let k = r.field("k").and_then(|s| r.usize(&s))?;
            let means = r.field("means").and_then(|s| r.f64_list(&s))?;
            let scales = r.field("scales").and_then(|s| r.f64_list(&s))?;
            let n = r.field("points").and_then(|s| r.usize(&s))?;
            if means.len() != p || scales.len() != p || k == 0 || k > n {
                return Err(r.error("inconsistent knn header"));
            }
            let mut targets = Vec::with_capacity(n);
            let mut points = Vec::with_capacity(n * p);
            for _ in 0..n {
                let l = r.line()?;
                let v = r.f64_list(&l)?;
                if v.len() != p + 1 {
                    return Err(r.error("knn point has the wrong number of values"));
                }
                targets.push(v[0]);
                points.extend_from_slice(&v[1..]);
            }
            Regressor::Knn(Knn {
                k,
                scaler: Standardizer { means, scales },
                points,
                targets,
                n_features: p,
            })
        }
        RegressorKind::Tree => {
            let mut trees = r.trees(p)?;
            if trees.len() != 1 {
                return Err(r.error("a tree dump holds exactly one tree"));
            }
            Regressor::Tree(trees.remove(0))
        }
        RegressorKind::Forest => Regressor::Forest(Forest {
            trees: r.trees(p)?,
            n_features: p,
        }),
        RegressorKind::Gbt => {
            let base = r.field("base").and_then(|s| r.f64(&s))?;
            let lr = r.field("learning_rate").and_then(|s| r.f64(&s))?;
            Regressor::Gbt(Gbt::from_parts(base, lr, r.trees(p)?, p))
        }
        RegressorKind::Average => {
            let name = r.field("passthrough")?;
            let feature = names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| r.error(format!("passthrough feature `{name}` is not listed")))?;
            Regressor::Average(Passthrough { feature })
        }
    };
    r.expect("end")?;
    Ok((model, names))
}
