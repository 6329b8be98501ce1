//! CART regression trees with exact greedy variance-reduction splits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    All,
    /// `max(1, floor(sqrt(n_features)))` features drawn per split.
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(&self, n_features: usize) -> usize {
        match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(k) => (*k).clamp(1, n_features),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 8,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

/// A tree node. Split nodes send `x[feature] <= threshold` left.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Mean training target of the rows reaching this node.
    pub value: f64,
    pub n_samples: usize,
    /// Squared-error reduction achieved by this split (0 for leaves).
    pub gain: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    /// Nodes in preorder; node 0 is the root.
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

impl Tree {
    /// A single-leaf tree.
    pub fn constant(value: f64, n_features: usize, n_samples: usize) -> Tree {
        Tree {
            nodes: vec![Node {
                feature: None,
                threshold: 0.0,
                left: 0,
                right: 0,
                value,
                n_samples,
                gain: 0.0,
            }],
            n_features,
        }
    }

    #[inline]
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(f) = self.nodes[i].feature {
            let n = &self.nodes[i];
            i = if row[f] <= n.threshold { n.left } else { n.right };
        }
        i
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_of(row)].value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left).max(go(t, n.right))
            }
        }
        go(self, 0)
    }

    pub fn gains(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.n_features];
        for n in &self.nodes {
            if let Some(f) = n.feature {
                g[f] += n.gain;
            }
        }
        g
    }
}

struct Builder<'a> {
    data: &'a Dataset,
    targets: &'a [f64],
    params: &'a TreeParams,
    n_candidates: usize,
    rng: Option<&'a mut ChaCha8Rng>,
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
}

const GAIN_TIE_RTOL: f64 = 1e-12;

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.data.n_features();
        match self.rng.as_deref_mut() {
            Some(rng) if self.n_candidates < p => {
                let mut all: Vec<usize> = (0..p).collect();
                for i in 0..self.n_candidates {
                    let j = rng.random_range(i..p);
                    all.swap(i, j);
                }
                let mut chosen = all[..self.n_candidates].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, sorted: &[Vec<usize>], mean: f64) -> Option<Split> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_leaf.max(1);
        let total: f64 = sorted[0].iter().map(|&i| self.targets[i] - mean).sum();
        let parent = total * total / n as f64;
        // Gains within this margin count as ties so that summation order
        // cannot override the lowest-feature, lowest-threshold rule.
        let sse: f64 = sorted[0].iter().map(|&i| (self.targets[i] - mean).powi(2)).sum();
        let eps = GAIN_TIE_RTOL * sse;
        let mut best: Option<Split> = None;
        for f in self.candidate_features() {
            let rows = &sorted[f];
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                let i = rows[k];
                left_sum += self.targets[i] - mean;
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < min_leaf {
                    continue;
                }
                if n_right < min_leaf {
                    break;
                }
                let (xa, xb) = (self.data.value(i, f), self.data.value(rows[k + 1], f));
                if xa >= xb {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - parent;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) + eps {
                    let mut threshold = xa + (xb - xa) / 2.0;
                    if threshold >= xb {
                        threshold = xa;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let n = rows.len();
        let mean = rows.iter().map(|&i| self.targets[i]).sum::<f64>() / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: mean,
            n_samples: n,
            gain: 0.0,
        });
        let first = self.targets[rows[0]];
        let constant = rows.iter().all(|&i| self.targets[i] == first);
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) || constant {
            return id;
        }
        let Some(split) = self.best_split(&sorted, mean) else {
            return id;
        };
        for &i in &sorted[0] {
            self.goes_left[i] = self.data.value(i, split.feature) <= split.threshold;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| self.goes_left[i]);
            left.push(l);
            right.push(r);
        }
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        node.gain = split.gain;
        id
    }
}

/// Per-feature row orderings by (value, row index).
pub(crate) fn presort(data: &Dataset, rows: &[usize]) -> Vec<Vec<usize>> {
    (0..data.n_features())
        .map(|f| {
            let mut r = rows.to_vec();
            r.sort_by(|&a, &b| data.value(a, f).total_cmp(&data.value(b, f)).then(a.cmp(&b)));
            r
        })
        .collect()
}

/// Grow a tree from presorted row lists (see [`presort`]; repeats allowed),
/// fitting `targets` indexed like the dataset rows. `rng` drives per-split
/// feature sampling and is only consulted when `max_features` selects fewer
/// than all features.
pub(crate) fn grow_sorted(
    data: &Dataset,
    targets: &[f64],
    sorted: Vec<Vec<usize>>,
    params: &TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let p = data.n_features();
    if sorted.first().is_none_or(|r| r.is_empty()) {
        return Tree::constant(0.0, p, 0);
    }
    let mut b = Builder {
        data,
        targets,
        params,
        n_candidates: params.max_features.resolve(p),
        rng,
        goes_left: vec![false; data.n_samples()],
        nodes: Vec::new(),
    };
    b.build(sorted, 0);
    Tree {
        nodes: b.nodes,
        n_features: p,
    }
}

/// Fit a tree on every row with all features considered at each split.
pub fn fit_tree(d: &Dataset, params: &TreeParams) -> Tree {
    let rows: Vec<usize> = (0..d.n_samples()).collect();
    let params = TreeParams {
        max_features: MaxFeatures::All,
        ..params.clone()
    };
    grow_sorted(d, d.targets(), presort(d, &rows), &params, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn ds(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let p = rows[0].len();
        Dataset::new(rows, y, (0..p).map(|i| format!("f{i}")).collect()).unwrap()
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let d = ds((0..10).map(|i| vec![i as f64, (i * i) as f64]).collect(), vec![7.5; 10]);
        let t = fit_tree(&d, &TreeParams::default());
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(&[100.0, -3.0]), 7.5);
        assert!(t.gains().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn step_function_single_split() {
        let xs = [0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9];
        let d = ds(xs.iter().map(|x| vec![*x]).collect(), xs.iter().map(|x| if *x < 0.5 { 1.0 } else { 3.0 }).collect());
        let t = fit_tree(&d, &TreeParams::default());
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].feature, Some(0));
        assert!((t.nodes[0].threshold - 0.5).abs() < 1e-12);
        for (i, x) in xs.iter().enumerate() {
            assert_eq!(t.predict_row(&[*x]), d.targets()[i]);
        }
        // SSE 8 rows of ±1 around mean 2 = 8.
        assert!((t.nodes[0].gain - 8.0).abs() < 1e-12);
    }

    /// Exhaustive split search computing child SSE directly.
    #[derive(Debug, PartialEq)]
    enum Oracle {
        Leaf(f64),
        Split(usize, f64, Box<Oracle>, Box<Oracle>),
    }

    fn sse(ys: &[f64]) -> f64 {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter().map(|y| (y - m) * (y - m)).sum()
    }

    fn oracle(d: &Dataset, rows: &[usize], depth: usize, max_depth: usize) -> Oracle {
        let ys: Vec<f64> = rows.iter().map(|&i| d.targets()[i]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        if depth >= max_depth || rows.len() < 2 {
            return Oracle::Leaf(mean);
        }
        let parent = sse(&ys);
        let eps = 1e-12 * parent;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..d.n_features() {
            let mut vals: Vec<f64> = rows.iter().map(|&i| d.value(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let l: Vec<f64> = rows.iter().filter(|&&i| d.value(i, f) <= thr).map(|&i| d.targets()[i]).collect();
                let r: Vec<f64> = rows.iter().filter(|&&i| d.value(i, f) > thr).map(|&i| d.targets()[i]).collect();
                let gain = parent - sse(&l) - sse(&r);
                if gain > eps && best.is_none_or(|b| gain > b.0 + eps) {
                    best = Some((gain, f, thr));
                }
            }
        }
        match best {
            None => Oracle::Leaf(mean),
            Some((_, f, thr)) => {
                let l: Vec<usize> = rows.iter().copied().filter(|&i| d.value(i, f) <= thr).collect();
                let r: Vec<usize> = rows.iter().copied().filter(|&i| d.value(i, f) > thr).collect();
                Oracle::Split(
                    f,
                    thr,
                    Box::new(oracle(d, &l, depth + 1, max_depth)),
                    Box::new(oracle(d, &r, depth + 1, max_depth)),
                )
            }
        }
    }

    fn as_oracle(t: &Tree, i: usize) -> Oracle {
        let n = &t.nodes[i];
        match n.feature {
            None => Oracle::Leaf(n.value),
            Some(f) => Oracle::Split(f, n.threshold, Box::new(as_oracle(t, n.left)), Box::new(as_oracle(t, n.right))),
        }
    }

    fn close(a: &Oracle, b: &Oracle) -> bool {
        match (a, b) {
            (Oracle::Leaf(x), Oracle::Leaf(y)) => (x - y).abs() < 1e-9,
            (Oracle::Split(f, t, l, r), Oracle::Split(g, u, m, s)) => {
                f == g && (t - u).abs() < 1e-12 && close(l, m) && close(r, s)
            }
            _ => false,
        }
    }

    #[test]
    fn six_row_fixture_matches_exhaustive_search() {
        let rows = vec![
            vec![1.0, 5.0],
            vec![2.0, 3.0],
            vec![3.0, 8.0],
            vec![4.0, 1.0],
            vec![5.0, 7.0],
            vec![6.0, 2.0],
        ];
        let y = vec![10.0, 12.0, 30.0, 11.0, 33.0, 13.0];
        let d = ds(rows, y);
        let t = fit_tree(&d, &TreeParams { max_depth: 3, ..Default::default() });
        let o = oracle(&d, &(0..6).collect::<Vec<_>>(), 0, 3);
        assert!(close(&as_oracle(&t, 0), &o), "{:?}\n{:?}", as_oracle(&t, 0), o);
        // Feature 1 separates {8, 7} (targets 30, 33) from the rest.
        assert_eq!(t.nodes[0].feature, Some(1));
        assert!((t.nodes[0].threshold - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gain_sum_equals_sse_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (6.0 * r[0]).sin() * 10.0 + 3.0 * r[1] + rng.random::<f64>()).collect();
        let d = ds(rows, y);
        let t = fit_tree(&d, &TreeParams { max_depth: 5, ..Default::default() });
        let before = sse(d.targets());
        let after: f64 = (0..d.n_samples()).map(|i| (d.targets()[i] - t.predict_row(d.row(i))).powi(2)).sum();
        let total_gain: f64 = t.gains().iter().sum();
        assert!(((before - after) - total_gain).abs() < 1e-6 * before);
        assert_eq!(t.gains()[2] >= 0.0, true);
    }

    #[test]
    fn min_leaf_and_depth_respected() {
        let d = ds((0..40).map(|i| vec![i as f64]).collect(), (0..40).map(|i| (i % 7) as f64).collect());
        let t = fit_tree(&d, &TreeParams { max_depth: 3, min_leaf: 5, ..Default::default() });
        assert!(t.depth() <= 3);
        assert!(t.nodes.iter().filter(|n| n.is_leaf()).all(|n| n.n_samples >= 5));
    }

    proptest! {
        #[test]
        fn random_small_fixtures_match_oracle(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, -10.0f64..10.0), 2..=8)
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|(a, b, _)| vec![*a, *b]).collect();
            let y: Vec<f64> = data.iter().map(|(_, _, y)| *y).collect();
            let d = ds(rows, y);
            let t = fit_tree(&d, &TreeParams { max_depth: 4, ..Default::default() });
            let o = oracle(&d, &(0..d.n_samples()).collect::<Vec<_>>(), 0, 4);
            prop_assert!(close(&as_oracle(&t, 0), &o));
        }

        #[test]
        fn piecewise_constant_within_leaf(
            seed in 0u64..500, qa in 0.0f64..1.0, qb in 0.0f64..1.0, ua in 0.0f64..1.0, ub in 0.0f64..1.0
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
            let y: Vec<f64> = rows.iter().map(|r| r[0] * 5.0 + (r[1] > 0.3) as u8 as f64 * 4.0).collect();
            let d = ds(rows, y);
            let t = fit_tree(&d, &TreeParams { max_depth: 4, ..Default::default() });
            // Bounds of the query's leaf cell from the split path.
            let q = [qa, qb];
            let (mut lo, mut hi) = ([f64::NEG_INFINITY; 2], [f64::INFINITY; 2]);
            let mut i = 0;
            while let Some(f) = t.nodes[i].feature {
                let n = &t.nodes[i];
                if q[f] <= n.threshold { hi[f] = hi[f].min(n.threshold); i = n.left; } else { lo[f] = lo[f].max(n.threshold); i = n.right; }
            }
            let pick = |f: usize, u: f64| {
                let a = lo[f].max(-1.0);
                let b = hi[f].min(2.0);
                // (a, b]
                let v = a + (b - a) * u;
                if v <= a { b } else { v }
            };
            let p = [pick(0, ua), pick(1, ub)];
            prop_assert_eq!(t.predict_row(&p), t.predict_row(&q));
        }
    }
}
