//! Evaluation metrics and spatial/temporal map statistics.

use crate::error::{Error, Result};
use crate::maps::PollutionMap;
use crate::numeric::{self, CompensatedSum};

/// Reference values `y` paired with compared values `y_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    y: Vec<f64>,
    y_hat: Vec<f64>,
}

impl PairedSeries {
    pub fn new(y: Vec<f64>, y_hat: Vec<f64>) -> Result<Self> {
        if y.len() != y_hat.len() {
            return Err(Error::InvalidInput(format!(
                "paired series lengths differ: {} vs {}",
                y.len(),
                y_hat.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::Empty("paired series".into()));
        }
        if y.iter().chain(&y_hat).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("paired series contains non-finite values".into()));
        }
        Ok(PairedSeries { y, y_hat })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (y, y_hat) = pairs.iter().copied().unzip();
        Self::new(y, y_hat)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_hat(&self) -> &[f64] {
        &self.y_hat
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.y.iter().copied().zip(self.y_hat.iter().copied())
    }
}

/// Pearson product-moment correlation.
pub fn pearson_r(s: &PairedSeries) -> Result<f64> {
    let n = s.len() as f64;
    let my = numeric::sum(s.y.iter().copied()) / n;
    let mh = numeric::sum(s.y_hat.iter().copied()) / n;
    let mut sxy = CompensatedSum::new();
    let mut sxx = CompensatedSum::new();
    let mut syy = CompensatedSum::new();
    for (a, b) in s.pairs() {
        let (da, db) = (a - my, b - mh);
        sxy.add(da * db);
        sxx.add(da * da);
        syy.add(db * db);
    }
    let (sxx, syy) = (sxx.value(), syy.value());
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::UndefinedStatistic("correlation of a zero-variance series".into()));
    }
    Ok((sxy.value() / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination `1 - SS_res / SS_tot`; negative for
/// predictors worse than the mean.
pub fn r_squared(s: &PairedSeries) -> Result<f64> {
    let my = numeric::sum(s.y.iter().copied()) / s.len() as f64;
    let ss_tot = numeric::sum(s.y.iter().map(|v| (v - my) * (v - my)));
    if ss_tot <= 0.0 {
        return Err(Error::UndefinedStatistic("R² with zero-variance reference".into()));
    }
    let ss_res = numeric::sum(s.pairs().map(|(a, b)| (a - b) * (a - b)));
    Ok(1.0 - ss_res / ss_tot)
}

pub fn mae(s: &PairedSeries) -> f64 {
    numeric::sum(s.pairs().map(|(a, b)| (a - b).abs())) / s.len() as f64
}

pub fn rmse(s: &PairedSeries) -> f64 {
    (numeric::sum(s.pairs().map(|(a, b)| (a - b) * (a - b))) / s.len() as f64).sqrt()
}

/// Mean absolute percentage error as a fraction, over pairs with `y != 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub value: f64,
    pub excluded: usize,
}

pub fn mape(s: &PairedSeries) -> Result<Mape> {
    let mut acc = CompensatedSum::new();
    let mut used = 0usize;
    for (a, b) in s.pairs() {
        if a != 0.0 {
            acc.add(((a - b) / a).abs());
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedStatistic("MAPE with all-zero targets".into()));
    }
    Ok(Mape {
        value: acc.value() / used as f64,
        excluded: s.len() - used,
    })
}

/// One row of an evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub n: usize,
    pub r: f64,
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mape: Option<f64>,
}

impl MetricReport {
    pub fn compute(s: &PairedSeries) -> Result<Self> {
        Ok(MetricReport {
            n: s.len(),
            r: pearson_r(s)?,
            r2: r_squared(s)?,
            mae: mae(s),
            rmse: rmse(s),
            mape: mape(s).ok().map(|m| m.value),
        })
    }

    pub const CSV_HEADER: &'static str = "context,n,r,r2,mae,rmse,mape";

    pub fn csv_row(&self, context: &str) -> String {
        format!(
            "{context},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.n,
            self.r,
            self.r2,
            self.mae,
            self.rmse,
            self.mape.map_or_else(|| "NA".to_string(), |m| format!("{m:.6}"))
        )
    }
}

/// Mean and population standard deviation of adjacent-slice percentage
/// changes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentVariation {
    pub mean_percent: f64,
    pub std_percent: f64,
    /// Per-step value, `None` for steps with no comparable cell.
    pub steps: Vec<Option<f64>>,
}

impl AdjacentVariation {
    pub fn skipped_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Adjacent variation over raw cell-value slices of equal length.
///
/// For each step `t -> t+1` the mean of `|C[t+1] - C[t]| / C[t] * 100` is
/// taken over cells present in both slices with `C[t] > 0`. The result is the
/// mean and population std of those per-step values.
pub fn adjacent_variation_values(slices: &[&[Option<f64>]]) -> Result<AdjacentVariation> {
    if slices.len() < 2 {
        return Err(Error::InvalidInput("adjacent variation needs at least two slices".into()));
    }
    let n = slices[0].len();
    if slices.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidInput("slices are on different grids".into()));
    }
    let steps: Vec<Option<f64>> = slices
        .windows(2)
        .map(|w| {
            let mut acc = CompensatedSum::new();
            let mut count = 0usize;
            for (a, b) in w[0].iter().zip(w[1].iter()) {
                if let (Some(a), Some(b)) = (a, b) {
                    if *a > 0.0 {
                        acc.add((b - a).abs() / a * 100.0);
                        count += 1;
                    }
                }
            }
            (count > 0).then(|| acc.value() / count as f64)
        })
        .collect();
    let valid: Vec<f64> = steps.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::UndefinedStatistic("no step has a comparable cell pair".into()));
    }
    Ok(AdjacentVariation {
        mean_percent: numeric::mean(&valid).unwrap_or(0.0),
        std_percent: numeric::population_std(&valid).unwrap_or(0.0),
        steps,
    })
}

/// Adjacent variation over an ordered series of maps.
pub fn adjacent_variation(slices: &[PollutionMap]) -> Result<AdjacentVariation> {
    if let Some(first) = slices.first() {
        if slices.iter().any(|m| m.grid != first.grid) {
            return Err(Error::InvalidInput("maps are on different grids".into()));
        }
    }
    let views: Vec<&[Option<f64>]> = slices.iter().map(|m| m.values.as_slice()).collect();
    adjacent_variation_values(&views)
}

/// Spatial weights used by [`morans_i`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialWeights {
    /// Rook (edge-sharing) contiguity, row-standardized, restricted to
    /// cells holding a value.
    #[default]
    RookRowStandardized,
}

/// Minimum number of valued cells for [`morans_i`].
pub const MORANS_MIN_CELLS: usize = 9;

/// Global Moran's I on a row-major `n_cols x n_rows` grid of optional values.
pub fn morans_i_grid(values: &[Option<f64>], n_cols: usize, n_rows: usize, weights: SpatialWeights) -> Result<f64> {
    let SpatialWeights::RookRowStandardized = weights;
    if values.len() != n_cols * n_rows {
        return Err(Error::InvalidInput("value grid does not match its dimensions".into()));
    }
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let n = present.len();
    if n < MORANS_MIN_CELLS {
        return Err(Error::UndefinedStatistic(format!(
            "Moran's I needs at least {MORANS_MIN_CELLS} valued cells, got {n}"
        )));
    }
    let mean = numeric::sum(present.iter().copied()) / n as f64;
    let m2 = numeric::sum(present.iter().map(|v| (v - mean) * (v - mean)));
    if m2 <= 0.0 {
        return Err(Error::UndefinedStatistic("Moran's I of a zero-variance field".into()));
    }

    let z = |i: usize| values[i].map(|v| v - mean);
    let mut cross = CompensatedSum::new();
    let mut weight_total = 0.0;
    for row in 0..n_rows {
        for col in 0..n_cols {
            let i = row * n_cols + col;
            let Some(zi) = z(i) else { continue };
            let mut neighbours = [None; 4];
            if col > 0 {
                neighbours[0] = z(i - 1);
            }
            if col + 1 < n_cols {
                neighbours[1] = z(i + 1);
            }
            if row > 0 {
                neighbours[2] = z(i - n_cols);
            }
            if row + 1 < n_rows {
                neighbours[3] = z(i + n_cols);
            }
            let k = neighbours.iter().flatten().count();
            if k == 0 {
                continue;
            }
            let w = 1.0 / k as f64;
            for zj in neighbours.iter().flatten() {
                cross.add(w * zi * zj);
            }
            weight_total += 1.0;
        }
    }
    if weight_total == 0.0 {
        return Err(Error::UndefinedStatistic("no valued cell has a valued neighbour".into()));
    }
    Ok(n as f64 / weight_total * cross.value() / m2)
}

/// Global Moran's I over the present values of a map.
pub fn morans_i(map: &PollutionMap, weights: SpatialWeights) -> Result<f64> {
    morans_i_grid(&map.values, map.grid.n_cols as usize, map.grid.n_rows as usize, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ps(y: &[f64], h: &[f64]) -> PairedSeries {
        PairedSeries::new(y.to_vec(), h.to_vec()).unwrap()
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson_r(&ps(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&ps(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap() + 1.0).abs() < 1e-15);
        // centered: y = (-1.5,-.5,.5,1.5), ŷ = (-1.5,.5,-.5,1.5) → 4 / 5
        let r = pearson_r(&ps(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
        assert!(matches!(
            pearson_r(&ps(&[2.0, 2.0], &[1.0, 3.0])),
            Err(Error::UndefinedStatistic(_))
        ));
    }

    #[test]
    fn r_squared_examples() {
        assert_eq!(r_squared(&ps(&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0])).unwrap(), 1.0);
        assert_eq!(r_squared(&ps(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0])).unwrap(), 0.0);
        assert_eq!(r_squared(&ps(&[0.0, 2.0], &[1.0, 1.0])).unwrap(), 0.0);
        assert!(r_squared(&ps(&[0.0, 2.0], &[5.0, -5.0])).unwrap() < 0.0);
        assert!(r_squared(&ps(&[3.0, 3.0], &[1.0, 2.0])).is_err());
    }

    #[test]
    fn mae_rmse_examples() {
        assert_eq!(mae(&ps(&[1.0, 2.0], &[1.0, 2.0])), 0.0);
        assert_eq!(mae(&ps(&[1.0, 2.0], &[2.0, 4.0])), 1.5);
        assert_eq!(mae(&ps(&[10.0], &[7.0])), 3.0);
        assert_eq!(rmse(&ps(&[4.0, 2.0], &[4.0, 2.0])), 0.0);
        assert!((rmse(&ps(&[0.0, 0.0], &[3.0, 4.0])) - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&ps(&[5.0, 7.0], &[5.0, 7.0])).unwrap().value, 0.0);
        assert!((mape(&ps(&[100.0], &[90.0])).unwrap().value - 0.10).abs() < 1e-15);
        let m = mape(&ps(&[0.0, 50.0], &[5.0, 60.0])).unwrap();
        assert!((m.value - 0.20).abs() < 1e-15);
        assert_eq!(m.excluded, 1);
        assert!(mape(&ps(&[0.0, 0.0], &[1.0, 2.0])).is_err());
    }

    #[test]
    fn metric_report_row() {
        let rep = MetricReport::compute(&ps(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0])).unwrap();
        assert_eq!(rep.csv_row("(a)"), "(a),4,0.800000,0.600000,0.500000,0.707107,0.208333");
    }

    #[test]
    fn adjacent_variation_examples() {
        let a = [Some(10.0), Some(20.0), Some(5.0), None];
        let same = adjacent_variation_values(&[&a, &a]).unwrap();
        assert_eq!((same.mean_percent, same.std_percent), (0.0, 0.0));

        let b = a.map(|v| v.map(|x| 2.0 * x));
        let dbl = adjacent_variation_values(&[&a, &b]).unwrap();
        assert_eq!((dbl.mean_percent, dbl.std_percent), (100.0, 0.0));

        // 2x2 grid, three slices. Step 0: cells 0,1,2 -> |11-10|/10, |0-20|/20,
        // |5-5|/5 -> (10 + 100 + 0)/3. Step 1: cell 0 (11->22) 100, cell 1 has
        // zero base and is skipped, cell 2 (5->4) 20, cell 3 missing in s1.
        let s0 = [Some(10.0), Some(20.0), Some(5.0), None];
        let s1 = [Some(11.0), Some(0.0), Some(5.0), Some(3.0)];
        let s2 = [Some(22.0), Some(7.0), Some(4.0), Some(3.0)];
        let v = adjacent_variation_values(&[&s0, &s1, &s2]).unwrap();
        let step0: f64 = 110.0 / 3.0;
        let step1: f64 = (100.0 + 20.0 + 0.0) / 3.0;
        let m = (step0 + step1) / 2.0;
        let sd = (((step0 - m).powi(2) + (step1 - m).powi(2)) / 2.0).sqrt();
        assert!((v.mean_percent - m).abs() < 1e-12);
        assert!((v.std_percent - sd).abs() < 1e-12);
    }

    #[test]
    fn adjacent_variation_skips_empty_steps() {
        let s0 = [Some(1.0), None];
        let s1 = [None, Some(2.0)];
        let s2 = [Some(3.0), Some(3.0)];
        let v = adjacent_variation_values(&[&s0, &s1, &s2]).unwrap();
        assert_eq!(v.skipped_steps(), vec![0]);
        assert!((v.mean_percent - 50.0).abs() < 1e-12);
        assert!(adjacent_variation_values(&[&s0, &s1]).is_err());
    }

    /// Direct evaluation with a dense weight matrix.
    fn morans_brute(values: &[Option<f64>], nc: usize, nr: usize) -> f64 {
        let n_all = nc * nr;
        let mut w = vec![vec![0.0; n_all]; n_all];
        for i in 0..n_all {
            if values[i].is_none() {
                continue;
            }
            let (c, r) = ((i % nc) as i64, (i / nc) as i64);
            let nb: Vec<usize> = [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
                .iter()
                .filter(|(x, y)| *x >= 0 && *y >= 0 && (*x as usize) < nc && (*y as usize) < nr)
                .map(|(x, y)| *y as usize * nc + *x as usize)
                .filter(|j| values[*j].is_some())
                .collect();
            for j in &nb {
                w[i][*j] = 1.0 / nb.len() as f64;
            }
        }
        let present: Vec<usize> = (0..n_all).filter(|i| values[*i].is_some()).collect();
        let n = present.len() as f64;
        let mean = present.iter().map(|i| values[*i].unwrap()).sum::<f64>() / n;
        let z = |i: usize| values[i].unwrap() - mean;
        let mut num = 0.0;
        let mut s0 = 0.0;
        for &i in &present {
            for &j in &present {
                num += w[i][j] * z(i) * z(j);
                s0 += w[i][j];
            }
        }
        let den: f64 = present.iter().map(|i| z(*i) * z(*i)).sum();
        n / s0 * num / den
    }

    #[test]
    fn checkerboard_is_minus_one() {
        let v: Vec<Option<f64>> = (0..16).map(|i| Some(((i % 4 + i / 4) % 2) as f64)).collect();
        let brute = morans_brute(&v, 4, 4);
        assert!((brute + 1.0).abs() < 1e-12);
        assert!((morans_i_grid(&v, 4, 4, SpatialWeights::default()).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_halves_positive_and_matches_brute_force() {
        let v: Vec<Option<f64>> = (0..16).map(|i| Some(if i % 4 < 2 { 0.0 } else { 1.0 })).collect();
        let brute = morans_brute(&v, 4, 4);
        let got = morans_i_grid(&v, 4, 4, SpatialWeights::default()).unwrap();
        assert!((got - brute).abs() < 1e-12);
        // cols 0/3 see only like neighbours; cols 1/2 see one unlike neighbour
        // out of 3 (corner rows) or 4: (8 + 4/3 + 4/2) / 16 = 17/24
        assert!((got - 17.0 / 24.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn constant_field_is_undefined() {
        let v = vec![Some(4.0); 16];
        assert!(matches!(
            morans_i_grid(&v, 4, 4, SpatialWeights::default()),
            Err(Error::UndefinedStatistic(_))
        ));
        let sparse = vec![Some(1.0), None, Some(2.0), None];
        assert!(morans_i_grid(&sparse, 2, 2, SpatialWeights::default()).is_err());
    }

    #[test]
    fn missing_cells_leave_the_weight_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v: Vec<Option<f64>> = (0..36)
                .map(|_| rng.random_bool(0.8).then(|| rng.random_range(0.0..10.0)))
                .collect();
            let (Ok(got), brute) = (morans_i_grid(&v, 6, 6, SpatialWeights::default()), morans_brute(&v, 6, 6)) else {
                continue;
            };
            assert!((got - brute).abs() < 1e-10, "{got} vs {brute}");
        }
    }

    #[test]
    fn iid_fields_centre_on_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut total = 0.0;
        for _ in 0..200 {
            let v: Vec<Option<f64>> = (0..100).map(|_| Some(rng.random::<f64>())).collect();
            total += morans_i_grid(&v, 10, 10, SpatialWeights::default()).unwrap();
        }
        let mean = total / 200.0;
        assert!((mean + 1.0 / 99.0).abs() < 0.05, "{mean}");
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            y in proptest::collection::vec(-100.0f64..100.0, 3..40),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -50.0f64..50.0,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h: Vec<f64> = y.iter().map(|v| v + rng.random_range(-30.0..30.0)).collect();
            let base = PairedSeries::new(y.clone(), h.clone()).unwrap();
            let Ok(r0) = pearson_r(&base) else { return Ok(()) };
            let scaled = PairedSeries::new(y.iter().map(|v| a * v + b).collect(), h).unwrap();
            let r1 = pearson_r(&scaled).unwrap();
            prop_assert!((r1 - a.signum() * r0).abs() < 1e-9);
        }

        #[test]
        fn rmse_dominates_mae_and_r2_at_most_one(
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50)
        ) {
            let s = PairedSeries::from_pairs(&pairs).unwrap();
            prop_assert!(rmse(&s) + 1e-12 >= mae(&s));
            if let Ok(r2) = r_squared(&s) {
                prop_assert!(r2 <= 1.0);
            }
        }

        #[test]
        fn adjacent_variation_scale_invariant(
            vals in proptest::collection::vec(proptest::collection::vec(1.0f64..100.0, 6), 2..6),
            k in 0.01f64..100.0,
        ) {
            let slices: Vec<Vec<Option<f64>>> = vals.iter().map(|s| s.iter().map(|v| Some(*v)).collect()).collect();
            let scaled: Vec<Vec<Option<f64>>> = vals.iter().map(|s| s.iter().map(|v| Some(v * k)).collect()).collect();
            let a = adjacent_variation_values(&slices.iter().map(|s| s.as_slice()).collect::<Vec<_>>()).unwrap();
            let b = adjacent_variation_values(&scaled.iter().map(|s| s.as_slice()).collect::<Vec<_>>()).unwrap();
            prop_assert!((a.mean_percent - b.mean_percent).abs() <= 1e-9 * a.mean_percent.max(1.0));
            prop_assert!((a.std_percent - b.std_percent).abs() <= 1e-9 * a.mean_percent.max(1.0));
        }
    }
}
