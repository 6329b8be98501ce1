//! Mapping-model training table, model comparison and mapped concentrations.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::align::{CellId, CellSample, TimeKey};
use crate::clamp_pm25;
use crate::error::{Error, Result};
use crate::geo::{CellKey, GridSpec};
use crate::ingest::UrbanFeatureLayer;
use crate::learn::{fit, Dataset, ModelParams, Regressor, RegressorKind};
use crate::metrics::{mae, mape, pearson_r, PairedSeries};
use crate::numeric::{fnv1a, mix64};
use crate::timefmt::format_utc;

/// Per-cell mobile statistics, in feature order ahead of the urban layers.
pub const MOBILE_FEATURES: [&str; 4] = ["mean_mobile", "min_mobile", "max_mobile", "n_mobile"];
/// Default minimum number of mobile readings for a row.
pub const DEFAULT_MIN_MOBILE: u64 = 3;
/// Model comparison needs at least this many rows.
pub const MIN_COMPARE_ROWS: usize = 50;

/// Model kinds compared, in report order.
pub const COMPARED_KINDS: [RegressorKind; 6] = [
    RegressorKind::Gbt,
    RegressorKind::Forest,
    RegressorKind::Ols,
    RegressorKind::Lasso,
    RegressorKind::Knn,
    RegressorKind::Average,
];

pub fn feature_names(layers: &[UrbanFeatureLayer]) -> Vec<String> {
    MOBILE_FEATURES
        .iter()
        .map(|s| s.to_string())
        .chain(layers.iter().map(|l| l.name.clone()))
        .collect()
}

/// One model input row with its identity and optional target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub cell: CellId,
    pub time: TimeKey,
    pub features: Vec<f64>,
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl TrainingTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let mut x = Vec::with_capacity(self.rows.len() * self.feature_names.len());
        let mut y = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            x.extend_from_slice(&r.features);
            y.push(r.target.ok_or_else(|| Error::InvalidInput(format!("row {} has no target", r.cell)))?);
        }
        Dataset::from_flat(x, y, self.feature_names.clone())
    }

    /// `cell,interval_start,<features...>,target`
    pub fn to_csv(&self) -> String {
        let mut s = format!("cell,interval_start,{},target\n", self.feature_names.join(","));
        for r in &self.rows {
            s.push_str(&format!("{},{}", r.cell, format_utc(r.time.start)));
            for v in &r.features {
                s.push_str(&format!(",{v}"));
            }
            match r.target {
                Some(t) => s.push_str(&format!(",{t}\n")),
                None => s.push_str(",NA\n"),
            }
        }
        s
    }
}

fn make_row(s: &CellSample, layers: &[UrbanFeatureLayer], grid: &GridSpec, at: Option<CellKey>) -> FeatureRow {
    let mut features = vec![s.mean, s.min, s.max, s.n_mobile as f64];
    features.extend(layers.iter().map(|l| at.map_or(0.0, |k| l.value_at(grid, k))));
    FeatureRow {
        cell: s.cell.clone(),
        time: s.time,
        features,
        target: s.fixed_value,
    }
}

fn sorted(mut rows: Vec<FeatureRow>) -> Vec<FeatureRow> {
    rows.sort_by(|a, b| a.cell.cmp(&b.cell).then(a.time.cmp(&b.time)));
    rows
}

/// Rows for samples that carry a fixed value and at least `min_mobile`
/// readings. `locate` gives the grid cell whose urban features describe a
/// sample's cell (for a station square, the cell containing the station);
/// `None` zero-fills the layers.
pub fn build_table(
    samples: &[CellSample],
    layers: &[UrbanFeatureLayer],
    grid: &GridSpec,
    locate: impl Fn(&CellId) -> Option<CellKey>,
    min_mobile: u64,
) -> Result<TrainingTable> {
    let rows: Vec<FeatureRow> = samples
        .iter()
        .filter(|s| s.fixed_value.is_some() && s.n_mobile >= min_mobile)
        .map(|s| make_row(s, layers, grid, locate(&s.cell)))
        .collect();
    if rows.is_empty() {
        return Err(Error::Empty("no sample has both a fixed value and enough mobile readings".into()));
    }
    Ok(TrainingTable {
        feature_names: feature_names(layers),
        rows: sorted(rows),
    })
}

/// Layer features that take a single value across the table. A constant
/// column is collinear with the intercept, so callers drop these layers
/// before fitting.
pub fn constant_layers(table: &TrainingTable) -> Vec<String> {
    let Some(first) = table.rows.first() else {
        return Vec::new();
    };
    (MOBILE_FEATURES.len()..table.feature_names.len())
        .filter(|&j| table.rows.iter().all(|r| r.features[j] == first.features[j]))
        .map(|j| table.feature_names[j].clone())
        .collect()
}

/// Prediction rows for grid-cell samples meeting the floor.
pub fn mobile_rows(samples: &[CellSample], layers: &[UrbanFeatureLayer], grid: &GridSpec, min_mobile: u64) -> Vec<FeatureRow> {
    sorted(
        samples
            .iter()
            .filter(|s| s.n_mobile >= min_mobile)
            .filter_map(|s| match &s.cell {
                CellId::Grid(k) => Some(make_row(s, layers, grid, Some(*k))),
                CellId::Station(_) => None,
            })
            .collect(),
    )
}

/// Validation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// K folds assigned by a seeded hash of (cell, interval).
    KFold(usize),
    /// One fold per station cell.
    LeaveOneStationOut,
}

impl Validation {
    pub fn describe(&self, seed: u64) -> String {
        match self {
            Validation::KFold(k) => format!("{k}-fold cross-validation, folds by seeded hash of (cell, interval), seed {seed}"),
            Validation::LeaveOneStationOut => "leave-one-station-out cross-validation".to_string(),
        }
    }
}

/// Fold of each row.
pub fn assign_folds(rows: &[FeatureRow], validation: Validation, seed: u64) -> Result<Vec<usize>> {
    match validation {
        Validation::KFold(k) => {
            if k < 2 {
                return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
            }
            Ok(rows
                .iter()
                .map(|r| {
                    let h = mix64(seed ^ fnv1a(r.cell.to_string().as_bytes()) ^ mix64(r.time.start as u64));
                    (h % k as u64) as usize
                })
                .collect())
        }
        Validation::LeaveOneStationOut => {
            let mut ids: BTreeMap<&CellId, usize> = BTreeMap::new();
            for r in rows {
                let n = ids.len();
                ids.entry(&r.cell).or_insert(n);
            }
            let order: BTreeMap<&CellId, usize> = ids.keys().enumerate().map(|(i, c)| (*c, i)).collect();
            if order.len() < 2 {
                return Err(Error::InvalidInput("leave-one-station-out needs at least 2 stations".into()));
            }
            Ok(rows.iter().map(|r| order[&r.cell]).collect())
        }
    }
}

/// Pooled out-of-fold metrics of one model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub mae: f64,
    pub mape: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelScore {
    pub kind: RegressorKind,
    /// Error message when the kind failed on any fold.
    pub outcome: std::result::Result<Score, String>,
    /// Out-of-fold predictions, indexed like the table rows.
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub protocol: String,
    pub n_rows: usize,
    pub folds: Vec<usize>,
    pub scores: Vec<ModelScore>,
    pub best: RegressorKind,
}

impl ModelComparison {
    pub fn score(&self, kind: RegressorKind) -> Option<&Score> {
        self.scores.iter().find(|s| s.kind == kind).and_then(|s| s.outcome.as_ref().ok())
    }

    /// `model,mae,mape,r` under a protocol comment.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# protocol: {}; {} rows; metrics pooled over out-of-fold predictions\n", self.protocol, self.n_rows);
        s.push_str("model,mae,mape,r\n");
        let o = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        for m in &self.scores {
            match &m.outcome {
                Ok(sc) => s.push_str(&format!("{},{:.6},{},{}\n", m.kind, sc.mae, o(sc.mape), o(sc.r))),
                Err(_) => s.push_str(&format!("{},NA,NA,NA\n", m.kind)),
            }
        }
        for m in &self.scores {
            if let Err(e) = &m.outcome {
                s.push_str(&format!("# {} failed: {e}\n", m.kind));
            }
        }
        s.push_str(&format!("# best: {}\n", self.best));
        s
    }

    /// `cell,interval_start,fold`
    pub fn folds_csv(&self, table: &TrainingTable) -> String {
        let mut s = String::from("cell,interval_start,fold\n");
        for (r, f) in table.rows.iter().zip(&self.folds) {
            s.push_str(&format!("{},{},{f}\n", r.cell, format_utc(r.time.start)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub validation: Validation,
    pub seed: u64,
    pub params: ModelParams,
    pub kinds: Vec<RegressorKind>,
    pub min_rows: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            validation: Validation::KFold(5),
            seed: 0,
            params: ModelParams::default(),
            kinds: COMPARED_KINDS.to_vec(),
            min_rows: MIN_COMPARE_ROWS,
        }
    }
}

fn score(y: &[f64], yhat: &[f64]) -> Result<Score> {
    let s = PairedSeries::new(y.to_vec(), yhat.to_vec())?;
    Ok(Score {
        mae: mae(&s),
        mape: mape(&s).ok().map(|m| m.value),
        r: pearson_r(&s).ok(),
    })
}

/// Cross-validate every kind on identical folds. Every (kind, fold) fit runs
/// in parallel; results are collected in order.
pub fn compare_models(table: &TrainingTable, cfg: &CompareConfig) -> Result<ModelComparison> {
    if table.len() < cfg.min_rows {
        return Err(Error::Empty(format!(
            "model comparison needs at least {} rows, got {}",
            cfg.min_rows,
            table.len()
        )));
    }
    let d = table.dataset()?;
    let folds = assign_folds(&table.rows, cfg.validation, cfg.seed)?;
    let n_folds = folds.iter().max().map_or(0, |m| m + 1);
    let fold_rows: Vec<(Vec<usize>, Vec<usize>)> = (0..n_folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..d.n_samples()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .filter(|(train, test)| !train.is_empty() && !test.is_empty())
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.kinds.len())
        .flat_map(|k| (0..fold_rows.len()).map(move |f| (k, f)))
        .collect();
    let results: Vec<Result<Vec<(usize, f64)>>> = jobs
        .par_iter()
        .map(|&(k, f)| {
            let (train, test) = &fold_rows[f];
            let m = fit(cfg.kinds[k], &d.subset(train)?, &cfg.params)?;
            Ok(test.iter().map(|&i| (i, m.predict_row(d.row(i)))).collect())
        })
        .collect();
    let mut scores = Vec::with_capacity(cfg.kinds.len());
    for (k, kind) in cfg.kinds.iter().enumerate() {
        let mut preds = vec![f64::NAN; d.n_samples()];
        let mut failure = None;
        for (j, r) in jobs.iter().zip(&results) {
            if j.0 != k {
                continue;
            }
            match r {
                Ok(p) => {
                    for &(i, v) in p {
                        preds[i] = v;
                    }
                }
                Err(e) => {
                    failure.get_or_insert_with(|| format!("fold {}: {e}", j.1));
                }
            }
        }
        let outcome = match failure {
            Some(e) => Err(e),
            None => {
                let idx: Vec<usize> = (0..d.n_samples()).filter(|i| preds[*i].is_finite()).collect();
                let y: Vec<f64> = idx.iter().map(|&i| d.targets()[i]).collect();
                let yh: Vec<f64> = idx.iter().map(|&i| preds[i]).collect();
                score(&y, &yh).map_err(|e| e.to_string())
            }
        };
        scores.push(ModelScore {
            kind: *kind,
            outcome,
            predictions: preds,
        });
    }
    let best = scores
        .iter()
        .filter_map(|s| s.outcome.as_ref().ok().map(|sc| (s.kind, sc.mae)))
        .fold(None, |acc: Option<(RegressorKind, f64)>, (k, m)| match acc {
            Some((_, bm)) if bm <= m => acc,
            _ => Some((k, m)),
        })
        .map(|(k, _)| k)
        .ok_or_else(|| Error::UndefinedStatistic("every model kind failed".into()))?;
    Ok(ModelComparison {
        protocol: cfg.validation.describe(cfg.seed),
        n_rows: table.len(),
        folds,
        scores,
        best,
    })
}

/// A predicted concentration for one grid cell and interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappedValue {
    pub cell: CellKey,
    pub time: TimeKey,
    pub pm25: f64,
}

/// Predict every row (parallel over rows), clamped to the valid range.
pub fn predict_mapped(model: &Regressor, rows: &[FeatureRow]) -> Vec<MappedValue> {
    rows.par_iter()
        .filter_map(|r| match r.cell {
            CellId::Grid(k) => Some(MappedValue {
                cell: k,
                time: r.time,
                pm25: clamp_pm25(model.predict_row(&r.features)),
            }),
            CellId::Station(_) => None,
        })
        .collect()
}

/// `col,row,interval_start,pm25,source`
pub fn mapped_csv(values: &[MappedValue]) -> String {
    let mut s = String::from("col,row,interval_start,pm25,source\n");
    for v in values {
        s.push_str(&format!("{},{},{},{},mapped\n", v.cell.col, v.cell.row, format_utc(v.time.start), v.pm25));
    }
    s
}

/// Parse [`mapped_csv`] output. Interval lengths are not stored and are
/// supplied by the caller.
pub fn read_mapped_csv(text: &str, name: &str, interval: i64) -> Result<Vec<MappedValue>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        let err = || Error::Parse {
            path: name.to_string(),
            line: i as u64 + 1,
            message: format!("malformed mapped row `{line}`"),
        };
        if c.len() != 5 {
            return Err(err());
        }
        out.push(MappedValue {
            cell: CellKey::new(c[0].parse().map_err(|_| err())?, c[1].parse().map_err(|_| err())?),
            time: TimeKey {
                start: crate::timefmt::parse_utc(c[2]).map_err(|_| err())?,
                len: interval,
            },
            pm25: c[3].parse().map_err(|_| err())?,
        });
    }
    Ok(out)
}

/// Features by descending gain, ties by name.
pub fn gain_report(model: &Regressor, names: &[String]) -> Result<Vec<(String, f64)>> {
    let g = model.gain_table()?;
    let mut out: Vec<(String, f64)> = names.iter().cloned().zip(g.0).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

pub fn gain_csv(report: &[(String, f64)]) -> String {
    let mut s = String::from("rank,feature,gain\n");
    for (i, (n, g)) in report.iter().enumerate() {
        s.push_str(&format!("{},{n},{g:.6}\n", i + 1));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::ProjectedPoint;
    use crate::learn::{fit_average, GbtParams, ForestParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::new(ProjectedPoint::new(0.0, 0.0), 500.0, 4, 4).unwrap()
    }

    fn layer(name: &str, f: impl Fn(usize) -> f64) -> UrbanFeatureLayer {
        UrbanFeatureLayer {
            name: name.into(),
            values: (0..16).map(f).collect(),
        }
    }

    fn sample(cell: CellId, t: i64, n: u64, mean: f64, fixed: Option<f64>) -> CellSample {
        CellSample {
            cell,
            time: TimeKey { start: t, len: 300 },
            n_mobile: n,
            mean,
            min: mean - 1.0,
            max: mean + 1.0,
            fixed_value: fixed,
        }
    }

    #[test]
    fn table_rules_and_hand_join() {
        let layers = vec![layer("road_length.primary", |i| i as f64 * 10.0), layer("building_area", |i| 100.0 + i as f64)];
        let samples = vec![
            sample(CellId::Station("S02".into()), 300, 5, 40.0, Some(30.0)),
            sample(CellId::Station("S01".into()), 0, 4, 20.0, Some(18.0)),
            sample(CellId::Station("S01".into()), 300, 2, 20.0, Some(18.0)),
            sample(CellId::Station("S03".into()), 0, 9, 20.0, None),
        ];
        // S01 sits in cell (1,0) = index 1, S02 in (2,3) = index 14.
        let locate = |c: &CellId| match c {
            CellId::Station(s) if s == "S01" => Some(CellKey::new(1, 0)),
            CellId::Station(s) if s == "S02" => Some(CellKey::new(2, 3)),
            _ => None,
        };
        let t = build_table(&samples, &layers, &grid(), locate, 3).unwrap();
        assert_eq!(t.feature_names, ["mean_mobile", "min_mobile", "max_mobile", "n_mobile", "road_length.primary", "building_area"]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.rows[0].features, vec![20.0, 19.0, 21.0, 4.0, 10.0, 101.0]);
        assert_eq!(t.rows[1].features, vec![40.0, 39.0, 41.0, 5.0, 140.0, 114.0]);
        let mut rev = samples.clone();
        rev.reverse();
        assert_eq!(build_table(&rev, &layers, &grid(), locate, 3).unwrap(), t);
        assert!(build_table(&samples[2..], &layers, &grid(), locate, 3).is_err());
    }

    fn synthetic_table(n: usize, seed: u64, f: impl Fn(f64, f64) -> f64) -> TrainingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let m: f64 = rng.random_range(10.0..90.0);
                let road: f64 = rng.random_range(0.0..3000.0);
                let noise: f64 = rng.random_range(0.0..1000.0);
                let lo: f64 = rng.random_range(1.0..8.0);
                let hi: f64 = rng.random_range(1.0..8.0);
                let n = rng.random_range(3..12) as f64;
                FeatureRow {
                    cell: CellId::Station(format!("S{:02}", i % 12)),
                    time: TimeKey { start: (i / 12) as i64 * 300, len: 300 },
                    features: vec![m, m - lo, m + hi, n, road, noise],
                    target: Some(f(m, road)),
                }
            })
            .collect();
        TrainingTable {
            feature_names: feature_names(&[layer("road_length.primary", |_| 0.0), layer("building_area", |_| 0.0)]),
            rows: sorted(rows),
        }
    }

    fn quick() -> CompareConfig {
        CompareConfig {
            params: ModelParams {
                gbt: GbtParams { n_trees: 100, ..Default::default() },
                forest: ForestParams { n_trees: 40, ..Default::default() },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn average_baseline_is_exact_when_target_is_mean() {
        let t = synthetic_table(120, 1, |m, _| m);
        let c = compare_models(&t, &quick()).unwrap();
        assert_eq!(c.score(RegressorKind::Average).unwrap().mae, 0.0);
        assert_eq!(c.best, RegressorKind::Average);
        let kinds: Vec<RegressorKind> = c.scores.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, COMPARED_KINDS);
    }

    #[test]
    fn nonlinear_target_favours_gbt_and_road_gain() {
        let t = synthetic_table(400, 2, |m, road| m * (1.0 + if road > 1500.0 { 0.6 } else { 0.0 }));
        let c = compare_models(&t, &quick()).unwrap();
        let gbt = c.score(RegressorKind::Gbt).unwrap().mae;
        let ols = c.score(RegressorKind::Ols).unwrap().mae;
        assert!(gbt < ols, "gbt {gbt} ols {ols}");
        let d = t.dataset().unwrap();
        let model = fit(RegressorKind::Gbt, &d, &quick().params).unwrap();
        let report = gain_report(&model, &t.feature_names).unwrap();
        let top3: Vec<&str> = report[..3].iter().map(|(n, _)| n.as_str()).collect();
        assert!(top3.contains(&"road_length.primary"), "{report:?}");
        assert!(report[0].0.ends_with("_mobile"), "{report:?}");
    }

    #[test]
    fn average_oracle_and_identical_folds() {
        let t = synthetic_table(100, 3, |m, road| m * 0.7 + road / 300.0);
        let c = compare_models(&t, &quick()).unwrap();
        let d = t.dataset().unwrap();
        let direct = mae(&PairedSeries::new(d.targets().to_vec(), d.column(0)).unwrap());
        assert!((c.score(RegressorKind::Average).unwrap().mae - direct).abs() < 1e-12);
        assert!(c.scores.iter().all(|s| s.predictions.iter().all(|p| p.is_finite())));
        let again = compare_models(&t, &quick()).unwrap();
        assert_eq!(again, c);
        assert!(c.to_csv().lines().nth(1) == Some("model,mae,mape,r"));
    }

    #[test]
    fn constant_layers_found() {
        let mut t = synthetic_table(30, 7, |m, _| m);
        assert!(constant_layers(&t).is_empty());
        for r in &mut t.rows {
            r.features[5] = 0.0;
        }
        assert_eq!(constant_layers(&t), vec!["building_area".to_string()]);
    }

    #[test]
    fn leave_one_station_out_folds() {
        let t = synthetic_table(60, 4, |m, _| m);
        let folds = assign_folds(&t.rows, Validation::LeaveOneStationOut, 0).unwrap();
        for (r, f) in t.rows.iter().zip(&folds) {
            let other = t.rows.iter().zip(&folds).find(|(o, _)| o.cell == r.cell).unwrap();
            assert_eq!(other.1, f);
        }
        assert_eq!(folds.iter().max(), Some(&11));
        assert!(compare_models(&synthetic_table(20, 5, |m, _| m), &quick()).is_err());
    }

    #[test]
    fn mapped_predictions() {
        let g = grid();
        let layers = vec![layer("road_length.primary", |i| i as f64)];
        let samples = vec![
            sample(CellId::Grid(CellKey::new(0, 0)), 0, 3, 30.0, None),
            sample(CellId::Grid(CellKey::new(1, 0)), 0, 2, 50.0, None),
            sample(CellId::Grid(CellKey::new(2, 2)), 0, 7, 70.0, None),
        ];
        let rows = mobile_rows(&samples, &layers, &g, 3);
        assert_eq!(rows.len(), 2);
        let names = feature_names(&layers);
        let d = Dataset::new(vec![vec![1.0, 0.0, 2.0, 3.0, 0.0]], vec![1.0], names.clone()).unwrap();
        let avg = Regressor::Average(fit_average(&d, "mean_mobile").unwrap());
        let out = predict_mapped(&avg, &rows);
        assert_eq!(out.iter().map(|v| v.pm25).collect::<Vec<_>>(), vec![30.0, 70.0]);

        let t = synthetic_table(60, 6, |m, road| m + road / 100.0);
        let gbt = fit(RegressorKind::Gbt, &t.dataset().unwrap(), &quick().params).unwrap();
        let rows3: Vec<FeatureRow> = (0..3)
            .map(|i| FeatureRow {
                cell: CellId::Grid(CellKey::new(i, 0)),
                time: TimeKey { start: 0, len: 300 },
                features: vec![20.0 + i as f64, 15.0, 25.0, 6.0, 1000.0 * i as f64, 3.0],
                target: None,
            })
            .collect();
        let mut buf = Vec::new();
        crate::learn::write_regressor(&mut buf, &gbt, &t.feature_names).unwrap();
        let (back, _) = crate::learn::read_regressor(buf.as_slice(), "mem").unwrap();
        let a = predict_mapped(&gbt, &rows3);
        let b = predict_mapped(&back, &rows3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.pm25.to_bits() == y.pm25.to_bits()));
        let csv = mapped_csv(&a);
        assert_eq!(read_mapped_csv(&csv, "m", 300).unwrap(), a);
    }
}
