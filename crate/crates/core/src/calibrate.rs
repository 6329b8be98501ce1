//! Low-cost sensor correction against a co-located reference station.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::{StatSummary, TimeKey};
use crate::clamp_pm25;
use crate::error::{Error, Result};
use crate::ingest::{FixedRecord, MobileRecord};
use crate::learn::dump::{write_trees, TextReader};
use crate::learn::{fit_gbt, solve_least_squares, Dataset, Gbt, GbtParams};
use crate::metrics::{pearson_r, MetricReport, PairedSeries};

/// Matching interval used for co-location, seconds.
pub const COLOCATION_INTERVAL: i64 = 300;
/// Minimum number of pairs a model is fitted on.
pub const MIN_TRAIN_PAIRS: usize = 10;
/// Input names of the boosted model, in order.
pub const BOOSTED_INPUTS: [&str; 3] = ["pm25_lcs", "rh", "temp"];

/// Interval-averaged sensor readings paired with the reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct CoLocationPair {
    pub time: TimeKey,
    pub n_mobile: u64,
    pub pm25_lcs: f64,
    pub rh: f64,
    pub temp: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoLocationSet {
    pub pairs: Vec<CoLocationPair>,
}

impl CoLocationSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Average every sensor reading per interval and pair it with the averaged
/// reference value of the same interval. Intervals missing either side are
/// dropped.
pub fn match_colocation(mobile: &[MobileRecord], fixed: &[FixedRecord], interval: i64) -> Result<CoLocationSet> {
    if interval <= 0 {
        return Err(Error::Config(format!("co-location interval must be positive, got {interval}")));
    }
    if mobile.is_empty() || fixed.is_empty() {
        return Err(Error::Empty("co-location needs both sensor and reference records".into()));
    }
    let mut lcs: BTreeMap<i64, [StatSummary; 3]> = BTreeMap::new();
    for r in mobile {
        let e = lcs.entry(TimeKey::of(r.t, interval).start).or_default();
        e[0].push(r.pm25_raw);
        e[1].push(r.rh);
        e[2].push(r.temp);
    }
    let mut reference: BTreeMap<i64, StatSummary> = BTreeMap::new();
    for r in fixed {
        reference.entry(TimeKey::of(r.t, interval).start).or_default().push(r.pm25);
    }
    let pairs: Vec<CoLocationPair> = lcs
        .iter()
        .filter_map(|(start, s)| {
            let f = reference.get(start)?.mean()?;
            Some(CoLocationPair {
                time: TimeKey { start: *start, len: interval },
                n_mobile: s[0].n,
                pm25_lcs: s[0].mean()?,
                rh: s[1].mean()?,
                temp: s[2].mean()?,
                reference: f,
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Empty("no interval holds both sensor and reference data".into()));
    }
    Ok(CoLocationSet { pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CalibrationKind {
    Linear,
    RhLinear,
    RhTLinear,
    Boosted,
}

impl CalibrationKind {
    pub const ALL: [CalibrationKind; 4] = [
        CalibrationKind::Linear,
        CalibrationKind::RhLinear,
        CalibrationKind::RhTLinear,
        CalibrationKind::Boosted,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationKind::Linear => "linear",
            CalibrationKind::RhLinear => "rh_linear",
            CalibrationKind::RhTLinear => "rh_t_linear",
            CalibrationKind::Boosted => "boosted",
        }
    }

    /// Report row label, `(a)` through `(d)`.
    pub fn label(&self) -> &'static str {
        match self {
            CalibrationKind::Linear => "(a)",
            CalibrationKind::RhLinear => "(b)",
            CalibrationKind::RhTLinear => "(c)",
            CalibrationKind::Boosted => "(d)",
        }
    }
}

impl fmt::Display for CalibrationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CalibrationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalibrationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown calibration kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationModel {
    /// `a·x + b`
    Linear { a: f64, b: f64 },
    /// `j1·x + j2·RH + j3`
    RhLinear { j1: f64, j2: f64, j3: f64 },
    /// `k1·x + k2·RH + k3·T + k4`
    RhTLinear { k1: f64, k2: f64, k3: f64, k4: f64 },
    /// Boosted trees over `[pm25_lcs, rh, temp]`.
    Boosted(Gbt),
}

impl CalibrationModel {
    pub fn kind(&self) -> CalibrationKind {
        match self {
            CalibrationModel::Linear { .. } => CalibrationKind::Linear,
            CalibrationModel::RhLinear { .. } => CalibrationKind::RhLinear,
            CalibrationModel::RhTLinear { .. } => CalibrationKind::RhTLinear,
            CalibrationModel::Boosted(_) => CalibrationKind::Boosted,
        }
    }

    /// Unclamped model output.
    pub fn predict_raw(&self, pm25: f64, rh: f64, temp: f64) -> f64 {
        match self {
            CalibrationModel::Linear { a, b } => a * pm25 + b,
            CalibrationModel::RhLinear { j1, j2, j3 } => j1 * pm25 + j2 * rh + j3,
            CalibrationModel::RhTLinear { k1, k2, k3, k4 } => k1 * pm25 + k2 * rh + k3 * temp + k4,
            CalibrationModel::Boosted(g) => g.predict_row(&[pm25, rh, temp]),
        }
    }

    /// Calibrated concentration clamped to the valid range.
    pub fn predict(&self, pm25: f64, rh: f64, temp: f64) -> f64 {
        clamp_pm25(self.predict_raw(pm25, rh, temp))
    }

    pub fn apply(&self, rec: &MobileRecord) -> f64 {
        self.predict(rec.pm25_raw, rec.rh, rec.temp)
    }

    /// Linear coefficients in equation order; empty for the boosted kind.
    pub fn params(&self) -> Vec<f64> {
        match self {
            CalibrationModel::Linear { a, b } => vec![*a, *b],
            CalibrationModel::RhLinear { j1, j2, j3 } => vec![*j1, *j2, *j3],
            CalibrationModel::RhTLinear { k1, k2, k3, k4 } => vec![*k1, *k2, *k3, *k4],
            CalibrationModel::Boosted(_) => Vec::new(),
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let e = |e| Error::io("<calibration model>", e);
        writeln!(w, "pmfuse-calibration 1").map_err(e)?;
        writeln!(w, "kind {}", self.kind()).map_err(e)?;
        match self {
            CalibrationModel::Boosted(g) => {
                writeln!(w, "inputs {}", BOOSTED_INPUTS.join(",")).map_err(e)?;
                writeln!(w, "base {}", g.base).map_err(e)?;
                writeln!(w, "learning_rate {}", g.learning_rate).map_err(e)?;
                write_trees(w, &g.trees)?;
            }
            m => {
                let p: Vec<String> = m.params().iter().map(|v| v.to_string()).collect();
                writeln!(w, "params {}", p.join(",")).map_err(e)?;
            }
        }
        writeln!(w, "end").map_err(e)?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R, source: &str) -> Result<CalibrationModel> {
        let mut r = TextReader::new(input, source);
        r.header("pmfuse-calibration", 1)?;
        let kind_s = r.field("kind")?;
        let kind: CalibrationKind = kind_s.parse().map_err(|_| r.error(format!("unknown kind `{kind_s}`")))?;
        let model = if kind == CalibrationKind::Boosted {
            let inputs = r.field("inputs")?;
            if inputs != BOOSTED_INPUTS.join(",") {
                return Err(r.error(format!("unexpected boosted inputs `{inputs}`")));
            }
            let base = r.field("base").and_then(|s| r.f64(&s))?;
            let lr = r.field("learning_rate").and_then(|s| r.f64(&s))?;
            let trees = r.trees(BOOSTED_INPUTS.len())?;
            CalibrationModel::Boosted(Gbt::from_parts(base, lr, trees, BOOSTED_INPUTS.len()))
        } else {
            let p = r.field("params").and_then(|s| r.f64_list(&s))?;
            let want = match kind {
                CalibrationKind::Linear => 2,
                CalibrationKind::RhLinear => 3,
                _ => 4,
            };
            if p.len() != want {
                return Err(r.error(format!("{kind} needs {want} parameters, found {}", p.len())));
            }
            match kind {
                CalibrationKind::Linear => CalibrationModel::Linear { a: p[0], b: p[1] },
                CalibrationKind::RhLinear => CalibrationModel::RhLinear { j1: p[0], j2: p[1], j3: p[2] },
                _ => CalibrationModel::RhTLinear { k1: p[0], k2: p[1], k3: p[2], k4: p[3] },
            }
        };
        r.expect("end")?;
        Ok(model)
    }
}

/// Fit one calibration model on co-located training pairs.
pub fn fit(kind: CalibrationKind, train: &CoLocationSet, gbt: &GbtParams) -> Result<CalibrationModel> {
    if train.len() < MIN_TRAIN_PAIRS {
        return Err(Error::Empty(format!(
            "calibration needs at least {MIN_TRAIN_PAIRS} pairs, got {}",
            train.len()
        )));
    }
    let y: Vec<f64> = train.pairs.iter().map(|p| p.reference).collect();
    let design = |cols: &dyn Fn(&CoLocationPair) -> Vec<f64>| -> (Vec<f64>, usize) {
        let mut a = Vec::new();
        let mut n_cols = 0;
        for p in &train.pairs {
            let row = cols(p);
            n_cols = row.len();
            a.extend(row);
        }
        (a, n_cols)
    };
    Ok(match kind {
        CalibrationKind::Linear => {
            let (a, n) = design(&|p| vec![p.pm25_lcs, 1.0]);
            let c = solve_least_squares(&a, n, &y)?;
            CalibrationModel::Linear { a: c[0], b: c[1] }
        }
        CalibrationKind::RhLinear => {
            let (a, n) = design(&|p| vec![p.pm25_lcs, p.rh, 1.0]);
            let c = solve_least_squares(&a, n, &y)?;
            CalibrationModel::RhLinear { j1: c[0], j2: c[1], j3: c[2] }
        }
        CalibrationKind::RhTLinear => {
            let (a, n) = design(&|p| vec![p.pm25_lcs, p.rh, p.temp, 1.0]);
            let c = solve_least_squares(&a, n, &y)?;
            CalibrationModel::RhTLinear {
                k1: c[0],
                k2: c[1],
                k3: c[2],
                k4: c[3],
            }
        }
        CalibrationKind::Boosted => {
            let rows = train.pairs.iter().map(|p| vec![p.pm25_lcs, p.rh, p.temp]).collect();
            let d = Dataset::new(rows, y, BOOSTED_INPUTS.iter().map(|s| s.to_string()).collect())?;
            CalibrationModel::Boosted(fit_gbt(&d, gbt))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Uniformly random pairs, seeded.
    #[default]
    Random,
    /// Earliest pairs train, latest pairs test.
    Chronological,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMode::Random),
            "chronological" => Ok(SplitMode::Chronological),
            other => Err(Error::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

/// Split into (train, test) with `train_fraction` of pairs in train. Both
/// parts stay in time order.
pub fn split(set: &CoLocationSet, train_fraction: f64, mode: SplitMode, seed: u64) -> Result<(CoLocationSet, CoLocationSet)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let n = set.len();
    let n_train = ((n as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Empty(format!("{n} pairs cannot be split {train_fraction}/{}", 1.0 - train_fraction)));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Random {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (mut tr, mut te) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
    tr.sort_unstable();
    te.sort_unstable();
    let pick = |v: &[usize]| CoLocationSet {
        pairs: v.iter().map(|&i| set.pairs[i].clone()).collect(),
    };
    Ok((pick(&tr), pick(&te)))
}

/// Held-out metrics per model, plus the uncorrected sensor for reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub raw: MetricReport,
    pub rows: Vec<(CalibrationKind, MetricReport)>,
    pub n_train: usize,
    pub n_test: usize,
}

impl CalibrationReport {
    pub fn get(&self, kind: CalibrationKind) -> Option<&MetricReport> {
        self.rows.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# held-out evaluation: {} train pairs, {} test pairs\n", self.n_train, self.n_test);
        s.push_str(MetricReport::CSV_HEADER);
        s.push('\n');
        s.push_str(&self.raw.csv_row("raw"));
        s.push('\n');
        for (k, m) in &self.rows {
            s.push_str(&m.csv_row(&format!("{} {}", k.label(), k)));
            s.push('\n');
        }
        s
    }
}

/// Evaluate models on the test pairs, in `(a)`-`(d)` order.
pub fn evaluate(models: &[CalibrationModel], test: &CoLocationSet, n_train: usize) -> Result<CalibrationReport> {
    if test.is_empty() {
        return Err(Error::Empty("no test pairs".into()));
    }
    let y: Vec<f64> = test.pairs.iter().map(|p| p.reference).collect();
    let raw = MetricReport::compute(&PairedSeries::new(y.clone(), test.pairs.iter().map(|p| p.pm25_lcs).collect())?)?;
    let mut rows = Vec::with_capacity(models.len());
    for m in models {
        let yhat = test.pairs.iter().map(|p| m.predict(p.pm25_lcs, p.rh, p.temp)).collect();
        rows.push((m.kind(), MetricReport::compute(&PairedSeries::new(y.clone(), yhat)?)?));
    }
    rows.sort_by_key(|(k, _)| *k);
    Ok(CalibrationReport {
        raw,
        rows,
        n_train,
        n_test: test.len(),
    })
}

/// Settings for [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub interval: i64,
    pub train_fraction: f64,
    pub split: SplitMode,
    pub seed: u64,
    pub gbt: GbtParams,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            interval: COLOCATION_INTERVAL,
            train_fraction: 0.8,
            split: SplitMode::Random,
            seed: 0,
            gbt: GbtParams::default(),
        }
    }
}

/// Match, split once, fit all four kinds on the same training pairs (in
/// parallel) and evaluate on the same test pairs.
pub fn calibrate(
    mobile: &[MobileRecord],
    reference: &[FixedRecord],
    cfg: &CalibrationConfig,
) -> Result<(Vec<CalibrationModel>, CalibrationReport)> {
    let set = match_colocation(mobile, reference, cfg.interval)?;
    let (train, test) = split(&set, cfg.train_fraction, cfg.split, cfg.seed)?;
    let gbt = GbtParams { seed: cfg.seed, ..cfg.gbt.clone() };
    let models: Vec<CalibrationModel> = {
        use rayon::prelude::*;
        CalibrationKind::ALL
            .par_iter()
            .map(|k| fit(*k, &train, &gbt))
            .collect::<Result<_>>()?
    };
    let report = evaluate(&models, &test, train.len())?;
    Ok((models, report))
}

/// Per-interval averages of each device and of the reference, restricted to
/// intervals where every series has a value. Returns names and aligned
/// series; the reference comes last under `reference_name`.
pub fn device_series(
    mobile: &[MobileRecord],
    reference: &[FixedRecord],
    reference_name: &str,
    interval: i64,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut per: BTreeMap<&str, BTreeMap<i64, StatSummary>> = BTreeMap::new();
    for r in mobile {
        per.entry(r.device_id.as_str())
            .or_default()
            .entry(TimeKey::of(r.t, interval).start)
            .or_default()
            .push(r.pm25_raw);
    }
    let mut refs: BTreeMap<i64, StatSummary> = BTreeMap::new();
    for r in reference {
        refs.entry(TimeKey::of(r.t, interval).start).or_default().push(r.pm25);
    }
    let mut names: Vec<String> = per.keys().map(|s| s.to_string()).collect();
    let mut all: Vec<&BTreeMap<i64, StatSummary>> = per.values().collect();
    if !reference.is_empty() {
        names.push(reference_name.to_string());
        all.push(&refs);
    }
    let common: Vec<i64> = match all.first() {
        Some(first) => first.keys().copied().filter(|t| all.iter().all(|m| m.contains_key(t))).collect(),
        None => Vec::new(),
    };
    let series = all
        .iter()
        .map(|m| common.iter().map(|t| m[t].mean().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok((names, series))
}

/// Symmetric matrix of pairwise Pearson r with unit diagonal.
pub fn cross_device_correlation(series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("cross-device correlation needs at least 2 series".into()));
    }
    let n = series.len();
    let mut m = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = pearson_r(&PairedSeries::new(series[i].clone(), series[j].clone())?)?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    // A constant series has no defined correlation even with itself.
    for (i, s) in series.iter().enumerate() {
        pearson_r(&PairedSeries::new(s.clone(), s.clone())?)?;
        m[i][i] = 1.0;
    }
    Ok(m)
}

/// Matrix CSV with a header row of names.
pub fn correlation_csv(names: &[String], m: &[Vec<f64>]) -> String {
    let mut s = String::from("device");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (n, row) in names.iter().zip(m) {
        s.push_str(n);
        for v in row {
            s.push_str(&format!(",{v:.6}"));
        }
        s.push('\n');
    }
    s
}
