//! (cell, interval) aggregation of mobile and fixed streams and the
//! spatial/temporal resolution sweep.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::geo::{CellKey, GridSpec, ProjectedPoint, StationCell};
use crate::ingest::FixedRecord;
use crate::metrics::{pearson_r, PairedSeries};
use crate::numeric::CompensatedSum;

/// A floor-aligned time interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeKey {
    pub start: i64,
    pub len: i64,
}

impl TimeKey {
    /// Interval of length `len` containing `t`; `t = k·len` starts a new one.
    #[inline]
    pub fn of(t: i64, len: i64) -> TimeKey {
        TimeKey {
            start: t.div_euclid(len) * len,
            len,
        }
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.start + self.len
    }

    pub fn end(&self) -> i64 {
        self.start + self.len
    }
}

/// Mergeable count/sum/min/max summary.
#[derive(Debug, Clone, Copy)]
pub struct StatSummary {
    pub n: u64,
    sum: CompensatedSum,
    pub min: f64,
    pub max: f64,
}

impl Default for StatSummary {
    fn default() -> Self {
        StatSummary {
            n: 0,
            sum: CompensatedSum::new(),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl StatSummary {
    pub fn of(values: &[f64]) -> StatSummary {
        let mut s = StatSummary::default();
        for v in values {
            s.push(*v);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum.add(v);
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    pub fn merge(&mut self, other: &StatSummary) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    /// Mean, clamped into `[min, max]` against rounding; `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.sum.value() / self.n as f64).clamp(self.min, self.max))
    }
}

/// Identity of an aggregation cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellId {
    Station(String),
    Grid(CellKey),
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellId::Station(s) => f.write_str(s),
            CellId::Grid(k) => write!(f, "{}:{}", k.col, k.row),
        }
    }
}

/// Mobile statistics for one (cell, interval), plus the fixed value when a
/// station reported in that interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSample {
    pub cell: CellId,
    pub time: TimeKey,
    pub n_mobile: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub fixed_value: Option<f64>,
}

/// A calibrated mobile reading at a projected position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t: i64,
    pub pos: ProjectedPoint,
    pub value: f64,
}

/// The cells mobile readings are bucketed into.
#[derive(Debug, Clone, PartialEq)]
pub enum Cells {
    /// Station-centered squares; a reading inside several overlapping squares
    /// counts toward each of them.
    Stations(Vec<StationCell>),
    Grid(GridSpec),
}

impl Cells {
    fn id(&self, index: u32) -> CellId {
        match self {
            Cells::Stations(s) => CellId::Station(s[index as usize].station_id.clone()),
            Cells::Grid(g) => CellId::Grid(g.key_at(index as usize)),
        }
    }
}

/// Single-pass streaming aggregator keyed by (cell, interval).
#[derive(Debug, Clone)]
pub struct Aggregator {
    cells: Cells,
    interval: i64,
    buckets: HashMap<(u32, i64), StatSummary>,
}

impl Aggregator {
    pub fn new(cells: Cells, interval: i64) -> Result<Self> {
        if interval <= 0 {
            return Err(Error::Config(format!("aggregation interval must be positive, got {interval}")));
        }
        Ok(Aggregator {
            cells,
            interval,
            buckets: HashMap::new(),
        })
    }

    pub fn interval(&self) -> i64 {
        self.interval
    }

    pub fn n_buckets(&self) -> usize {
        self.buckets.len()
    }

    #[inline]
    pub fn push(&mut self, obs: Observation) {
        let slot = obs.t.div_euclid(self.interval);
        match &self.cells {
            Cells::Grid(g) => {
                if let Some(k) = g.cell_of(obs.pos) {
                    let idx = g.index(k) as u32;
                    self.buckets.entry((idx, slot)).or_default().push(obs.value);
                }
            }
            Cells::Stations(stations) => {
                for (i, s) in stations.iter().enumerate() {
                    if s.contains(obs.pos) {
                        self.buckets.entry((i as u32, slot)).or_default().push(obs.value);
                    }
                }
            }
        }
    }

    /// Fold another aggregator over the same cells and interval into this one.
    pub fn merge(&mut self, other: Aggregator) -> Result<()> {
        if other.cells != self.cells || other.interval != self.interval {
            return Err(Error::InvalidInput("cannot merge aggregators over different cells".into()));
        }
        for (k, s) in other.buckets {
            self.buckets.entry(k).or_default().merge(&s);
        }
        Ok(())
    }

    /// Re-bucket onto a coarser interval that is a whole multiple of this one.
    pub fn coarsen(&self, interval: i64) -> Result<Aggregator> {
        if interval <= 0 || interval % self.interval != 0 {
            return Err(Error::Config(format!(
                "interval {interval} is not a multiple of {}",
                self.interval
            )));
        }
        let mut buckets: HashMap<(u32, i64), StatSummary> = HashMap::new();
        for (&(c, slot), s) in &self.buckets {
            let t = slot * self.interval;
            buckets.entry((c, t.div_euclid(interval))).or_default().merge(s);
        }
        Ok(Aggregator {
            cells: self.cells.clone(),
            interval,
            buckets,
        })
    }

    /// Samples sorted by (cell, interval start).
    pub fn finish(&self) -> Vec<CellSample> {
        let mut keys: Vec<&(u32, i64)> = self.buckets.keys().collect();
        keys.sort_unstable();
        let mut out: Vec<CellSample> = keys
            .into_iter()
            .map(|k| {
                let s = &self.buckets[k];
                CellSample {
                    cell: self.cells.id(k.0),
                    time: TimeKey {
                        start: k.1 * self.interval,
                        len: self.interval,
                    },
                    n_mobile: s.n,
                    mean: s.mean().unwrap_or(f64::NAN),
                    min: s.min,
                    max: s.max,
                    fixed_value: None,
                }
            })
            .collect();
        out.sort_by(|a, b| a.cell.cmp(&b.cell).then(a.time.cmp(&b.time)));
        out
    }
}

/// Bucket observations by (cell, floor(t / interval)).
pub fn aggregate(observations: &[Observation], cells: &Cells, interval: i64) -> Result<Vec<CellSample>> {
    let mut agg = Aggregator::new(cells.clone(), interval)?;
    for o in observations {
        agg.push(*o);
    }
    Ok(agg.finish())
}

/// Mean fixed value per (station, interval start).
pub fn fixed_means(fixed: &[FixedRecord], interval: i64) -> BTreeMap<(String, i64), f64> {
    let mut acc: BTreeMap<(String, i64), StatSummary> = BTreeMap::new();
    for r in fixed {
        acc.entry((r.station_id.clone(), TimeKey::of(r.t, interval).start))
            .or_default()
            .push(r.pm25);
    }
    acc.into_iter().filter_map(|(k, s)| s.mean().map(|m| (k, m))).collect()
}

/// Attach interval-averaged fixed values to station-cell samples. Grid-cell
/// samples and station intervals without a fixed report keep `None`.
pub fn join_fixed(samples: Vec<CellSample>, fixed: &[FixedRecord], interval: i64) -> Vec<CellSample> {
    let means = fixed_means(fixed, interval);
    samples
        .into_iter()
        .map(|mut s| {
            if let CellId::Station(id) = &s.cell {
                s.fixed_value = means.get(&(id.clone(), s.time.start)).copied();
            }
            s
        })
        .collect()
}

/// Sweep grid and selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Station square side lengths, metres.
    pub distances: Vec<f64>,
    /// Interval lengths, seconds.
    pub intervals: Vec<i64>,
    /// Choose the finest point whose r is within this margin of the best.
    pub tolerance: f64,
    pub min_pairs: usize,
    pub min_stations: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            distances: vec![500.0, 1000.0, 2000.0],
            intervals: vec![300, 600, 1800, 3600],
            tolerance: 0.02,
            min_pairs: 10,
            min_stations: 2,
        }
    }
}

/// One evaluated (distance, interval) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n_pairs: usize,
    pub n_stations: usize,
    /// `None` when the point is invalid (too few pairs or stations, or r undefined).
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub distances: Vec<f64>,
    pub intervals: Vec<i64>,
    /// `points[d][i]` for `distances[d]`, `intervals[i]`.
    pub points: Vec<Vec<SweepPoint>>,
    pub chosen: (f64, i64),
}

fn interval_label(s: i64) -> String {
    if s % 60 == 0 {
        format!("{}min", s / 60)
    } else {
        format!("{s}s")
    }
}

impl SweepResult {
    pub fn r(&self, d: usize, i: usize) -> Option<f64> {
        self.points[d][i].r
    }

    /// Rows are distances, columns intervals; invalid points are `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# pearson r of mean mobile vs fixed per station square; overlapping squares share readings\n");
        s.push_str("distance_m");
        for i in &self.intervals {
            s.push_str(&format!(",{}", interval_label(*i)));
        }
        s.push('\n');
        for (d, row) in self.distances.iter().zip(&self.points) {
            s.push_str(&format!("{d}"));
            for p in row {
                match p.r {
                    Some(r) => s.push_str(&format!(",{r:.6}")),
                    None => s.push_str(",NA"),
                }
            }
            s.push('\n');
        }
        s.push_str(&format!("chosen,{},{}\n", self.chosen.0, self.chosen.1));
        s
    }

    /// Same layout as [`to_csv`](Self::to_csv) with pair counts.
    pub fn counts_csv(&self) -> String {
        let mut s = String::from("distance_m");
        for i in &self.intervals {
            s.push_str(&format!(",{}", interval_label(*i)));
        }
        s.push('\n');
        for (d, row) in self.distances.iter().zip(&self.points) {
            s.push_str(&format!("{d}"));
            for p in row {
                s.push_str(&format!(",{}", p.n_pairs));
            }
            s.push('\n');
        }
        s
    }

    /// Read the `chosen,<distance_m>,<interval_s>` line of a sweep CSV.
    pub fn parse_chosen(text: &str) -> Result<(f64, i64)> {
        let line = text
            .lines()
            .find(|l| l.starts_with("chosen,"))
            .ok_or_else(|| Error::InvalidInput("sweep file has no `chosen` line".into()))?;
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidInput(format!("malformed chosen line `{line}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let d: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let i: i64 = parts[2].trim().parse().map_err(|_| bad())?;
        Ok((d, i))
    }
}

/// (mean mobile, fixed) pairs for one sweep point, in sample order.
pub fn sweep_pairs(samples: &[CellSample]) -> Vec<(f64, f64)> {
    samples
        .iter()
        .filter_map(|s| s.fixed_value.map(|f| (s.mean, f)))
        .collect()
}

fn evaluate_point(samples: &[CellSample], cfg: &SweepConfig) -> SweepPoint {
    let pairs = sweep_pairs(samples);
    let stations: BTreeSet<&CellId> = samples.iter().filter(|s| s.fixed_value.is_some()).map(|s| &s.cell).collect();
    let r = if pairs.len() < cfg.min_pairs.max(2) || stations.len() < cfg.min_stations {
        None
    } else {
        PairedSeries::from_pairs(&pairs)
            .and_then(|p| pearson_r(&p))
            .ok()
    };
    SweepPoint {
        n_pairs: pairs.len(),
        n_stations: stations.len(),
        r,
    }
}

/// Finest valid point (smallest distance, then smallest interval) whose r is
/// within `tolerance` of the best valid r.
pub fn select(distances: &[f64], intervals: &[i64], points: &[Vec<SweepPoint>], tolerance: f64) -> Result<(f64, i64)> {
    let best = points
        .iter()
        .flatten()
        .filter_map(|p| p.r)
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::UndefinedStatistic("no valid resolution sweep point".into()));
    }
    let mut order: Vec<(usize, usize)> = (0..distances.len())
        .flat_map(|d| (0..intervals.len()).map(move |i| (d, i)))
        .collect();
    order.sort_by(|a, b| {
        distances[a.0]
            .total_cmp(&distances[b.0])
            .then(intervals[a.1].cmp(&intervals[b.1]))
    });
    order
        .into_iter()
        .find(|&(d, i)| points[d][i].r.is_some_and(|r| r >= best - tolerance))
        .map(|(d, i)| (distances[d], intervals[i]))
        .ok_or_else(|| Error::UndefinedStatistic("no sweep point within tolerance".into()))
}

/// Aggregate at every (distance, interval) point, join fixed values, and
/// correlate. `stations` gives each station's projected position.
pub fn resolution_sweep(
    observations: &[Observation],
    fixed: &[FixedRecord],
    stations: &[(String, ProjectedPoint)],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.distances.is_empty() || cfg.intervals.is_empty() {
        return Err(Error::Config("sweep needs at least one distance and one interval".into()));
    }
    if let Some(d) = cfg.distances.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
        return Err(Error::Config(format!("sweep distance {d} must be positive")));
    }
    if let Some(i) = cfg.intervals.iter().find(|i| **i <= 0) {
        return Err(Error::Config(format!("sweep interval {i} must be positive")));
    }
    let finest = *cfg.intervals.iter().min().unwrap_or(&300);
    let nested = cfg.intervals.iter().all(|i| i % finest == 0);
    let mut points = Vec::with_capacity(cfg.distances.len());
    for &distance in &cfg.distances {
        let cells = Cells::Stations(
            stations
                .iter()
                .map(|(id, p)| StationCell::new(id.clone(), *p, distance))
                .collect(),
        );
        let mut base = Aggregator::new(cells.clone(), finest)?;
        for o in observations {
            base.push(*o);
        }
        let mut row = Vec::with_capacity(cfg.intervals.len());
        for &interval in &cfg.intervals {
            let agg = if interval == finest {
                base.clone()
            } else if nested {
                base.coarsen(interval)?
            } else {
                let mut a = Aggregator::new(cells.clone(), interval)?;
                for o in observations {
                    a.push(*o);
                }
                a
            };
            let samples = join_fixed(agg.finish(), fixed, interval);
            row.push(evaluate_point(&samples, cfg));
        }
        points.push(row);
    }
    let chosen = select(&cfg.distances, &cfg.intervals, &points, cfg.tolerance)?;
    Ok(SweepResult {
        distances: cfg.distances.clone(),
        intervals: cfg.intervals.clone(),
        points,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(t: i64, x: f64, y: f64, v: f64) -> Observation {
        Observation {
            t,
            pos: ProjectedPoint::new(x, y),
            value: v,
        }
    }

    fn station_cells() -> Cells {
        Cells::Stations(vec![
            StationCell::new("A", ProjectedPoint::new(0.0, 0.0), 500.0),
            StationCell::new("B", ProjectedPoint::new(300.0, 0.0), 500.0),
        ])
    }

    #[test]
    fn bucket_statistics() {
        let o = [obs(10, 0.0, 0.0, 3.0), obs(20, 1.0, 0.0, 5.0), obs(299, 2.0, 0.0, 10.0)];
        let cells = Cells::Stations(vec![StationCell::new("A", ProjectedPoint::new(0.0, 0.0), 500.0)]);
        let s = aggregate(&o, &cells, 300).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].n_mobile, s[0].mean, s[0].min, s[0].max), (3, 6.0, 3.0, 10.0));
    }

    #[test]
    fn overlapping_squares_both_receive_reading() {
        let s = aggregate(&[obs(0, 150.0, 0.0, 42.0)], &station_cells(), 300).unwrap();
        let ids: Vec<String> = s.iter().map(|c| c.cell.to_string()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert!(s.iter().all(|c| c.mean == 42.0));
    }

    #[test]
    fn interval_boundary_floor() {
        assert_eq!(TimeKey::of(600, 300).start, 600);
        assert_eq!(TimeKey::of(599, 300).start, 300);
        assert_eq!(TimeKey::of(-1, 300).start, -300);
    }

    #[test]
    fn join_fixed_hand_fixture() {
        // Fixed A: 40 and 50 in [0,300), 70 in [300,600); B: 20 in [0,300).
        let fixed = vec![
            FixedRecord { station_id: "A".into(), t: 0, pm25: 40.0 },
            FixedRecord { station_id: "A".into(), t: 120, pm25: 50.0 },
            FixedRecord { station_id: "A".into(), t: 300, pm25: 70.0 },
            FixedRecord { station_id: "B".into(), t: 60, pm25: 20.0 },
        ];
        let o = [obs(5, -100.0, 0.0, 60.0), obs(400, -100.0, 0.0, 80.0), obs(900, 400.0, 0.0, 10.0)];
        let s = join_fixed(aggregate(&o, &station_cells(), 300).unwrap(), &fixed, 300);
        let got: Vec<(String, i64, Option<f64>)> = s.iter().map(|c| (c.cell.to_string(), c.time.start, c.fixed_value)).collect();
        assert_eq!(
            got,
            vec![
                ("A".into(), 0, Some(45.0)),
                ("A".into(), 300, Some(70.0)),
                ("B".into(), 900, None),
            ]
        );
        assert_eq!(sweep_pairs(&s), vec![(60.0, 45.0), (80.0, 70.0)]);
    }

    #[test]
    fn grid_cells_are_addressed_by_key() {
        let g = GridSpec::new(ProjectedPoint::new(0.0, 0.0), 100.0, 3, 2).unwrap();
        let s = aggregate(&[obs(0, 250.0, 150.0, 5.0), obs(0, 1000.0, 0.0, 9.0)], &Cells::Grid(g), 60).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].cell, CellId::Grid(CellKey::new(2, 1)));
    }

    #[test]
    fn selection_prefers_finest_within_tolerance() {
        let p = |r: Option<f64>| SweepPoint { n_pairs: 20, n_stations: 3, r };
        let points = vec![
            vec![p(Some(0.80)), p(Some(0.83))],
            vec![p(Some(0.84)), p(None)],
        ];
        assert_eq!(select(&[500.0, 1000.0], &[300, 600], &points, 0.02).unwrap(), (500.0, 600));
        assert_eq!(select(&[500.0, 1000.0], &[300, 600], &points, 0.05).unwrap(), (500.0, 300));
        let none = vec![vec![p(None)]];
        assert!(matches!(select(&[500.0], &[300], &none, 0.02), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn constant_stations_give_selection_error() {
        let stations = vec![("A".to_string(), ProjectedPoint::new(0.0, 0.0)), ("B".to_string(), ProjectedPoint::new(5000.0, 0.0))];
        let mut fixed = Vec::new();
        let mut o = Vec::new();
        for k in 0..48 {
            let t = k * 300;
            for (id, p) in &stations {
                fixed.push(FixedRecord { station_id: id.clone(), t, pm25: 30.0 });
                o.push(obs(t + 5, p.x, p.y, 20.0 + k as f64));
            }
        }
        let err = resolution_sweep(&o, &fixed, &stations, &SweepConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UndefinedStatistic(_)));
    }

    #[test]
    fn sweep_csv_layout() {
        let p = |r| SweepPoint { n_pairs: 20, n_stations: 3, r };
        let res = SweepResult {
            distances: vec![500.0, 1000.0, 2000.0],
            intervals: vec![300, 600, 1800, 3600],
            points: vec![vec![p(Some(0.5)); 4], vec![p(None); 4], vec![p(Some(0.25)); 4]],
            chosen: (500.0, 300),
        };
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], "distance_m,5min,10min,30min,60min");
        assert_eq!(lines[1], "500,0.500000,0.500000,0.500000,0.500000");
        assert_eq!(lines[2], "1000,NA,NA,NA,NA");
        assert_eq!(lines.len(), 5);
        assert_eq!(SweepResult::parse_chosen(&csv).unwrap(), (500.0, 300));
    }

    fn arb_obs() -> impl Strategy<Value = Vec<Observation>> {
        proptest::collection::vec((0i64..7200, -400.0f64..700.0, -300.0f64..300.0, 0.0f64..200.0), 0..80)
            .prop_map(|v| v.into_iter().map(|(t, x, y, val)| obs(t, x, y, val)).collect())
    }

    fn close(a: &[CellSample], b: &[CellSample]) -> bool {
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.cell == y.cell
                    && x.time == y.time
                    && x.n_mobile == y.n_mobile
                    && x.min == y.min
                    && x.max == y.max
                    && (x.mean - y.mean).abs() <= 1e-9 * x.mean.abs().max(1.0)
            })
    }

    proptest! {
        #[test]
        fn permutation_invariant(o in arb_obs(), seed in any::<u64>()) {
            let mut shuffled = o.clone();
            let n = shuffled.len();
            for i in (1..n).rev() {
                let j = (crate::numeric::mix64(seed ^ i as u64) % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            let a = aggregate(&o, &station_cells(), 300).unwrap();
            let b = aggregate(&shuffled, &station_cells(), 300).unwrap();
            prop_assert!(close(&a, &b));
        }

        #[test]
        fn merge_equals_union(o in arb_obs(), cut in 0usize..80) {
            let cut = cut.min(o.len());
            let mut left = Aggregator::new(station_cells(), 600).unwrap();
            let mut right = Aggregator::new(station_cells(), 600).unwrap();
            for x in &o[..cut] { left.push(*x); }
            for x in &o[cut..] { right.push(*x); }
            left.merge(right).unwrap();
            prop_assert!(close(&left.finish(), &aggregate(&o, &station_cells(), 600).unwrap()));
        }

        #[test]
        fn coarsen_equals_direct(o in arb_obs()) {
            let mut fine = Aggregator::new(station_cells(), 300).unwrap();
            for x in &o { fine.push(*x); }
            for len in [600, 1800, 3600] {
                prop_assert!(close(&fine.coarsen(len).unwrap().finish(), &aggregate(&o, &station_cells(), len).unwrap()));
            }
        }

        #[test]
        fn bucket_count_non_increasing_in_interval(ts in proptest::collection::vec(0i64..86_400, 0..100)) {
            let fixed: Vec<FixedRecord> = ts.iter().map(|t| FixedRecord { station_id: "S".into(), t: *t, pm25: 1.0 }).collect();
            let counts: Vec<usize> = [300, 600, 1800, 3600].iter().map(|i| fixed_means(&fixed, *i).len()).collect();
            prop_assert!(counts.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
