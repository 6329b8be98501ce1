//! Interpolated map products and per-map statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::align::TimeKey;
use crate::clamp_pm25;
use crate::error::{Error, Result};
use crate::geo::{CellKey, GridSpec, ProjectedPoint};
use crate::metrics::{adjacent_variation, morans_i_grid, AdjacentVariation, SpatialWeights};
use crate::numeric::{mean, population_std};
use crate::timefmt::format_basic;

/// Sources closer than this to a target are copied exactly, metres.
pub const SINGULARITY_GUARD_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MapSource {
    Fixed,
    Mobile,
    Mapped,
}

impl MapSource {
    pub const ALL: [MapSource; 3] = [MapSource::Fixed, MapSource::Mobile, MapSource::Mapped];

    pub fn as_str(&self) -> &'static str {
        match self {
            MapSource::Fixed => "fixed",
            MapSource::Mobile => "mobile",
            MapSource::Mapped => "mapped",
        }
    }
}

impl fmt::Display for MapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MapSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapSource::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown map source `{s}`")))
    }
}

/// A gridded concentration map for one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PollutionMap {
    pub grid: GridSpec,
    pub time: TimeKey,
    pub source: MapSource,
    /// Interpolated value per cell, row-major from the south-west corner.
    pub values: Vec<Option<f64>>,
    /// Values that entered interpolation, located at their cells.
    pub observed: Vec<Option<f64>>,
}

impl PollutionMap {
    pub fn value(&self, key: CellKey) -> Option<f64> {
        self.values[self.grid.index(key)]
    }

    /// Fraction of cells holding an observation before interpolation.
    pub fn coverage(&self) -> f64 {
        self.observed.iter().filter(|v| v.is_some()).count() as f64 / self.observed.len() as f64
    }

    fn present(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn mean(&self) -> Option<f64> {
        mean(&self.present())
    }

    pub fn std(&self) -> Option<f64> {
        population_std(&self.present())
    }

    /// `map_<source>_<start>_<interval_s>.csv`
    pub fn file_name(&self) -> String {
        format!("map_{}_{}_{}.csv", self.source, format_basic(self.time.start), self.time.len)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let e = |e| Error::io(self.file_name(), e);
        writeln!(w, "col,row,pm25").map_err(e)?;
        for (i, v) in self.values.iter().enumerate() {
            if let Some(v) = v {
                let k = self.grid.key_at(i);
                writeln!(w, "{},{},{v}", k.col, k.row).map_err(e)?;
            }
        }
        Ok(())
    }

    /// Read values written by [`write_csv`](Self::write_csv) onto `grid`.
    pub fn read_csv<R: BufRead>(input: R, name: &str, grid: GridSpec, time: TimeKey, source: MapSource) -> Result<PollutionMap> {
        let mut values = vec![None; grid.n_cells()];
        let perr = |line: u64, message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io(name, e))?;
            let ln = i as u64 + 1;
            if i == 0 {
                if line.trim() != "col,row,pm25" {
                    return Err(perr(ln, format!("unexpected header `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let c: Vec<&str> = line.split(',').collect();
            let parsed = (c.len() == 3)
                .then(|| Some((c[0].parse::<u32>().ok()?, c[1].parse::<u32>().ok()?, c[2].parse::<f64>().ok()?)))
                .flatten();
            let (col, row, v) = parsed.ok_or_else(|| perr(ln, format!("malformed row `{line}`")))?;
            let key = CellKey::new(col, row);
            if !grid.contains_key(key) {
                return Err(perr(ln, format!("cell {col},{row} outside the grid")));
            }
            values[grid.index(key)] = Some(v);
        }
        Ok(PollutionMap {
            grid,
            time,
            source,
            observed: vec![None; values.len()],
            values,
        })
    }

    /// One RGB pixel per cell with the south edge at the bottom of the image.
    /// Values map linearly from `[lo, hi]` onto the ramp of [`ramp`]; cells
    /// without a value are black.
    pub fn write_png<W: Write>(&self, w: W, lo: f64, hi: f64) -> Result<()> {
        let (nc, nr) = (self.grid.n_cols, self.grid.n_rows);
        let mut data = Vec::with_capacity((nc * nr * 3) as usize);
        for row in (0..nr).rev() {
            for col in 0..nc {
                let rgb = match self.value(CellKey::new(col, row)) {
                    Some(v) => ramp(if hi > lo { (v - lo) / (hi - lo) } else { 0.5 }),
                    None => [0, 0, 0],
                };
                data.extend_from_slice(&rgb);
            }
        }
        let mut enc = png::Encoder::new(w, nc, nr);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| Error::InvalidInput(format!("png encoding: {e}"));
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
        Ok(())
    }
}

/// Blue (0) through green (0.5) to red (1), piecewise linear; input clamped.
pub fn ramp(u: f64) -> [u8; 3] {
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
    let (r, g, b) = if u < 0.5 {
        let s = u / 0.5;
        (0.0, s, 1.0 - s)
    } else {
        let s = (u - 0.5) / 0.5;
        (s, 1.0 - s, 0.0)
    };
    [(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdwParams {
    pub power: f64,
    /// Restrict each target to its k nearest sources; all sources when `None`.
    pub k_nearest: Option<usize>,
}

impl Default for IdwParams {
    fn default() -> Self {
        IdwParams {
            power: 2.0,
            k_nearest: None,
        }
    }
}

/// IDW estimate at one target.
pub fn idw_value(points: &[(ProjectedPoint, f64)], target: ProjectedPoint, params: &IdwParams) -> f64 {
    let mut d: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, (p, _))| (p.distance(&target), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if let Some(k) = params.k_nearest {
        let k = k.max(1);
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
    }
    if let Some(&(_, i)) = d.iter().filter(|(dist, _)| *dist < SINGULARITY_GUARD_M).min_by(|a, b| cmp(a, b)) {
        return points[i].1;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(dist, i) in &d {
        let w = dist.powf(-params.power);
        num += w * points[i].1;
        den += w;
    }
    num / den
}

/// IDW at every cell center, in parallel over cells.
pub fn idw_grid(points: &[(ProjectedPoint, f64)], grid: &GridSpec, params: &IdwParams) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::Empty("interpolation needs at least one source point".into()));
    }
    if !(params.power >= 0.0) || !params.power.is_finite() {
        return Err(Error::Config(format!("IDW power {} must be nonnegative", params.power)));
    }
    Ok((0..grid.n_cells())
        .into_par_iter()
        .map(|i| clamp_pm25(idw_value(points, grid.cell_center(grid.key_at(i)), params)))
        .collect())
}

pub fn idw(points: &[(ProjectedPoint, f64)], grid: &GridSpec, time: TimeKey, source: MapSource, params: &IdwParams) -> Result<PollutionMap> {
    let values = idw_grid(points, grid, params)?;
    let mut observed = vec![None; grid.n_cells()];
    for (p, v) in points {
        if let Some(k) = grid.cell_of(*p) {
            observed[grid.index(k)] = Some(*v);
        }
    }
    Ok(PollutionMap {
        grid: *grid,
        time,
        source,
        values: values.into_iter().map(Some).collect(),
        observed,
    })
}

/// Inputs for one interval.
#[derive(Debug, Clone, Default)]
pub struct MapInputs {
    /// Station positions with their interval-mean fixed values.
    pub stations: Vec<(ProjectedPoint, f64)>,
    /// Mean mobile concentration per grid cell.
    pub mobile: Vec<(CellKey, f64)>,
    /// Mapped concentration per grid cell.
    pub mapped: Vec<(CellKey, f64)>,
}

/// Build one map product. Mobile and mapped cell values are placed at cell
/// centers; fixed values at station positions. For the mapped product a
/// fixed value replaces the mapped value of the cell its station lies in.
pub fn build_map(source: MapSource, inputs: &MapInputs, grid: &GridSpec, time: TimeKey, params: &IdwParams) -> Result<PollutionMap> {
    let at_center = |cells: &[(CellKey, f64)]| -> Vec<(ProjectedPoint, f64)> {
        let mut v: Vec<(CellKey, f64)> = cells.iter().filter(|(k, _)| grid.contains_key(*k)).copied().collect();
        v.sort_by_key(|(k, _)| *k);
        v.into_iter().map(|(k, x)| (grid.cell_center(k), x)).collect()
    };
    let points = match source {
        MapSource::Fixed => inputs.stations.clone(),
        MapSource::Mobile => at_center(&inputs.mobile),
        MapSource::Mapped => {
            let station_cells: Vec<CellKey> = inputs.stations.iter().filter_map(|(p, _)| grid.cell_of(*p)).collect();
            let mapped: Vec<(CellKey, f64)> = inputs
                .mapped
                .iter()
                .filter(|(k, _)| !station_cells.contains(k))
                .copied()
                .collect();
            let mut pts = inputs.stations.clone();
            pts.extend(at_center(&mapped));
            pts
        }
    };
    if points.is_empty() {
        return Err(Error::Empty(format!("no {source} inputs for interval starting {}", time.start)));
    }
    let mut map = idw(&points, grid, time, source, params)?;
    // Several stations in one cell: the cell observes their mean.
    let mut per_cell: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    for (p, v) in &points {
        if let Some(k) = grid.cell_of(*p) {
            let e = per_cell.entry(k).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    for (k, (s, n)) in per_cell {
        map.observed[grid.index(k)] = Some(s / n as f64);
    }
    Ok(map)
}

/// Statistics of one map slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStats {
    pub source: MapSource,
    pub interval_start: i64,
    pub mean: f64,
    pub std: f64,
    pub coverage: f64,
    /// Observed-cell value when coverage < 1, otherwise the interpolated one.
    pub morans_i: Option<f64>,
    pub morans_i_observed: Option<f64>,
    pub morans_i_interpolated: Option<f64>,
}

impl MapStats {
    pub const CSV_HEADER: &'static str =
        "source,interval_start,mean,std,coverage,morans_i,morans_i_observed,morans_i_interpolated";

    pub fn compute(map: &PollutionMap) -> Result<MapStats> {
        let (nc, nr) = (map.grid.n_cols as usize, map.grid.n_rows as usize);
        let w = SpatialWeights::RookRowStandardized;
        let observed = morans_i_grid(&map.observed, nc, nr, w).ok();
        let interpolated = morans_i_grid(&map.values, nc, nr, w).ok();
        let coverage = map.coverage();
        Ok(MapStats {
            source: map.source,
            interval_start: map.time.start,
            mean: map.mean().ok_or_else(|| Error::Empty("map has no values".into()))?,
            std: map.std().unwrap_or(0.0),
            coverage,
            morans_i: if coverage < 1.0 { observed } else { interpolated },
            morans_i_observed: observed,
            morans_i_interpolated: interpolated,
        })
    }

    pub fn csv_row(&self) -> String {
        let o = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        format!(
            "{},{},{:.6},{:.6},{:.6},{},{},{}",
            self.source,
            crate::timefmt::format_utc(self.interval_start),
            self.mean,
            self.std,
            self.coverage,
            o(self.morans_i),
            o(self.morans_i_observed),
            o(self.morans_i_interpolated)
        )
    }
}

/// Per-slice statistics plus the adjacent variation of the series. Slices
/// must share one source and grid and be in time order.
pub fn map_stats(maps: &[PollutionMap]) -> Result<(Vec<MapStats>, AdjacentVariation)> {
    if maps.is_empty() {
        return Err(Error::Empty("no maps".into()));
    }
    if maps.iter().any(|m| m.source != maps[0].source) {
        return Err(Error::InvalidInput("map series mixes sources".into()));
    }
    if maps.windows(2).any(|w| w[1].time.start <= w[0].time.start) {
        return Err(Error::InvalidInput("map series must be strictly time-ordered".into()));
    }
    let stats = maps.iter().map(MapStats::compute).collect::<Result<Vec<_>>>()?;
    let var = adjacent_variation(maps)?;
    Ok((stats, var))
}

/// `100·(mean_A − mean_B)/mean_B` over the interval starts both series share.
pub fn bias_percent(a: &[(i64, f64)], b: &[(i64, f64)]) -> Result<f64> {
    let bm: BTreeMap<i64, f64> = b.iter().copied().collect();
    let common: Vec<(f64, f64)> = a.iter().filter_map(|(t, va)| bm.get(t).map(|vb| (*va, *vb))).collect();
    if common.is_empty() {
        return Err(Error::Empty("series share no intervals".into()));
    }
    let ma = mean(&common.iter().map(|c| c.0).collect::<Vec<_>>()).unwrap_or(0.0);
    let mb = mean(&common.iter().map(|c| c.1).collect::<Vec<_>>()).unwrap_or(0.0);
    if mb == 0.0 {
        return Err(Error::UndefinedStatistic("reference series mean is zero".into()));
    }
    Ok(100.0 * (ma - mb) / mb)
}

/// Pairwise biases between per-source map-mean series.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasReport {
    pub mapped_vs_fixed: f64,
    pub mapped_vs_mobile: f64,
    pub mobile_vs_fixed: f64,
}

impl BiasReport {
    pub fn compute(fixed: &[(i64, f64)], mobile: &[(i64, f64)], mapped: &[(i64, f64)]) -> Result<BiasReport> {
        Ok(BiasReport {
            mapped_vs_fixed: bias_percent(mapped, fixed)?,
            mapped_vs_mobile: bias_percent(mapped, mobile)?,
            mobile_vs_fixed: bias_percent(mobile, fixed)?,
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "comparison,bias_percent\nmapped_vs_fixed,{:.6}\nmapped_vs_mobile,{:.6}\nmobile_vs_fixed,{:.6}\n",
            self.mapped_vs_fixed, self.mapped_vs_mobile, self.mobile_vs_fixed
        )
    }
}

/// Root-mean-square difference over cells where both maps have values.
pub fn map_rmse(a: &PollutionMap, b: &PollutionMap) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::InvalidInput("maps are on different grids".into()));
    }
    let d: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .filter_map(|(x, y)| Some((x.as_ref()? - y.as_ref()?).powi(2)))
        .collect();
    mean(&d).map(f64::sqrt).ok_or_else(|| Error::Empty("maps share no valued cells".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: u32) -> GridSpec {
        GridSpec::new(ProjectedPoint::new(0.0, 0.0), 100.0, n, n).unwrap()
    }

    fn tk() -> TimeKey {
        TimeKey { start: 1_677_661_200, len: 300 }
    }

    #[test]
    fn single_source_is_uniform() {
        let m = idw(&[(ProjectedPoint::new(37.0, 12.0), 42.0)], &grid(4), tk(), MapSource::Fixed, &IdwParams::default()).unwrap();
        assert!(m.values.iter().all(|v| *v == Some(42.0)));
        assert_eq!(m.coverage(), 1.0 / 16.0);
    }

    #[test]
    fn hand_weight_example() {
        let pts = [(ProjectedPoint::new(1.0, 0.0), 10.0), (ProjectedPoint::new(-2.0, 0.0), 40.0)];
        let v = idw_value(&pts, ProjectedPoint::new(0.0, 0.0), &IdwParams { power: 2.0, k_nearest: None });
        assert!((v - 16.0).abs() < 1e-12);
        // The 1 m source is inside the guard radius only when strictly needed.
        let guarded = idw_value(&[(ProjectedPoint::new(0.5, 0.0), 10.0), (ProjectedPoint::new(9.0, 0.0), 90.0)], ProjectedPoint::new(0.0, 0.0), &IdwParams::default());
        assert_eq!(guarded, 10.0);
    }

    #[test]
    fn k_nearest_limits_sources() {
        let pts = [
            (ProjectedPoint::new(10.0, 0.0), 10.0),
            (ProjectedPoint::new(20.0, 0.0), 20.0),
            (ProjectedPoint::new(1000.0, 0.0), 400.0),
        ];
        let all = idw_value(&pts, ProjectedPoint::new(0.0, 0.0), &IdwParams::default());
        let two = idw_value(&pts, ProjectedPoint::new(0.0, 0.0), &IdwParams { power: 2.0, k_nearest: Some(2) });
        assert!((two - (10.0 / 100.0 + 20.0 / 400.0) / (1.0 / 100.0 + 1.0 / 400.0)).abs() < 1e-12);
        assert!(all > two);
        assert!(idw_grid(&[], &grid(2), &IdwParams::default()).is_err());
    }

    #[test]
    fn mapped_precedence_and_baseline_identity() {
        let g = grid(4);
        let station = ProjectedPoint::new(150.0, 150.0);
        let inputs = MapInputs {
            stations: vec![(station, 50.0)],
            mobile: vec![(CellKey::new(1, 1), 55.0), (CellKey::new(3, 3), 20.0)],
            mapped: vec![(CellKey::new(1, 1), 55.0), (CellKey::new(3, 3), 20.0)],
        };
        let m = build_map(MapSource::Mapped, &inputs, &g, tk(), &IdwParams::default()).unwrap();
        assert_eq!(m.observed[g.index(CellKey::new(1, 1))], Some(50.0));
        assert_eq!(m.value(CellKey::new(1, 1)), Some(50.0));
        // No stations: the mapped product of the average baseline is the mobile map.
        let no_fixed = MapInputs { stations: vec![], ..inputs.clone() };
        let a = build_map(MapSource::Mapped, &no_fixed, &g, tk(), &IdwParams::default()).unwrap();
        let b = build_map(MapSource::Mobile, &no_fixed, &g, tk(), &IdwParams::default()).unwrap();
        assert_eq!(a.values, b.values);
        let f = build_map(MapSource::Fixed, &inputs, &g, tk(), &IdwParams::default()).unwrap();
        assert!(f.values.iter().all(|v| *v == Some(50.0)));
        assert!(build_map(MapSource::Fixed, &MapInputs::default(), &g, tk(), &IdwParams::default()).is_err());
    }

    #[test]
    fn csv_round_trip_and_name() {
        let pts = [(ProjectedPoint::new(10.0, 10.0), 12.345678901), (ProjectedPoint::new(390.0, 390.0), 80.1)];
        let m = idw(&pts, &grid(4), tk(), MapSource::Mobile, &IdwParams::default()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = PollutionMap::read_csv(buf.as_slice(), "x", m.grid, m.time, m.source).unwrap();
        assert_eq!(back.values, m.values);
        assert_eq!(m.file_name(), "map_mobile_20230301T090000Z_300.csv");
        let mut png = Vec::new();
        m.write_png(&mut png, 0.0, 100.0).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn stats_rules() {
        let g = grid(4);
        let constant = |t: i64| PollutionMap {
            grid: g,
            time: TimeKey { start: t, len: 300 },
            source: MapSource::Fixed,
            values: vec![Some(30.0); 16],
            observed: vec![Some(30.0); 16],
        };
        let (s, v) = map_stats(&[constant(0), constant(300)]).unwrap();
        assert_eq!((s[0].mean, s[0].std), (30.0, 0.0));
        assert_eq!((v.mean_percent, v.std_percent), (0.0, 0.0));
        // Checkerboard observed on 10 cells, interpolated smooth: partial
        // coverage selects the observed statistic.
        let mut m = constant(0);
        m.values = (0..16).map(|i| Some(10.0 + (i / 4) as f64)).collect();
        m.observed = (0..16).map(|i| if i < 10 { Some(if (i % 4 + i / 4) % 2 == 0 { 1.0 } else { 5.0 }) } else { None }).collect();
        let st = MapStats::compute(&m).unwrap();
        assert!(st.coverage < 1.0);
        assert_eq!(st.morans_i, st.morans_i_observed);
        assert!(st.morans_i_observed.unwrap() < 0.0);
        assert!(st.morans_i_interpolated.unwrap() > 0.0);
        m.observed = m.values.clone();
        let full = MapStats::compute(&m).unwrap();
        assert_eq!(full.morans_i, full.morans_i_interpolated);
    }

    #[test]
    fn bias_examples() {
        let f = vec![(0, 40.0), (300, 50.0)];
        assert_eq!(bias_percent(&f, &f).unwrap(), 0.0);
        let m: Vec<(i64, f64)> = f.iter().map(|(t, v)| (*t, v * 1.05)).collect();
        assert!((bias_percent(&m, &f).unwrap() - 5.0).abs() < 1e-9);
        assert!(bias_percent(&[(900, 1.0)], &f).is_err());
    }

    proptest! {
        #[test]
        fn idw_properties(
            pts in proptest::collection::vec((-500.0f64..500.0, -500.0f64..500.0, 0.0f64..500.0), 1..12),
            tx in -600.0f64..600.0, ty in -600.0f64..600.0, power in 0.5f64..4.0, pick in 0usize..12,
        ) {
            let pts: Vec<(ProjectedPoint, f64)> = pts.into_iter().map(|(x, y, v)| (ProjectedPoint::new(x, y), v)).collect();
            let params = IdwParams { power, k_nearest: None };
            let (lo, hi) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), (_, v)| (a.min(*v), b.max(*v)));
            let v = idw_value(&pts, ProjectedPoint::new(tx, ty), &params);
            prop_assert!(v >= lo - 1e-9 * hi.max(1.0) && v <= hi + 1e-9 * hi.max(1.0));
            let i = pick % pts.len();
            let at = idw_value(&pts, pts[i].0, &params);
            let dup = pts.iter().position(|(p, _)| p.distance(&pts[i].0) <= SINGULARITY_GUARD_M).unwrap();
            prop_assert_eq!(at, pts[dup].1);
        }

        #[test]
        fn equidistant_pair_symmetry(d in 2.0f64..1000.0, angle in 0.0f64..6.28, a in 0.0f64..500.0, b in 0.0f64..500.0, power in 0.5f64..4.0) {
            let (dx, dy) = (d * angle.cos(), d * angle.sin());
            let pts = [(ProjectedPoint::new(dx, dy), a), (ProjectedPoint::new(-dx, -dy), b)];
            let v = idw_value(&pts, ProjectedPoint::new(0.0, 0.0), &IdwParams { power, k_nearest: None });
            prop_assert!((v - (a + b) / 2.0).abs() <= 1e-9 * (a + b).max(1.0));
        }
    }
}
