//! CSV inputs, range QC, and urban-feature rasterization.
//!
//! Schemas:
//!
//! | file      | header                                        |
//! |-----------|-----------------------------------------------|
//! | fixed     | `station_id,timestamp,pm25`                   |
//! | mobile    | `device_id,timestamp,lat,lon,pm25,rh,temp`    |
//! | stations  | `station_id,lat,lon`                          |
//! | cell feat | `layer,col,row,value`                         |
//! | geometry  | `layer,kind,coords...` with `kind` in `rect`, `polyline` |
//!
//! Geometry coordinates are `lat,lon` pairs. A `rect` row carries the two
//! opposite corners `lat_min,lon_min,lat_max,lon_max`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{CellKey, GeoPoint, GridSpec, LocalProjection, ProjectedPoint};
use crate::{timefmt, PM25_MAX, PM25_MIN};

/// Relative humidity QC range, percent.
pub const RH_RANGE: (f64, f64) = (0.0, 100.0);
/// Sensor operating temperature range, °C.
pub const TEMP_RANGE: (f64, f64) = (-10.0, 60.0);

#[derive(Debug, Clone, PartialEq)]
pub struct FixedRecord {
    pub station_id: String,
    pub t: i64,
    pub pm25: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobileRecord {
    pub device_id: String,
    pub t: i64,
    pub pos: GeoPoint,
    pub pm25_raw: f64,
    pub rh: f64,
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationInfo {
    pub station_id: String,
    pub pos: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    Malformed,
    Timestamp,
    Coordinate,
    Pm25Range,
    HumidityRange,
    TemperatureRange,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::Malformed => "malformed",
            DropReason::Timestamp => "timestamp",
            DropReason::Coordinate => "coordinate",
            DropReason::Pm25Range => "pm25_range",
            DropReason::HumidityRange => "rh_range",
            DropReason::TemperatureRange => "temp_range",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Malformed rows are counted and skipped.
    #[default]
    Lenient,
    /// The first malformed row aborts the load.
    Strict,
}

/// Per-file ingest accounting. `rows_parsed == rows_kept + rows_dropped`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    pub file: String,
    pub rows_parsed: u64,
    pub rows_kept: u64,
    pub rows_dropped: u64,
    pub drops: BTreeMap<DropReason, u64>,
}

impl IngestReport {
    pub fn new(file: impl Into<String>) -> Self {
        IngestReport {
            file: file.into(),
            ..Default::default()
        }
    }

    fn keep(&mut self) {
        self.rows_parsed += 1;
        self.rows_kept += 1;
    }

    fn drop_row(&mut self, reason: DropReason) {
        self.rows_parsed += 1;
        self.rows_dropped += 1;
        *self.drops.entry(reason).or_default() += 1;
    }

    pub fn dropped_for(&self, reason: DropReason) -> u64 {
        self.drops.get(&reason).copied().unwrap_or(0)
    }

    pub const CSV_HEADER: &'static str = "file,rows_parsed,rows_kept,rows_dropped,drop_reason_counts";

    /// `drop_reason_counts` is `reason=count` pairs joined by `;`.
    pub fn csv_row(&self) -> String {
        let reasons: Vec<String> = self.drops.iter().map(|(r, n)| format!("{r}={n}")).collect();
        format!(
            "{},{},{},{},{}",
            self.file,
            self.rows_parsed,
            self.rows_kept,
            self.rows_dropped,
            reasons.join(";")
        )
    }
}

pub fn qc_fixed(rec: &FixedRecord) -> Result<(), DropReason> {
    if rec.t <= 0 {
        return Err(DropReason::Timestamp);
    }
    if !(PM25_MIN..=PM25_MAX).contains(&rec.pm25) {
        return Err(DropReason::Pm25Range);
    }
    Ok(())
}

pub fn qc_mobile(rec: &MobileRecord) -> Result<(), DropReason> {
    if rec.t <= 0 {
        return Err(DropReason::Timestamp);
    }
    if rec.pos.validate().is_err() {
        return Err(DropReason::Coordinate);
    }
    if !(PM25_MIN..=PM25_MAX).contains(&rec.pm25_raw) {
        return Err(DropReason::Pm25Range);
    }
    if !(RH_RANGE.0..=RH_RANGE.1).contains(&rec.rh) {
        return Err(DropReason::HumidityRange);
    }
    if !(TEMP_RANGE.0..=TEMP_RANGE.1).contains(&rec.temp) {
        return Err(DropReason::TemperatureRange);
    }
    Ok(())
}

/// Keep only records passing [`qc_fixed`].
pub fn filter_fixed(records: Vec<FixedRecord>) -> Vec<FixedRecord> {
    records.into_iter().filter(|r| qc_fixed(r).is_ok()).collect()
}

/// Keep only records passing [`qc_mobile`].
pub fn filter_mobile(records: Vec<MobileRecord>) -> Vec<MobileRecord> {
    records.into_iter().filter(|r| qc_mobile(r).is_ok()).collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(|f| BufReader::with_capacity(1 << 20, f))
        .map_err(|e| Error::io(path, e))
}

fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Column indexes resolved from a header by name.
struct Columns(Vec<usize>);

impl Columns {
    fn resolve(name: &str, header: &csv::StringRecord, wanted: &[&str]) -> Result<Columns> {
        let mut idx = Vec::with_capacity(wanted.len());
        for w in wanted {
            match header.iter().position(|h| h.trim() == *w) {
                Some(i) => idx.push(i),
                None => {
                    return Err(Error::Parse {
                        path: name.to_string(),
                        line: 1,
                        message: format!("missing column `{w}` (expected {})", wanted.join(",")),
                    })
                }
            }
        }
        Ok(Columns(idx))
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, i: usize) -> Option<&'r str> {
        rec.get(self.0[i]).map(str::trim)
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .buffer_capacity(1 << 20)
        .from_reader(reader)
}

fn num(s: Option<&str>) -> Option<f64> {
    s.and_then(|v| v.parse::<f64>().ok()).filter(|v| v.is_finite())
}

/// Outcome of decoding one row before QC.
enum Row<T> {
    Ok(T),
    Malformed(String),
    Dropped(DropReason),
}

fn drive<R: Read, T>(
    reader: R,
    name: &str,
    mode: ParseMode,
    wanted: &[&str],
    decode: impl Fn(&Columns, &csv::StringRecord) -> Row<T>,
    mut sink: impl FnMut(T),
) -> Result<IngestReport> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::resolve(name, &header, wanted)?;
    let mut report = IngestReport::new(name);
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => match decode(&cols, &rec) {
                Row::Ok(v) => {
                    report.keep();
                    sink(v);
                }
                Row::Dropped(reason) => report.drop_row(reason),
                Row::Malformed(msg) => {
                    if mode == ParseMode::Strict {
                        return Err(Error::Parse {
                            path: name.to_string(),
                            line: rec.position().map_or(0, |p| p.line()),
                            message: msg,
                        });
                    }
                    report.drop_row(DropReason::Malformed);
                }
            },
            Err(e) => {
                if mode == ParseMode::Strict {
                    return Err(e.into());
                }
                report.drop_row(DropReason::Malformed);
            }
        }
    }
    Ok(report)
}

fn decode_fixed(c: &Columns, rec: &csv::StringRecord) -> Row<FixedRecord> {
    let (Some(id), Some(ts)) = (c.get(rec, 0), c.get(rec, 1)) else {
        return Row::Malformed("short row".into());
    };
    let Ok(t) = timefmt::parse_utc(ts) else {
        return Row::Malformed(format!("bad timestamp {ts:?}"));
    };
    let Some(pm25) = num(c.get(rec, 2)) else {
        return Row::Malformed("bad pm25".into());
    };
    if id.is_empty() {
        return Row::Malformed("empty station_id".into());
    }
    let r = FixedRecord {
        station_id: id.to_string(),
        t,
        pm25,
    };
    match qc_fixed(&r) {
        Ok(()) => Row::Ok(r),
        Err(reason) => Row::Dropped(reason),
    }
}

fn decode_mobile(c: &Columns, rec: &csv::StringRecord) -> Row<MobileRecord> {
    let (Some(id), Some(ts)) = (c.get(rec, 0), c.get(rec, 1)) else {
        return Row::Malformed("short row".into());
    };
    let Ok(t) = timefmt::parse_utc(ts) else {
        return Row::Malformed(format!("bad timestamp {ts:?}"));
    };
    let vals: Option<Vec<f64>> = (2..7).map(|i| num(c.get(rec, i))).collect();
    let Some(v) = vals else {
        return Row::Malformed("bad numeric field".into());
    };
    if id.is_empty() {
        return Row::Malformed("empty device_id".into());
    }
    let r = MobileRecord {
        device_id: id.to_string(),
        t,
        pos: GeoPoint { lat: v[0], lon: v[1] },
        pm25_raw: v[2],
        rh: v[3],
        temp: v[4],
    };
    match qc_mobile(&r) {
        Ok(()) => Row::Ok(r),
        Err(reason) => Row::Dropped(reason),
    }
}

const FIXED_COLUMNS: [&str; 3] = ["station_id", "timestamp", "pm25"];
const MOBILE_COLUMNS: [&str; 7] = ["device_id", "timestamp", "lat", "lon", "pm25", "rh", "temp"];

/// Stream fixed-station rows through QC into `sink`.
pub fn read_fixed<R: Read>(reader: R, name: &str, mode: ParseMode, sink: impl FnMut(FixedRecord)) -> Result<IngestReport> {
    drive(reader, name, mode, &FIXED_COLUMNS, decode_fixed, sink)
}

/// Stream mobile-sensor rows through QC into `sink`, without materializing
/// the file.
pub fn read_mobile<R: Read>(reader: R, name: &str, mode: ParseMode, sink: impl FnMut(MobileRecord)) -> Result<IngestReport> {
    drive(reader, name, mode, &MOBILE_COLUMNS, decode_mobile, sink)
}

pub fn load_fixed(path: &Path, mode: ParseMode) -> Result<(Vec<FixedRecord>, IngestReport)> {
    let mut out = Vec::new();
    let report = read_fixed(open(path)?, &display_name(path), mode, |r| out.push(r))?;
    Ok((out, report))
}

pub fn load_mobile(path: &Path, mode: ParseMode) -> Result<(Vec<MobileRecord>, IngestReport)> {
    let mut out = Vec::new();
    let report = read_mobile(open(path)?, &display_name(path), mode, |r| out.push(r))?;
    Ok((out, report))
}

/// Station registry. Always strict: a bad or duplicated station is fatal.
pub fn read_stations<R: Read>(reader: R, name: &str) -> Result<Vec<StationInfo>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::resolve(name, &header, &["station_id", "lat", "lon"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let id = cols.get(&rec, 0).filter(|s| !s.is_empty()).ok_or_else(|| bad("empty station_id".into()))?;
        let (Some(lat), Some(lon)) = (num(cols.get(&rec, 1)), num(cols.get(&rec, 2))) else {
            return Err(bad("bad coordinates".into()));
        };
        let pos = GeoPoint::new(lat, lon).map_err(|e| bad(e.to_string()))?;
        if !seen.insert(id.to_string()) {
            return Err(bad(format!("duplicate station_id {id}")));
        }
        out.push(StationInfo {
            station_id: id.to_string(),
            pos,
        });
    }
    Ok(out)
}

pub fn load_stations(path: &Path) -> Result<Vec<StationInfo>> {
    read_stations(open(path)?, &display_name(path))
}

/// The families of urban feature layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerFamily {
    LandCover,
    LandUse,
    RoadLength,
    BuildingArea,
}

impl LayerFamily {
    /// Validate a layer name: `land_cover.<class>`, `land_use.<class>`,
    /// `road_length.<class>` or `building_area`.
    pub fn of(name: &str) -> Result<LayerFamily> {
        let valid_class = |c: &str| {
            !c.is_empty() && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-')
        };
        let family = match name.split_once('.') {
            None if name == "building_area" => return Ok(LayerFamily::BuildingArea),
            Some(("land_cover", c)) if valid_class(c) => LayerFamily::LandCover,
            Some(("land_use", c)) if valid_class(c) => LayerFamily::LandUse,
            Some(("road_length", c)) if valid_class(c) => LayerFamily::RoadLength,
            _ => return Err(Error::Config(format!("unknown feature layer `{name}`"))),
        };
        Ok(family)
    }

    pub fn is_area(&self) -> bool {
        !matches!(self, LayerFamily::RoadLength)
    }
}

/// Per-cell nonnegative quantity, indexed by [`GridSpec::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct UrbanFeatureLayer {
    pub name: String,
    pub values: Vec<f64>,
}

impl UrbanFeatureLayer {
    pub fn value_at(&self, grid: &GridSpec, key: CellKey) -> f64 {
        self.values[grid.index(key)]
    }

    pub fn total(&self) -> f64 {
        crate::numeric::sum(self.values.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Axis-aligned rectangle given by two opposite corners.
    Rect { min: ProjectedPoint, max: ProjectedPoint },
    Polyline(Vec<ProjectedPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGeometry {
    pub layer: String,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellValue {
    pub layer: String,
    pub key: CellKey,
    pub value: f64,
}

/// Everything read from feature files, before rasterization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureInputs {
    pub geometries: Vec<FeatureGeometry>,
    pub cells: Vec<CellValue>,
}

impl FeatureInputs {
    pub fn extend(&mut self, other: FeatureInputs) {
        self.geometries.extend(other.geometries);
        self.cells.extend(other.cells);
    }

    pub fn layer_names(&self) -> BTreeSet<String> {
        self.geometries
            .iter()
            .map(|g| g.layer.clone())
            .chain(self.cells.iter().map(|c| c.layer.clone()))
            .collect()
    }
}

/// Read a feature CSV, detecting per-cell or geometry layout from the header.
pub fn read_features<R: Read>(reader: R, name: &str, projection: &LocalProjection) -> Result<FeatureInputs> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    let h: Vec<&str> = header.iter().map(str::trim).collect();
    let mut out = FeatureInputs::default();
    let per_cell = h.len() >= 4 && h[..4] == ["layer", "col", "row", "value"];
    let geometry = h.len() >= 2 && h[..2] == ["layer", "kind"];
    if !per_cell && !geometry {
        return Err(Error::Parse {
            path: name.to_string(),
            line: 1,
            message: "expected header `layer,col,row,value` or `layer,kind,coords...`".into(),
        });
    }
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let layer = rec.get(0).map(str::trim).unwrap_or_default().to_string();
        let family = LayerFamily::of(&layer)?;
        if per_cell {
            let col = rec.get(1).and_then(|s| s.trim().parse::<u32>().ok());
            let row = rec.get(2).and_then(|s| s.trim().parse::<u32>().ok());
            let value = num(rec.get(3).map(str::trim));
            let (Some(col), Some(row), Some(value)) = (col, row, value) else {
                return Err(bad("bad per-cell feature row".into()));
            };
            if value < 0.0 {
                return Err(bad(format!("negative feature value {value}")));
            }
            out.cells.push(CellValue {
                layer,
                key: CellKey::new(col, row),
                value,
            });
            continue;
        }
        let kind = rec.get(1).map(str::trim).unwrap_or_default();
        let coords: Option<Vec<f64>> = rec.iter().skip(2).map(|s| num(Some(s.trim()))).collect();
        let coords = coords.ok_or_else(|| bad("bad coordinate".into()))?;
        if coords.len() % 2 != 0 {
            return Err(bad("odd number of coordinates".into()));
        }
        let mut pts = Vec::with_capacity(coords.len() / 2);
        for c in coords.chunks(2) {
            let gp = GeoPoint::new(c[0], c[1]).map_err(|e| bad(e.to_string()))?;
            pts.push(projection.project(gp).map_err(|e| bad(e.to_string()))?);
        }
        let geometry = match kind {
            "rect" if pts.len() == 2 => {
                if !family.is_area() {
                    return Err(Error::Config(format!("layer `{layer}` takes polylines, not rects")));
                }
                Geometry::Rect {
                    min: ProjectedPoint::new(pts[0].x.min(pts[1].x), pts[0].y.min(pts[1].y)),
                    max: ProjectedPoint::new(pts[0].x.max(pts[1].x), pts[0].y.max(pts[1].y)),
                }
            }
            "polyline" if pts.len() >= 2 => {
                if family.is_area() {
                    return Err(Error::Config(format!("layer `{layer}` takes rects, not polylines")));
                }
                Geometry::Polyline(pts)
            }
            _ => return Err(bad(format!("bad geometry kind `{kind}` with {} points", pts.len()))),
        };
        out.geometries.push(FeatureGeometry { layer, geometry });
    }
    Ok(out)
}

pub fn load_features(path: &Path, projection: &LocalProjection) -> Result<FeatureInputs> {
    read_features(open(path)?, &display_name(path), projection)
}

/// Add the per-cell length of segment `a -> b` into `out`.
fn clip_segment(a: ProjectedPoint, b: ProjectedPoint, grid: &GridSpec, out: &mut [f64]) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return;
    }
    let mut ts = vec![0.0, 1.0];
    let s = grid.cell_size;
    let mut crossings = |p0: f64, d: f64, origin: f64, n: u32| {
        if d == 0.0 {
            return;
        }
        let (lo, hi) = if d > 0.0 { (p0, p0 + d) } else { (p0 + d, p0) };
        let k0 = ((lo - origin) / s).ceil().max(0.0) as i64;
        let k1 = ((hi - origin) / s).floor().min(n as f64) as i64;
        for k in k0..=k1 {
            let t = (origin + k as f64 * s - p0) / d;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    };
    crossings(a.x, dx, grid.origin.x, grid.n_cols);
    crossings(a.y, dy, grid.origin.y, grid.n_rows);
    ts.sort_by(f64::total_cmp);
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        if let Some(key) = grid.cell_of(ProjectedPoint::new(a.x + tm * dx, a.y + tm * dy)) {
            out[grid.index(key)] += (t1 - t0) * len;
        }
    }
}

fn clip_rect(min: ProjectedPoint, max: ProjectedPoint, grid: &GridSpec, out: &mut [f64]) {
    let s = grid.cell_size;
    let c0 = ((min.x - grid.origin.x) / s).floor().max(0.0) as i64;
    let c1 = ((max.x - grid.origin.x) / s).floor().min(grid.n_cols as f64 - 1.0) as i64;
    let r0 = ((min.y - grid.origin.y) / s).floor().max(0.0) as i64;
    let r1 = ((max.y - grid.origin.y) / s).floor().min(grid.n_rows as f64 - 1.0) as i64;
    for r in r0..=r1 {
        for c in c0..=c1 {
            let key = CellKey::new(c as u32, r as u32);
            let (lo, hi) = grid.cell_bounds(key);
            let w = (max.x.min(hi.x) - min.x.max(lo.x)).max(0.0);
            let h = (max.y.min(hi.y) - min.y.max(lo.y)).max(0.0);
            out[grid.index(key)] += w * h;
        }
    }
}

/// Rasterize feature inputs onto `grid`: intersection area for rect layers,
/// intersection length for road layers, summed per-cell values for tabular
/// inputs. Output layers are sorted by name; cells without input are zero.
///
/// `declared`, when given, fixes the output layer list; a layer in `inputs`
/// outside that list is a configuration error.
pub fn rasterize_features(inputs: &FeatureInputs, grid: &GridSpec, declared: Option<&[String]>) -> Result<Vec<UrbanFeatureLayer>> {
    let present = inputs.layer_names();
    let names: BTreeSet<String> = match declared {
        Some(list) => {
            for n in list {
                LayerFamily::of(n)?;
            }
            let set: BTreeSet<String> = list.iter().cloned().collect();
            if let Some(extra) = present.iter().find(|n| !set.contains(*n)) {
                return Err(Error::Config(format!("feature layer `{extra}` is not declared")));
            }
            set
        }
        None => present,
    };
    let mut layers: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for n in &names {
        LayerFamily::of(n)?;
        layers.insert(n.clone(), vec![0.0; grid.n_cells()]);
    }
    for g in &inputs.geometries {
        let out = layers.get_mut(&g.layer).expect("layer registered");
        match &g.geometry {
            Geometry::Rect { min, max } => clip_rect(*min, *max, grid, out),
            Geometry::Polyline(pts) => {
                for w in pts.windows(2) {
                    clip_segment(w[0], w[1], grid, out);
                }
            }
        }
    }
    for c in &inputs.cells {
        if !grid.contains_key(c.key) {
            return Err(Error::InvalidInput(format!(
                "feature cell ({}, {}) of `{}` lies outside the grid",
                c.key.col, c.key.row, c.layer
            )));
        }
        layers.get_mut(&c.layer).expect("layer registered")[grid.index(c.key)] += c.value;
    }
    Ok(layers
        .into_iter()
        .map(|(name, values)| UrbanFeatureLayer { name, values })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXED: &str = "station_id,timestamp,pm25
S01,2023-03-01T09:00:00Z,42.0
S01,2023-03-01T09:05:00Z,612.0
S02,2023-03-01T09:00:00Z,-3.0
S02,not-a-time,10
S03,2023-03-01T09:00:00Z,500
";

    #[test]
    fn fixed_rows_and_qc() {
        let mut out = Vec::new();
        let rep = read_fixed(FIXED.as_bytes(), "fixed.csv", ParseMode::Lenient, |r| out.push(r)).unwrap();
        assert_eq!(
            out[0],
            FixedRecord {
                station_id: "S01".into(),
                t: timefmt::parse_utc("2023-03-01T09:00:00Z").unwrap(),
                pm25: 42.0
            }
        );
        assert_eq!(out.len(), 2);
        assert_eq!(rep.rows_parsed, 5);
        assert_eq!(rep.rows_kept, 2);
        assert_eq!(rep.dropped_for(DropReason::Pm25Range), 2);
        assert_eq!(rep.dropped_for(DropReason::Malformed), 1);
        assert_eq!(rep.rows_parsed, rep.rows_kept + rep.rows_dropped);
        assert_eq!(rep.csv_row(), "fixed.csv,5,2,3,malformed=1;pm25_range=2");
    }

    #[test]
    fn strict_mode_fails_on_malformed() {
        let err = read_fixed(FIXED.as_bytes(), "fixed.csv", ParseMode::Strict, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn mobile_five_row_fixture() {
        let csv = "device_id,timestamp,lat,lon,pm25,rh,temp
T1,2023-03-01T09:00:00Z,23.1,113.3,40.5,60,21
T1,2023-03-01T09:00:15Z,23.1,113.3,501,60,21
T2,2023-03-01T09:00:00Z,23.1,113.3,30,120,21
T2,2023-03-01T09:00:15Z,23.1,113.3,30,50,75
T3,2023-03-01T09:00:00Z,23.1,113.3,30,55,18
";
        let mut out = Vec::new();
        let rep = read_mobile(csv.as_bytes(), "m.csv", ParseMode::Strict, |r| out.push(r)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].pm25_raw, 40.5);
        assert_eq!(rep.dropped_for(DropReason::Pm25Range), 1);
        assert_eq!(rep.dropped_for(DropReason::HumidityRange), 1);
        assert_eq!(rep.dropped_for(DropReason::TemperatureRange), 1);
        assert_eq!((rep.rows_parsed, rep.rows_kept, rep.rows_dropped), (5, 2, 3));
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = read_fixed("station,timestamp,pm25\n".as_bytes(), "f", ParseMode::Lenient, |_| {}).unwrap_err();
        assert!(err.to_string().contains("station_id"));
        assert!(load_fixed(Path::new("/nonexistent/fixed.csv"), ParseMode::Lenient).is_err());
    }

    #[test]
    fn stations_reject_duplicates() {
        let ok = read_stations("station_id,lat,lon\nS01,23.1,113.2\nS02,23.2,113.3\n".as_bytes(), "s").unwrap();
        assert_eq!(ok.len(), 2);
        assert!(read_stations("station_id,lat,lon\nS01,23.1,113.2\nS01,23.2,113.3\n".as_bytes(), "s").is_err());
    }

    #[test]
    fn layer_names() {
        assert_eq!(LayerFamily::of("building_area").unwrap(), LayerFamily::BuildingArea);
        assert_eq!(LayerFamily::of("road_length.primary").unwrap(), LayerFamily::RoadLength);
        assert_eq!(LayerFamily::of("land_use.industrial").unwrap(), LayerFamily::LandUse);
        assert!(LayerFamily::of("population").is_err());
        assert!(LayerFamily::of("road_length.").is_err());
    }

    fn unit_grid() -> GridSpec {
        GridSpec::new(ProjectedPoint::new(0.0, 0.0), 100.0, 4, 3).unwrap()
    }

    fn geom(layer: &str, g: Geometry) -> FeatureInputs {
        FeatureInputs {
            geometries: vec![FeatureGeometry {
                layer: layer.into(),
                geometry: g,
            }],
            cells: vec![],
        }
    }

    #[test]
    fn building_covering_one_cell() {
        let g = unit_grid();
        let inp = geom(
            "building_area",
            Geometry::Rect {
                min: ProjectedPoint::new(100.0, 100.0),
                max: ProjectedPoint::new(200.0, 200.0),
            },
        );
        let l = &rasterize_features(&inp, &g, None).unwrap()[0];
        assert_eq!(l.value_at(&g, CellKey::new(1, 1)), 10_000.0);
        assert_eq!(l.total(), 10_000.0);
    }

    #[test]
    fn road_split_between_two_cells() {
        let g = unit_grid();
        let inp = geom(
            "road_length.primary",
            Geometry::Polyline(vec![ProjectedPoint::new(50.0, 150.0), ProjectedPoint::new(150.0, 150.0)]),
        );
        let l = &rasterize_features(&inp, &g, None).unwrap()[0];
        assert!((l.value_at(&g, CellKey::new(0, 1)) - 50.0).abs() < 1e-12);
        assert!((l.value_at(&g, CellKey::new(1, 1)) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_through_opposite_corners() {
        let g = unit_grid();
        // Enters cell (1,1) at (100,100) and leaves at (200,200).
        let inp = geom(
            "road_length.x",
            Geometry::Polyline(vec![ProjectedPoint::new(40.0, 40.0), ProjectedPoint::new(260.0, 260.0)]),
        );
        let l = &rasterize_features(&inp, &g, None).unwrap()[0];
        let expected = 100.0 * 2f64.sqrt();
        assert!((l.value_at(&g, CellKey::new(1, 1)) - expected).abs() < 1e-9);
        assert!((l.value_at(&g, CellKey::new(0, 0)) - 60.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(l.value_at(&g, CellKey::new(1, 0)), 0.0);
    }

    #[test]
    fn declared_layers_zero_fill_and_reject_unknown() {
        let g = unit_grid();
        let declared = vec!["building_area".to_string(), "land_use.park".to_string()];
        let inp = geom(
            "building_area",
            Geometry::Rect {
                min: ProjectedPoint::new(0.0, 0.0),
                max: ProjectedPoint::new(10.0, 10.0),
            },
        );
        let ls = rasterize_features(&inp, &g, Some(&declared)).unwrap();
        assert_eq!(ls.len(), 2);
        assert!(ls[1].values.iter().all(|v| *v == 0.0));
        let bad = vec!["trees".to_string()];
        assert!(rasterize_features(&FeatureInputs::default(), &g, Some(&bad)).unwrap_err().is_config());
    }

    #[test]
    fn geometry_csv_round_trip_through_projection() {
        let proj = LocalProjection::new(GeoPoint::new(23.1, 113.3).unwrap()).unwrap();
        let csv = "layer,kind,coords
building_area,rect,23.1,113.3,23.101,113.301
road_length.primary,polyline,23.1,113.3,23.1,113.31,23.11,113.31
";
        let f = read_features(csv.as_bytes(), "g.csv", &proj).unwrap();
        assert_eq!(f.geometries.len(), 2);
        let bad = "layer,kind,coords\nbuilding_area,polyline,23.1,113.3,23.1,113.31\n";
        assert!(read_features(bad.as_bytes(), "g.csv", &proj).unwrap_err().is_config());
        let cells = "layer,col,row,value\nbuilding_area,1,2,35.5\n";
        let f = read_features(cells.as_bytes(), "c.csv", &proj).unwrap();
        assert_eq!(f.cells[0].key, CellKey::new(1, 2));
    }

    /// Liang-Barsky length of a segment inside an axis-aligned box.
    fn clipped_length(a: ProjectedPoint, b: ProjectedPoint, lo: ProjectedPoint, hi: ProjectedPoint) -> f64 {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [(-dx, a.x - lo.x), (dx, hi.x - a.x), (-dy, a.y - lo.y), (dy, hi.y - a.y)] {
            if p == 0.0 {
                if q < 0.0 {
                    return 0.0;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        if t1 > t0 {
            (t1 - t0) * dx.hypot(dy)
        } else {
            0.0
        }
    }

    proptest! {
        #[test]
        fn road_length_is_conserved(
            pts in proptest::collection::vec((-100.0f64..500.0, -100.0f64..400.0), 2..8)
        ) {
            let g = unit_grid();
            let pts: Vec<ProjectedPoint> = pts.into_iter().map(|(x, y)| ProjectedPoint::new(x, y)).collect();
            let expected: f64 = pts.windows(2).map(|w| clipped_length(w[0], w[1], g.origin, g.max_corner())).sum();
            let inp = geom("road_length.any", Geometry::Polyline(pts));
            let total = rasterize_features(&inp, &g, None).unwrap()[0].total();
            prop_assert!((total - expected).abs() <= 1e-3 * expected.max(1e-9) + 1e-9);
        }

        #[test]
        fn qc_is_idempotent(vals in proptest::collection::vec((-50.0f64..600.0, -10.0f64..130.0, -20.0f64..70.0), 0..40)) {
            let recs: Vec<MobileRecord> = vals.iter().enumerate().map(|(i, (pm, rh, t))| MobileRecord {
                device_id: format!("D{i}"),
                t: 1_700_000_000 + i as i64,
                pos: GeoPoint { lat: 23.0, lon: 113.0 },
                pm25_raw: *pm,
                rh: *rh,
                temp: *t,
            }).collect();
            let once = filter_mobile(recs);
            let twice = filter_mobile(once.clone());
            prop_assert_eq!(once, twice);
        }
    }
}
