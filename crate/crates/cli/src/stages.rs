//! Pipeline stages. Each reads files, writes files under the output
//! directory, and leaves a `stage.log` with checksums of both.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use pmfuse_core::align::{aggregate, fixed_means, join_fixed, resolution_sweep, Cells, Observation, SweepResult};
use pmfuse_core::calibrate::{calibrate, correlation_csv, cross_device_correlation, device_series, CalibrationConfig, CalibrationModel};
use pmfuse_core::fuse::{
    build_table, compare_models, constant_layers, gain_csv, gain_report, mapped_csv, mobile_rows, predict_mapped, read_mapped_csv,
    CompareConfig, COMPARED_KINDS,
};
use pmfuse_core::ingest::{
    load_features, load_fixed, load_mobile, load_stations, rasterize_features, read_features, FeatureInputs, FixedRecord,
    IngestReport, MobileRecord, ParseMode, StationInfo, UrbanFeatureLayer,
};
use pmfuse_core::learn::{fit, write_regressor, RegressorKind};
use pmfuse_core::maps::{build_map, map_rmse, map_stats, BiasReport, MapInputs, MapSource, MapStats, PollutionMap};
use pmfuse_core::synthcity::{file_sha256, generate};
use pmfuse_core::timefmt::{format_basic, format_utc};
use pmfuse_core::{CellId, CellKey, ProjectedPoint, StationCell, TimeKey};

use crate::manifest::{scenario_dir, RunConfig};
use crate::CliError;

pub const RUN_MANIFEST: &str = "RUN_MANIFEST";

/// Accumulates the stage log.
struct Log {
    stage: &'static str,
    dir: PathBuf,
    out_root: PathBuf,
    lines: Vec<String>,
}

impl Log {
    fn new(cfg: &RunConfig, stage: &'static str) -> Result<Log, CliError> {
        let dir = cfg.out_dir.join(stage);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut log = Log {
            stage,
            dir,
            out_root: cfg.out_dir.clone(),
            lines: vec![format!("stage {stage}")],
        };
        let own = format!("{stage}.");
        let mut prefixes = vec![own.as_str(), "grid.", "seed."];
        if stage == "fuse" {
            prefixes.push("model.");
        }
        for (k, v) in cfg.resolved(&prefixes) {
            log.lines.push(format!("param {k} = {v}"));
        }
        Ok(log)
    }

    fn display(&self, p: &Path) -> String {
        p.strip_prefix(&self.out_root).unwrap_or(p).display().to_string()
    }

    fn input(&mut self, p: &Path) -> Result<(), CliError> {
        let h = file_sha256(p)?;
        self.lines.push(format!("input {} {h}", self.display(p)));
        Ok(())
    }

    fn note(&mut self, s: impl Into<String>) {
        self.lines.push(format!("note {}", s.into()));
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Write a text output and record it.
    fn write(&mut self, rel: &str, text: &str) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        self.output(&p)?;
        Ok(p)
    }

    fn output(&mut self, p: &Path) -> Result<(), CliError> {
        let h = file_sha256(p)?;
        self.lines.push(format!("output {} {h}", self.display(p)));
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        let p = self.dir.join("stage.log");
        let mut text = self.lines.join("\n");
        text.push('\n');
        fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        eprintln!("pmfuse: {} done", self.stage);
        Ok(())
    }
}

fn io_err(p: &Path, e: std::io::Error) -> CliError {
    CliError::Validation(format!("{}: {e}", p.display()))
}

fn need_file(p: &Path, what: &str) -> Result<(), CliError> {
    if p.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{what}: {} does not exist", p.display())))
    }
}

fn fixed_csv(recs: &[FixedRecord]) -> String {
    let mut s = String::from("station_id,timestamp,pm25\n");
    for r in recs {
        let _ = writeln!(s, "{},{},{}", r.station_id, format_utc(r.t), r.pm25);
    }
    s
}

fn write_mobile(p: &Path, recs: &[MobileRecord]) -> Result<(), CliError> {
    let f = fs::File::create(p).map_err(|e| io_err(p, e))?;
    let mut w = BufWriter::new(f);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "device_id,timestamp,lat,lon,pm25,rh,temp")?;
        for r in recs {
            writeln!(w, "{},{},{},{},{},{},{}", r.device_id, format_utc(r.t), r.pos.lat, r.pos.lon, r.pm25_raw, r.rh, r.temp)?;
        }
        w.flush()
    })();
    res.map_err(|e| io_err(p, e))
}

/// `synth`: generate the scenario into `<out>/scenario`.
pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let sc = cfg.synth.clone().unwrap_or_else(|| {
        let mut s = pmfuse_core::synthcity::ScenarioConfig {
            seed: cfg.seeds.scenario,
            ..Default::default()
        };
        let g = cfg.frame.geo_origin();
        s.origin = g;
        s.cell_size_m = cfg.frame.grid.cell_size;
        s.n_cols = cfg.frame.grid.n_cols;
        s.n_rows = cfg.frame.grid.n_rows;
        s
    });
    let mut log = Log::new(cfg, "synth")?;
    let scen = generate(&sc)?;
    let dir = scenario_dir(&cfg.out_dir);
    let entries = scen.write(&dir)?;
    for (f, _) in &entries {
        log.output(&dir.join(f))?;
    }
    log.output(&dir.join("MANIFEST"))?;
    log.note(format!(
        "{} stations, {} taxis, {} mobile records, {} co-location records",
        scen.stations.len(),
        sc.n_taxis,
        scen.mobile.len(),
        scen.colocation.len()
    ));
    log.finish()
}

/// `ingest`: QC every input and write canonical, sorted copies.
pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let i = &cfg.inputs;
    let mut missing = Vec::new();
    for (key, p) in [("inputs.fixed", &i.fixed), ("inputs.mobile", &i.mobile), ("inputs.stations", &i.stations)] {
        if !p.is_file() {
            missing.push(format!("{key} ({})", p.display()));
        }
    }
    for (key, p) in [("inputs.colocation", &i.colocation), ("inputs.reference", &i.reference)] {
        if let Some(p) = p.as_ref().filter(|p| !p.is_file()) {
            missing.push(format!("{key} ({})", p.display()));
        }
    }
    for p in i.features.iter().filter(|p| !p.is_file()) {
        missing.push(format!("inputs.features ({})", p.display()));
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(format!("missing input files: {}", missing.join(", "))));
    }
    let mode = if cfg.strict { ParseMode::Strict } else { ParseMode::Lenient };
    let mut log = Log::new(cfg, "ingest")?;
    let mut reports: Vec<IngestReport> = Vec::new();

    log.input(&i.fixed)?;
    let (mut fixed, rep) = load_fixed(&i.fixed, mode)?;
    reports.push(rep);
    log.input(&i.mobile)?;
    let (mut mobile, rep) = load_mobile(&i.mobile, mode)?;
    reports.push(rep);
    log.input(&i.stations)?;
    let stations = load_stations(&i.stations)?;
    if fixed.is_empty() || mobile.is_empty() || stations.is_empty() {
        return Err(CliError::Data("no fixed, mobile or station records survive ingest".into()));
    }
    fixed.sort_by(|a, b| a.station_id.cmp(&b.station_id).then(a.t.cmp(&b.t)));
    mobile.sort_by(|a, b| a.device_id.cmp(&b.device_id).then(a.t.cmp(&b.t)));
    log.write("fixed.csv", &fixed_csv(&fixed))?;
    let p = log.path("mobile.csv");
    write_mobile(&p, &mobile)?;
    log.output(&p)?;
    let mut st = String::from("station_id,lat,lon\n");
    for s in &stations {
        let _ = writeln!(st, "{},{},{}", s.station_id, s.pos.lat, s.pos.lon);
    }
    log.write("stations.csv", &st)?;

    if let (Some(cp), Some(rp)) = (&i.colocation, &i.reference) {
        log.input(cp)?;
        let (mut coloc, rep) = load_mobile(cp, mode)?;
        reports.push(rep);
        log.input(rp)?;
        let (mut reference, rep) = load_fixed(rp, mode)?;
        reports.push(rep);
        coloc.sort_by(|a, b| a.device_id.cmp(&b.device_id).then(a.t.cmp(&b.t)));
        reference.sort_by(|a, b| a.station_id.cmp(&b.station_id).then(a.t.cmp(&b.t)));
        let p = log.path("colocation.csv");
        write_mobile(&p, &coloc)?;
        log.output(&p)?;
        log.write("reference.csv", &fixed_csv(&reference))?;
    } else {
        log.note("no co-location inputs");
    }

    let mut inputs = FeatureInputs::default();
    for p in &i.features {
        log.input(p)?;
        inputs.extend(load_features(p, &cfg.frame.projection)?);
    }
    let layers = rasterize_features(&inputs, &cfg.frame.grid, None)?;
    let g = &cfg.frame.grid;
    let mut fs_text = String::from("layer,col,row,value\n");
    for l in &layers {
        for (idx, v) in l.values.iter().enumerate() {
            if *v != 0.0 {
                let k = g.key_at(idx);
                let _ = writeln!(fs_text, "{},{},{},{v}", l.name, k.col, k.row);
            }
        }
    }
    log.write("features.csv", &fs_text)?;

    let mut rep = format!("{}\n", IngestReport::CSV_HEADER);
    for r in &reports {
        rep.push_str(&r.csv_row());
        rep.push('\n');
    }
    log.write("ingest_report.csv", &rep)?;
    log.finish()
}

fn ingested(cfg: &RunConfig, file: &str) -> Result<PathBuf, CliError> {
    let p = cfg.out_dir.join("ingest").join(file);
    need_file(&p, "ingest output (run `pmfuse ingest` first)")?;
    Ok(p)
}

/// `calibrate`: fit and compare the four correction models on co-location data.
pub fn calibrate_stage(cfg: &RunConfig) -> Result<(), CliError> {
    let mut log = Log::new(cfg, "calibration")?;
    let cp = cfg.out_dir.join("ingest").join("colocation.csv");
    let rp = cfg.out_dir.join("ingest").join("reference.csv");
    if !cp.is_file() || !rp.is_file() {
        if cfg.calibration.apply_to_fleet {
            return Err(CliError::Validation(
                "calibration.apply_to_fleet needs inputs.colocation and inputs.reference".into(),
            ));
        }
        log.note("skipped: no co-location inputs");
        return log.finish();
    }
    log.input(&cp)?;
    log.input(&rp)?;
    let (coloc, _) = load_mobile(&cp, ParseMode::Strict)?;
    let (reference, _) = load_fixed(&rp, ParseMode::Strict)?;
    let station = &cfg.calibration.reference_station;
    let reference: Vec<FixedRecord> = reference.into_iter().filter(|r| &r.station_id == station).collect();
    if reference.is_empty() {
        return Err(CliError::Data(format!("reference station {station} has no records")));
    }
    let ccfg = CalibrationConfig {
        interval: cfg.calibration.interval,
        train_fraction: cfg.calibration.train_fraction,
        split: cfg.calibration.split,
        seed: cfg.seeds.calibration_split,
        ..Default::default()
    };
    let (models, report) = calibrate(&coloc, &reference, &ccfg)?;
    log.note(format!("{} train pairs, {} test pairs", report.n_train, report.n_test));
    log.write("calibration_report.csv", &report.to_csv())?;
    for m in &models {
        let mut buf = Vec::new();
        m.write(&mut buf)?;
        log.write(&format!("model_{}.txt", m.kind().as_str()), &String::from_utf8_lossy(&buf))?;
    }
    let (names, series) = device_series(&coloc, &reference, station, cfg.calibration.interval)?;
    match cross_device_correlation(&series) {
        Ok(m) => {
            log.write("cross_device.csv", &correlation_csv(&names, &m))?;
        }
        Err(e) => log.note(format!("cross-device correlation skipped: {e}")),
    }
    if cfg.calibration.apply_to_fleet {
        let mp = ingested(cfg, "mobile.csv")?;
        log.input(&mp)?;
        let (mobile, _) = load_mobile(&mp, ParseMode::Strict)?;
        let model = models
            .iter()
            .find(|m| m.kind() == cfg.calibration.fleet_model)
            .ok_or_else(|| CliError::Internal("fleet model missing".into()))?;
        let corrected: Vec<MobileRecord> = mobile
            .iter()
            .map(|r| MobileRecord {
                pm25_raw: model.apply(r),
                ..r.clone()
            })
            .collect();
        let p = log.path("mobile_calibrated.csv");
        write_mobile(&p, &corrected)?;
        log.output(&p)?;
    }
    log.finish()
}

/// The mobile file later stages use: calibrated when the fleet is corrected.
fn fleet_file(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    if cfg.calibration.apply_to_fleet {
        let p = cfg.out_dir.join("calibration").join("mobile_calibrated.csv");
        need_file(&p, "calibrated fleet (run `pmfuse calibrate` first)")?;
        Ok(p)
    } else {
        ingested(cfg, "mobile.csv")
    }
}

struct Common {
    fixed: Vec<FixedRecord>,
    observations: Vec<Observation>,
    stations: Vec<(String, ProjectedPoint)>,
}

fn load_common(cfg: &RunConfig, log: &mut Log) -> Result<Common, CliError> {
    let fp = ingested(cfg, "fixed.csv")?;
    let sp = ingested(cfg, "stations.csv")?;
    let mp = fleet_file(cfg)?;
    for p in [&fp, &sp, &mp] {
        log.input(p)?;
    }
    let (fixed, _) = load_fixed(&fp, ParseMode::Strict)?;
    let (mobile, _) = load_mobile(&mp, ParseMode::Strict)?;
    let stations: Vec<StationInfo> = load_stations(&sp)?;
    let proj = &cfg.frame.projection;
    let observations = mobile
        .iter()
        .map(|r| {
            Ok(Observation {
                t: r.t,
                pos: proj.project(r.pos)?,
                value: r.pm25_raw,
            })
        })
        .collect::<pmfuse_core::Result<Vec<_>>>()?;
    let stations = stations
        .iter()
        .map(|s| Ok((s.station_id.clone(), proj.project(s.pos)?)))
        .collect::<pmfuse_core::Result<Vec<_>>>()?;
    Ok(Common {
        fixed,
        observations,
        stations,
    })
}

/// `sweep`: correlate station-square mobile means with fixed values over the
/// distance × interval grid.
pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let mut log = Log::new(cfg, "sweep")?;
    let c = load_common(cfg, &mut log)?;
    let res = resolution_sweep(&c.observations, &c.fixed, &c.stations, &cfg.sweep)?;
    log.note(format!("chosen {} m, {} s", res.chosen.0, res.chosen.1));
    log.write("sweep.csv", &res.to_csv())?;
    log.write("sweep_counts.csv", &res.counts_csv())?;
    log.finish()
}

/// (station square side, interval) used by fuse and map.
pub fn resolution(cfg: &RunConfig) -> Result<(f64, i64), CliError> {
    if let (Some(d), Some(i)) = (cfg.fuse.distance, cfg.fuse.interval) {
        return Ok((d, i));
    }
    let p = cfg.out_dir.join("sweep").join("sweep.csv");
    need_file(&p, "sweep result (run `pmfuse sweep` first or set fuse.distance_m and fuse.interval_s)")?;
    let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    let (d, i) = SweepResult::parse_chosen(&text)?;
    Ok((cfg.fuse.distance.unwrap_or(d), cfg.fuse.interval.unwrap_or(i)))
}

fn load_layers(cfg: &RunConfig, log: &mut Log) -> Result<Vec<UrbanFeatureLayer>, CliError> {
    let p = ingested(cfg, "features.csv")?;
    log.input(&p)?;
    let f = fs::File::open(&p).map_err(|e| io_err(&p, e))?;
    let inputs = read_features(BufReader::new(f), &p.display().to_string(), &cfg.frame.projection)?;
    Ok(rasterize_features(&inputs, &cfg.frame.grid, None)?)
}

/// `fuse`: build the training table, compare regressors, predict mapped cells.
pub fn fuse(cfg: &RunConfig) -> Result<(), CliError> {
    let mut log = Log::new(cfg, "fuse")?;
    let (distance, interval) = resolution(cfg)?;
    log.note(format!("station square {distance} m, interval {interval} s"));
    let c = load_common(cfg, &mut log)?;
    let grid = cfg.frame.grid;
    let mut layers = load_layers(cfg, &mut log)?;

    let cells = Cells::Stations(c.stations.iter().map(|(id, p)| StationCell::new(id.clone(), *p, distance)).collect());
    let samples = join_fixed(aggregate(&c.observations, &cells, interval)?, &c.fixed, interval);
    let station_cell: BTreeMap<&str, Option<CellKey>> = c.stations.iter().map(|(id, p)| (id.as_str(), grid.cell_of(*p))).collect();
    let locate = |id: &CellId| match id {
        CellId::Station(s) => station_cell.get(s.as_str()).copied().flatten(),
        CellId::Grid(k) => Some(*k),
    };
    let mut table = build_table(&samples, &layers, &grid, locate, cfg.fuse.min_mobile)?;
    let dropped = constant_layers(&table);
    if !dropped.is_empty() {
        log.note(format!("dropped constant layers: {}", dropped.join(", ")));
        layers.retain(|l| !dropped.contains(&l.name));
        table = build_table(&samples, &layers, &grid, locate, cfg.fuse.min_mobile)?;
    }
    log.write("training_table.csv", &table.to_csv())?;

    let ccfg = CompareConfig {
        validation: cfg.fuse.validation,
        seed: cfg.seeds.cv_folds,
        params: cfg.model.clone(),
        kinds: COMPARED_KINDS.to_vec(),
        min_rows: cfg.fuse.min_rows,
    };
    let cmp = compare_models(&table, &ccfg)?;
    log.write("model_comparison.csv", &cmp.to_csv())?;
    log.write("cv_folds.csv", &cmp.folds_csv(&table))?;

    let d = table.dataset()?;
    let best = fit(cmp.best, &d, &cfg.model)?;
    let mut buf = Vec::new();
    write_regressor(&mut buf, &best, &table.feature_names)?;
    log.write("model.txt", &String::from_utf8_lossy(&buf))?;
    let gain_model = if cmp.best.is_tree_based() { best.clone() } else { fit(RegressorKind::Gbt, &d, &cfg.model)? };
    let report = gain_report(&gain_model, &table.feature_names)?;
    log.write("gain_report.csv", &format!("# model: {}\n{}", gain_model.kind(), gain_csv(&report)))?;

    let grid_samples = aggregate(&c.observations, &Cells::Grid(grid), interval)?;
    let rows = mobile_rows(&grid_samples, &layers, &grid, cfg.fuse.min_mobile);
    let mapped = predict_mapped(&best, &rows);
    log.note(format!("best model {}; {} mapped cell-intervals", cmp.best, mapped.len()));
    log.write("mapped.csv", &mapped_csv(&mapped))?;
    log.finish()
}

fn truth_file(dir: &Path, t: TimeKey) -> PathBuf {
    dir.join(format!("truth_{}_{}.csv", format_basic(t.start), t.len))
}

/// `map`: the three map products per interval, their statistics, the bias
/// report and, for synthetic runs, error against the truth grids.
pub fn map(cfg: &RunConfig) -> Result<(), CliError> {
    let mut log = Log::new(cfg, "map")?;
    let (_, interval) = resolution(cfg)?;
    let c = load_common(cfg, &mut log)?;
    let grid = cfg.frame.grid;
    let mp = cfg.out_dir.join("fuse").join("mapped.csv");
    need_file(&mp, "mapped concentrations (run `pmfuse fuse` first)")?;
    log.input(&mp)?;
    let mapped_text = fs::read_to_string(&mp).map_err(|e| io_err(&mp, e))?;
    let mapped = read_mapped_csv(&mapped_text, &mp.display().to_string(), interval)?;

    let in_window = |t: i64| cfg.map.start.is_none_or(|s| t >= s) && cfg.map.end.is_none_or(|e| t + interval <= e);
    let pos: BTreeMap<&str, ProjectedPoint> = c.stations.iter().map(|(id, p)| (id.as_str(), *p)).collect();
    let mut inputs: BTreeMap<i64, MapInputs> = BTreeMap::new();
    for ((id, t), v) in fixed_means(&c.fixed, interval) {
        if let Some(p) = pos.get(id.as_str()) {
            inputs.entry(t).or_default().stations.push((*p, v));
        }
    }
    for s in aggregate(&c.observations, &Cells::Grid(grid), interval)? {
        if let (CellId::Grid(k), Some(e)) = (&s.cell, inputs.get_mut(&s.time.start)) {
            e.mobile.push((*k, s.mean));
        }
    }
    for m in &mapped {
        if let Some(e) = inputs.get_mut(&m.time.start) {
            e.mapped.push((m.cell, m.pm25));
        }
    }
    let times: Vec<i64> = inputs
        .iter()
        .filter(|(t, e)| in_window(**t) && !e.stations.is_empty() && !e.mobile.is_empty() && !e.mapped.is_empty())
        .map(|(t, _)| *t)
        .collect();
    if times.is_empty() {
        return Err(CliError::Data("no interval has fixed, mobile and mapped inputs inside the map window".into()));
    }
    let mut maps: BTreeMap<MapSource, Vec<PollutionMap>> = BTreeMap::new();
    for &t in &times {
        let time = TimeKey { start: t, len: interval };
        for src in MapSource::ALL {
            maps.entry(src).or_default().push(build_map(src, &inputs[&t], &grid, time, &cfg.map.idw)?);
        }
    }
    let (lo, hi) = maps
        .values()
        .flatten()
        .flat_map(|m| m.values.iter().flatten())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    log.note(format!("{} intervals; color ramp {lo:.3} to {hi:.3} ug/m3", times.len()));

    let mut stats_csv = format!("{}\n", MapStats::CSV_HEADER);
    let mut var_csv = String::from("source,mean_percent,std_percent,steps\n");
    let mut means: BTreeMap<MapSource, Vec<(i64, f64)>> = BTreeMap::new();
    for (src, list) in &maps {
        for m in list {
            let mut buf = Vec::new();
            m.write_csv(&mut buf)?;
            log.write(&format!("maps/{}", m.file_name()), &String::from_utf8_lossy(&buf))?;
            if cfg.map.png {
                let p = log.path(&format!("png/{}", m.file_name().replace(".csv", ".png")));
                fs::create_dir_all(p.parent().expect("png dir")).map_err(|e| io_err(&p, e))?;
                let f = fs::File::create(&p).map_err(|e| io_err(&p, e))?;
                m.write_png(BufWriter::new(f), lo, hi)?;
                log.output(&p)?;
            }
        }
        let (stats, var) = map_stats(list)?;
        for s in &stats {
            stats_csv.push_str(&s.csv_row());
            stats_csv.push('\n');
            means.entry(*src).or_default().push((s.interval_start, s.mean));
        }
        let _ = writeln!(var_csv, "{src},{:.6},{:.6},{}", var.mean_percent, var.std_percent, var.steps.len());
    }
    log.write("map_stats.csv", &stats_csv)?;
    log.write("adjacent_variation.csv", &var_csv)?;
    let bias = BiasReport::compute(&means[&MapSource::Fixed], &means[&MapSource::Mobile], &means[&MapSource::Mapped])?;
    log.write("bias_report.csv", &bias.to_csv())?;

    if let Some(dir) = cfg.map.truth_dir.as_ref().filter(|d| d.is_dir()) {
        let mut rmse = String::from("interval_start,fixed,mobile,mapped\n");
        let mut n = 0;
        for (i, &t) in times.iter().enumerate() {
            let time = TimeKey { start: t, len: interval };
            let p = truth_file(dir, time);
            if !p.is_file() {
                continue;
            }
            log.input(&p)?;
            let f = fs::File::open(&p).map_err(|e| io_err(&p, e))?;
            let truth = PollutionMap::read_csv(BufReader::new(f), &p.display().to_string(), grid, time, MapSource::Fixed)?;
            let _ = write!(rmse, "{}", format_utc(t));
            for src in MapSource::ALL {
                let _ = write!(rmse, ",{:.6}", map_rmse(&maps[&src][i], &truth)?);
            }
            rmse.push('\n');
            n += 1;
        }
        if n > 0 {
            log.write("truth_rmse.csv", &rmse)?;
        } else {
            log.note("no truth grid matches the map interval");
        }
    }
    log.finish()
}

/// Rewrite `<out>/RUN_MANIFEST`: every file under the output directory with
/// its SHA-256, sorted by path.
pub fn write_run_manifest(out: &Path) -> Result<(), CliError> {
    let mut files = BTreeSet::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(|e| io_err(&d, e))? {
            let p = e.map_err(|e| io_err(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != RUN_MANIFEST) {
                let rel = p.strip_prefix(out).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                files.insert(rel);
            }
        }
    }
    let mut text = String::new();
    for f in &files {
        let _ = writeln!(text, "{}  {f}", file_sha256(&out.join(f))?);
    }
    let p = out.join(RUN_MANIFEST);
    fs::write(&p, text).map_err(|e| io_err(&p, e))
}

/// Read a calibration model written by the calibrate stage.
pub fn read_calibration_model(p: &Path) -> Result<CalibrationModel, CliError> {
    let f = fs::File::open(p).map_err(|e| io_err(p, e))?;
    Ok(CalibrationModel::read(BufReader::new(f), &p.display().to_string())?)
}
