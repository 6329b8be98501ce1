//! Run manifest: flat `key = value` lines with dotted section keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pmfuse_core::align::SweepConfig;
use pmfuse_core::calibrate::{CalibrationKind, SplitMode};
use pmfuse_core::fuse::{Validation, DEFAULT_MIN_MOBILE, MIN_COMPARE_ROWS};
use pmfuse_core::learn::{ForestParams, GbtParams, LassoCv, ModelParams, TreeParams};
use pmfuse_core::maps::IdwParams;
use pmfuse_core::synthcity::{ScenarioConfig, SensorSpec, TruthSpec, WeatherSpec};
use pmfuse_core::timefmt::parse_utc;
use pmfuse_core::{GeoPoint, MapFrame};

use crate::CliError;

/// Every accepted key with its default (`None` = required or optional
/// without default).
pub const KEYS: &[(&str, Option<&str>)] = &[
    ("out_dir", None),
    ("grid.origin_lat", None),
    ("grid.origin_lon", None),
    ("grid.cell_size_m", Some("500")),
    ("grid.n_cols", None),
    ("grid.n_rows", None),
    ("inputs.fixed", None),
    ("inputs.mobile", None),
    ("inputs.stations", None),
    ("inputs.features", None),
    ("inputs.colocation", None),
    ("inputs.reference", None),
    ("ingest.strict", Some("false")),
    ("calibration.reference_station", Some("S01")),
    ("calibration.interval_s", Some("300")),
    ("calibration.train_fraction", Some("0.8")),
    ("calibration.split", Some("random")),
    ("calibration.apply_to_fleet", Some("false")),
    ("calibration.fleet_model", Some("boosted")),
    ("sweep.distances_m", Some("500,1000,2000")),
    ("sweep.intervals_s", Some("300,600,1800,3600")),
    ("sweep.tolerance", Some("0.02")),
    ("sweep.min_pairs", Some("10")),
    ("sweep.min_stations", Some("2")),
    ("fuse.distance_m", Some("auto")),
    ("fuse.interval_s", Some("auto")),
    ("fuse.min_mobile", None),
    ("fuse.validation", Some("kfold")),
    ("fuse.folds", Some("5")),
    ("fuse.min_rows", None),
    ("model.gbt.n_trees", Some("300")),
    ("model.gbt.max_depth", Some("4")),
    ("model.gbt.learning_rate", Some("0.1")),
    ("model.gbt.subsample", Some("1")),
    ("model.forest.n_trees", Some("200")),
    ("model.forest.max_depth", Some("8")),
    ("model.knn.k", Some("5")),
    ("model.lasso.folds", Some("5")),
    ("model.lasso.n_lambdas", Some("20")),
    ("map.idw_power", Some("2")),
    ("map.k_nearest", Some("0")),
    ("map.png", Some("true")),
    ("map.start", None),
    ("map.end", None),
    ("map.truth_dir", None),
    ("seed.scenario", None),
    ("seed.calibration_split", None),
    ("seed.cv_folds", None),
    ("seed.forest", None),
    ("synth.enabled", Some("false")),
    ("synth.start", Some("2023-03-01T08:00:00Z")),
    ("synth.duration_s", Some("10800")),
    ("synth.n_stations", Some("8")),
    ("synth.n_taxis", Some("150")),
    ("synth.min_station_separation_m", Some("1200")),
    ("synth.road_spacing_m", Some("400")),
    ("synth.road_prune", Some("0.3")),
    ("synth.station_noise_std", Some("0")),
    ("synth.n_colocated", Some("3")),
    ("synth.colocation_duration_s", Some("259200")),
    ("synth.background", Some("25")),
    ("synth.background_swing", Some("0.25")),
    ("synth.n_plumes", Some("5")),
    ("synth.plume_amp", Some("20,60")),
    ("synth.plume_sigma_m", Some("350,900")),
    ("synth.max_drift_mps", Some("0.15")),
    ("synth.road_weight", Some("8")),
    ("synth.road_decay_m", Some("60")),
    ("synth.diurnal_amp", Some("0.2")),
    ("synth.bias", Some("1.4")),
    ("synth.noise_std", Some("2")),
    ("synth.humidity_coef", Some("0.6")),
    ("synth.gain_spread", Some("0")),
    ("synth.temp_coef", Some("0.3")),
    ("synth.rh_mean", Some("70")),
    ("synth.rh_amp", Some("20")),
    ("synth.temp_mean", Some("22")),
    ("synth.temp_amp", Some("5")),
];

const SEED_KEYS: [&str; 4] = ["seed.scenario", "seed.calibration_split", "seed.cv_folds", "seed.forest"];

/// Raw parsed manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub path: PathBuf,
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Manifest, CliError> {
        let mut entries = BTreeMap::new();
        let mut problems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                problems.push(format!("line {}: duplicate key `{k}`", i + 1));
            }
        }
        let unknown: Vec<&String> = entries.keys().filter(|k| !KEYS.iter().any(|(n, _)| n == k)).collect();
        if !unknown.is_empty() {
            problems.push(format!(
                "unknown keys: {}",
                unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ));
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(format!("{}: {}", path.display(), problems.join("; "))));
        }
        Ok(Manifest {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Manifest, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
        Manifest::parse(&text, path)
    }

    /// Apply `--seed-override k=v`; `k` is a seed key with or without the
    /// `seed.` prefix.
    pub fn override_seed(&mut self, spec: &str) -> Result<(), CliError> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--seed-override expects k=v, got `{spec}`")))?;
        let k = k.trim();
        let key = if k.starts_with("seed.") { k.to_string() } else { format!("seed.{k}") };
        if !SEED_KEYS.contains(&key.as_str()) {
            return Err(CliError::Validation(format!("--seed-override: unknown seed key `{k}`")));
        }
        self.entries.insert(key, v.trim().to_string());
        Ok(())
    }

    pub fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

/// Typed lookups that collect every problem before failing.
struct Reader<'a> {
    m: &'a Manifest,
    problems: Vec<String>,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.m
            .entries
            .get(key)
            .map(String::as_str)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| *d))
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Option<T> {
        let v = self.raw(key)?;
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.problems.push(format!("{key}: cannot parse `{v}`"));
                None
            }
        }
    }

    fn req<T: FromStr + Default>(&mut self, key: &str) -> T {
        if self.raw(key).is_none() {
            self.problems.push(format!("{key}: required"));
            return T::default();
        }
        self.opt(key).unwrap_or_default()
    }

    fn get<T: FromStr + Default>(&mut self, key: &str) -> T {
        self.opt(key).unwrap_or_default()
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Vec<T> {
        let Some(v) = self.raw(key) else {
            return Vec::new();
        };
        let parsed: Option<Vec<T>> = v.split(',').map(|s| s.trim().parse().ok()).collect();
        parsed.unwrap_or_else(|| {
            self.problems.push(format!("{key}: cannot parse list `{v}`"));
            Vec::new()
        })
    }

    fn pair(&mut self, key: &str) -> (f64, f64) {
        let v: Vec<f64> = self.list(key);
        if v.len() == 2 {
            (v[0], v[1])
        } else {
            self.problems.push(format!("{key}: expected `lo,hi`"));
            (0.0, 0.0)
        }
    }

    fn time(&mut self, key: &str) -> Option<i64> {
        let v = self.raw(key)?;
        match parse_utc(v) {
            Ok(t) => Some(t),
            Err(_) => {
                self.problems.push(format!("{key}: cannot parse time `{v}`"));
                None
            }
        }
    }

    /// `auto` or a number.
    fn auto<T: FromStr>(&mut self, key: &str) -> Option<T> {
        match self.raw(key) {
            None | Some("auto") => None,
            Some(_) => self.opt(key),
        }
    }

    fn path(&mut self, key: &str, base: &Path) -> Option<PathBuf> {
        self.raw(key).map(|v| base.join(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    pub fixed: PathBuf,
    pub mobile: PathBuf,
    pub stations: PathBuf,
    pub features: Vec<PathBuf>,
    pub colocation: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSettings {
    pub reference_station: String,
    pub interval: i64,
    pub train_fraction: f64,
    pub split: SplitMode,
    pub apply_to_fleet: bool,
    pub fleet_model: CalibrationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuseSettings {
    pub distance: Option<f64>,
    pub interval: Option<i64>,
    pub min_mobile: u64,
    pub validation: Validation,
    pub min_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSettings {
    pub idw: IdwParams,
    pub png: bool,
    pub start: Option<i64>,
    pub end: Option<i64>,
    pub truth_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub scenario: u64,
    pub calibration_split: u64,
    pub cv_folds: u64,
    pub forest: u64,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: Manifest,
    pub out_dir: PathBuf,
    pub frame: MapFrame,
    pub synth: Option<ScenarioConfig>,
    pub inputs: Inputs,
    pub strict: bool,
    pub calibration: CalibrationSettings,
    pub sweep: SweepConfig,
    pub fuse: FuseSettings,
    pub model: ModelParams,
    pub map: MapSettings,
    pub seeds: Seeds,
}

/// Where `synth` writes the scenario.
pub fn scenario_dir(out: &Path) -> PathBuf {
    out.join("scenario")
}

impl RunConfig {
    pub fn from_manifest(m: Manifest, out_override: Option<&Path>, strict_flag: bool) -> Result<RunConfig, CliError> {
        let base = m.base_dir();
        let mut r = Reader { m: &m, problems: Vec::new() };
        let out_dir = match out_override {
            Some(p) => Some(p.to_path_buf()),
            None => r.path("out_dir", &base),
        };
        if out_dir.is_none() {
            r.problems.push("out_dir: required (or pass --out)".into());
        }
        let out_dir = out_dir.unwrap_or_default();

        let lat: f64 = r.req("grid.origin_lat");
        let lon: f64 = r.req("grid.origin_lon");
        let cell: f64 = r.get("grid.cell_size_m");
        let n_cols: u32 = r.req("grid.n_cols");
        let n_rows: u32 = r.req("grid.n_rows");

        let seeds = Seeds {
            scenario: r.req("seed.scenario"),
            calibration_split: r.req("seed.calibration_split"),
            cv_folds: r.req("seed.cv_folds"),
            forest: r.req("seed.forest"),
        };

        let synth_enabled: bool = r.get("synth.enabled");
        let synth_start = r.time("synth.start").unwrap_or_default();
        let synth = ScenarioConfig {
            seed: seeds.scenario,
            origin: GeoPoint { lat, lon },
            cell_size_m: cell,
            n_cols,
            n_rows,
            start: synth_start,
            duration_s: r.get("synth.duration_s"),
            n_stations: r.get("synth.n_stations"),
            n_taxis: r.get("synth.n_taxis"),
            min_station_separation_m: r.get("synth.min_station_separation_m"),
            road_spacing_m: r.get("synth.road_spacing_m"),
            road_prune: r.get("synth.road_prune"),
            station_noise_std: r.get("synth.station_noise_std"),
            n_colocated: r.get("synth.n_colocated"),
            colocation_duration_s: r.get("synth.colocation_duration_s"),
            truth: TruthSpec {
                background: r.get("synth.background"),
                background_swing: r.get("synth.background_swing"),
                n_plumes: r.get("synth.n_plumes"),
                plume_amp: r.pair("synth.plume_amp"),
                plume_sigma_m: r.pair("synth.plume_sigma_m"),
                max_drift_mps: r.get("synth.max_drift_mps"),
                road_weight: r.get("synth.road_weight"),
                road_decay_m: r.get("synth.road_decay_m"),
                diurnal_amp: r.get("synth.diurnal_amp"),
            },
            sensor: SensorSpec {
                bias: r.get("synth.bias"),
                noise_std: r.get("synth.noise_std"),
                humidity_coef: r.get("synth.humidity_coef"),
                gain_spread: r.get("synth.gain_spread"),
                temp_coef: r.get("synth.temp_coef"),
            },
            weather: WeatherSpec {
                rh_mean: r.get("synth.rh_mean"),
                rh_amp: r.get("synth.rh_amp"),
                temp_mean: r.get("synth.temp_mean"),
                temp_amp: r.get("synth.temp_amp"),
            },
            ..ScenarioConfig::default()
        };

        // Synthetic runs read the scenario unless an input is given explicitly.
        let scen = scenario_dir(&out_dir);
        let input = |r: &mut Reader, key: &str, file: &str, required: bool| -> Option<PathBuf> {
            match r.path(key, &base) {
                Some(p) => Some(p),
                None if synth_enabled => Some(scen.join(file)),
                None => {
                    if required {
                        r.problems.push(format!("{key}: required when synth.enabled = false"));
                    }
                    None
                }
            }
        };
        let fixed = input(&mut r, "inputs.fixed", "fixed.csv", true).unwrap_or_default();
        let mobile = input(&mut r, "inputs.mobile", "mobile.csv", true).unwrap_or_default();
        let stations = input(&mut r, "inputs.stations", "stations.csv", true).unwrap_or_default();
        let colocation = input(&mut r, "inputs.colocation", "colocation.csv", false);
        let reference = input(&mut r, "inputs.reference", "reference.csv", false);
        let features = match r.raw("inputs.features") {
            Some(v) => v.split(',').map(|s| base.join(s.trim())).collect(),
            None if synth_enabled => vec![scen.join("features.csv")],
            None => Vec::new(),
        };
        let truth_dir = match r.path("map.truth_dir", &base) {
            Some(p) => Some(p),
            None if synth_enabled => Some(scen.join("truth")),
            None => None,
        };

        let strict = strict_flag || r.get::<bool>("ingest.strict");
        let calibration = CalibrationSettings {
            reference_station: r.get("calibration.reference_station"),
            interval: r.get("calibration.interval_s"),
            train_fraction: r.get("calibration.train_fraction"),
            split: r.opt("calibration.split").unwrap_or(SplitMode::Random),
            apply_to_fleet: r.get("calibration.apply_to_fleet"),
            fleet_model: r.opt("calibration.fleet_model").unwrap_or(CalibrationKind::Boosted),
        };
        let sweep = SweepConfig {
            distances: r.list("sweep.distances_m"),
            intervals: r.list("sweep.intervals_s"),
            tolerance: r.get("sweep.tolerance"),
            min_pairs: r.get("sweep.min_pairs"),
            min_stations: r.get("sweep.min_stations"),
        };
        let validation = match r.raw("fuse.validation") {
            Some("kfold") => Validation::KFold(r.get("fuse.folds")),
            Some("loso") => Validation::LeaveOneStationOut,
            other => {
                r.problems.push(format!("fuse.validation: expected kfold or loso, got `{}`", other.unwrap_or("")));
                Validation::KFold(5)
            }
        };
        let fuse = FuseSettings {
            distance: r.auto("fuse.distance_m"),
            interval: r.auto("fuse.interval_s"),
            min_mobile: r.opt("fuse.min_mobile").unwrap_or(DEFAULT_MIN_MOBILE),
            validation,
            min_rows: r.opt("fuse.min_rows").unwrap_or(MIN_COMPARE_ROWS),
        };
        let depth: usize = r.get("model.forest.max_depth");
        let model = ModelParams {
            gbt: GbtParams {
                n_trees: r.get("model.gbt.n_trees"),
                max_depth: r.get("model.gbt.max_depth"),
                learning_rate: r.get("model.gbt.learning_rate"),
                subsample: r.get("model.gbt.subsample"),
                seed: seeds.forest,
                ..GbtParams::default()
            },
            forest: ForestParams {
                n_trees: r.get("model.forest.n_trees"),
                tree: TreeParams {
                    max_depth: depth,
                    ..ForestParams::default().tree
                },
                seed: seeds.forest,
                ..ForestParams::default()
            },
            knn_k: r.get("model.knn.k"),
            lasso: LassoCv {
                folds: r.get("model.lasso.folds"),
                n_lambdas: r.get("model.lasso.n_lambdas"),
                seed: seeds.cv_folds,
                ..LassoCv::default()
            },
            ..ModelParams::default()
        };
        let k: usize = r.get("map.k_nearest");
        let map = MapSettings {
            idw: IdwParams {
                power: r.get("map.idw_power"),
                k_nearest: (k > 0).then_some(k),
            },
            png: r.get("map.png"),
            start: r.time("map.start"),
            end: r.time("map.end"),
            truth_dir,
        };

        let frame = MapFrame::from_geo_origin(GeoPoint { lat, lon }, cell, n_cols, n_rows);
        if let Err(e) = &frame {
            r.problems.push(format!("grid: {e}"));
        }
        if !(calibration.train_fraction > 0.0 && calibration.train_fraction < 1.0) {
            r.problems.push("calibration.train_fraction: must lie in (0, 1)".into());
        }
        if !(map.idw.power > 0.0) {
            r.problems.push("map.idw_power: must be positive".into());
        }
        let synth = if synth_enabled {
            if let Err(e) = synth.validate() {
                r.problems.push(format!("synth: {e}"));
            }
            Some(synth)
        } else {
            None
        };
        if !r.problems.is_empty() {
            return Err(CliError::Validation(r.problems.join("; ")));
        }
        Ok(RunConfig {
            manifest: m.clone(),
            out_dir,
            frame: frame.expect("checked above"),
            synth,
            inputs: Inputs {
                fixed,
                mobile,
                stations,
                features,
                colocation,
                reference,
            },
            strict,
            calibration,
            sweep,
            fuse,
            model,
            map,
            seeds,
        })
    }

    /// Resolved value of every key, for stage logs.
    pub fn resolved(&self, prefixes: &[&str]) -> Vec<(String, String)> {
        KEYS.iter()
            .filter(|(k, _)| prefixes.iter().any(|p| k.starts_with(p)))
            .filter_map(|(k, d)| {
                self.manifest
                    .entries
                    .get(*k)
                    .map(String::as_str)
                    .or(*d)
                    .map(|v| (k.to_string(), v.to_string()))
            })
            .collect()
    }
}
