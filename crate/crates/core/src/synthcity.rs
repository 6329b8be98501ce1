//! Deterministic synthetic city: a known pollution field, a road lattice,
//! taxis random-walking on it with biased sensors, and fixed stations.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::align::TimeKey;
use crate::clamp_pm25;
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, GridSpec, MapFrame, ProjectedPoint};
use crate::ingest::{FixedRecord, MobileRecord, StationInfo};
use crate::maps::{MapSource, PollutionMap};
use crate::numeric::substream;
use crate::timefmt::{format_basic, format_utc};

/// Sub-samples per cell side when averaging the truth over a cell.
pub const TRUTH_SUBSAMPLES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    /// Regional background, µg/m³.
    pub background: f64,
    /// Relative amplitude of the slow background modulation.
    pub background_swing: f64,
    pub n_plumes: usize,
    pub plume_amp: (f64, f64),
    pub plume_sigma_m: (f64, f64),
    pub max_drift_mps: f64,
    /// Peak road increment at a primary road; secondary roads get half.
    pub road_weight: f64,
    pub road_decay_m: f64,
    pub diurnal_amp: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec {
            background: 25.0,
            background_swing: 0.25,
            n_plumes: 5,
            plume_amp: (20.0, 60.0),
            plume_sigma_m: (350.0, 900.0),
            max_drift_mps: 0.15,
            road_weight: 8.0,
            road_decay_m: 60.0,
            diurnal_amp: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub bias: f64,
    pub noise_std: f64,
    /// Coefficient `h` of the `(rh/100)^3` gain term.
    pub humidity_coef: f64,
    /// Additive µg/m³ per °C above 20 °C.
    pub temp_coef: f64,
    /// Log-normal sigma of each taxi device's gain around `bias`.
    pub gain_spread: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            bias: 1.4,
            noise_std: 2.0,
            humidity_coef: 0.6,
            temp_coef: 0.3,
            gain_spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSpec {
    pub rh_mean: f64,
    pub rh_amp: f64,
    pub temp_mean: f64,
    pub temp_amp: f64,
}

impl Default for WeatherSpec {
    fn default() -> Self {
        WeatherSpec {
            rh_mean: 70.0,
            rh_amp: 20.0,
            temp_mean: 22.0,
            temp_amp: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Lower-left corner of the city, which is also the map grid's extent.
    pub origin: GeoPoint,
    pub cell_size_m: f64,
    pub n_cols: u32,
    pub n_rows: u32,
    pub start: i64,
    pub duration_s: i64,
    pub n_stations: usize,
    pub n_taxis: usize,
    pub min_station_separation_m: f64,
    pub road_spacing_m: f64,
    /// Edge-pruning probability at the city edge; zero at the center.
    pub road_prune: f64,
    pub taxi_speed_mps: (f64, f64),
    pub sample_interval_s: i64,
    pub station_interval_s: i64,
    /// Gaussian measurement noise of the reference stations, µg/m³.
    pub station_noise_std: f64,
    /// Devices co-located with the first station ahead of `start`.
    pub n_colocated: usize,
    pub colocation_duration_s: i64,
    /// Interval of the emitted truth grids.
    pub truth_interval_s: i64,
    pub truth: TruthSpec,
    pub sensor: SensorSpec,
    pub weather: WeatherSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            origin: GeoPoint { lat: 23.08, lon: 113.25 },
            cell_size_m: 500.0,
            n_cols: 12,
            n_rows: 12,
            start: 1_677_657_600 + 8 * 3600,
            duration_s: 3 * 3600,
            n_stations: 8,
            n_taxis: 150,
            min_station_separation_m: 1200.0,
            road_spacing_m: 400.0,
            road_prune: 0.3,
            taxi_speed_mps: (5.0, 10.0),
            sample_interval_s: 15,
            station_interval_s: 300,
            station_noise_std: 0.0,
            n_colocated: 3,
            colocation_duration_s: 3 * 86_400,
            truth_interval_s: 300,
            truth: TruthSpec::default(),
            sensor: SensorSpec::default(),
            weather: WeatherSpec::default(),
        }
    }
}

impl ScenarioConfig {
    /// Check every field, listing all offenders at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let mut need = |ok: bool, key: &str| {
            if !ok {
                bad.push(key.to_string());
            }
        };
        need(self.origin.validate().is_ok(), "origin");
        need(self.cell_size_m > 0.0 && self.cell_size_m.is_finite(), "cell_size_m");
        need(self.n_cols >= 1, "n_cols");
        need(self.n_rows >= 1, "n_rows");
        need(self.duration_s >= 1, "duration_s");
        need(self.n_stations >= 1, "n_stations");
        need(self.n_taxis >= 1, "n_taxis");
        need(self.min_station_separation_m >= 0.0, "min_station_separation_m");
        need(self.road_spacing_m > 0.0, "road_spacing_m");
        need((0.0..1.0).contains(&self.road_prune), "road_prune");
        need(self.taxi_speed_mps.0 > 0.0 && self.taxi_speed_mps.0 <= self.taxi_speed_mps.1, "taxi_speed_mps");
        need(self.sample_interval_s >= 1, "sample_interval_s");
        need(self.station_interval_s >= 1, "station_interval_s");
        need(self.station_noise_std >= 0.0 && self.station_noise_std.is_finite(), "station_noise_std");
        need(self.colocation_duration_s >= 0, "colocation_duration_s");
        need(self.truth_interval_s >= 1, "truth_interval_s");
        let t = &self.truth;
        need(t.background >= 0.0, "truth.background");
        need((0.0..1.0).contains(&t.background_swing), "truth.background_swing");
        need(t.n_plumes <= 64, "truth.n_plumes");
        need(t.plume_amp.0 >= 0.0 && t.plume_amp.0 <= t.plume_amp.1, "truth.plume_amp");
        need(t.plume_sigma_m.0 > 0.0 && t.plume_sigma_m.0 <= t.plume_sigma_m.1, "truth.plume_sigma_m");
        need(t.max_drift_mps >= 0.0, "truth.max_drift_mps");
        need(t.road_weight >= 0.0, "truth.road_weight");
        need(t.road_decay_m > 0.0, "truth.road_decay_m");
        need((0.0..1.0).contains(&t.diurnal_amp), "truth.diurnal_amp");
        let s = &self.sensor;
        need(s.bias > 0.0, "sensor.bias");
        need(s.noise_std >= 0.0 && s.noise_std.is_finite(), "sensor.noise_std");
        need(s.humidity_coef >= 0.0, "sensor.humidity_coef");
        need(s.temp_coef.is_finite(), "sensor.temp_coef");
        need(s.gain_spread >= 0.0 && s.gain_spread.is_finite(), "sensor.gain_spread");
        let w = &self.weather;
        need(w.rh_amp >= 0.0 && w.rh_mean - w.rh_amp >= 0.0 && w.rh_mean + w.rh_amp <= 100.0, "weather.rh");
        need(w.temp_amp >= 0.0 && w.temp_mean - w.temp_amp >= -10.0 && w.temp_mean + w.temp_amp <= 60.0, "weather.temp");
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid scenario fields: {}", bad.join(", "))))
        }
    }

    pub fn frame(&self) -> Result<MapFrame> {
        MapFrame::from_geo_origin(self.origin, self.cell_size_m, self.n_cols, self.n_rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plume {
    pub center: ProjectedPoint,
    /// Drift velocity, m/s.
    pub vx: f64,
    pub vy: f64,
    pub amp: f64,
    pub sigma: f64,
}

impl Plume {
    pub fn center_at(&self, dt: f64) -> ProjectedPoint {
        self.center.offset(self.vx * dt, self.vy * dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoadClass {
    Primary,
    Secondary,
}

impl RoadClass {
    pub fn layer(&self) -> &'static str {
        match self {
            RoadClass::Primary => "road_length.primary",
            RoadClass::Secondary => "road_length.secondary",
        }
    }
}

/// Lattice road graph. Every edge is axis-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub nodes: Vec<ProjectedPoint>,
    pub edges: Vec<(usize, usize, RoadClass)>,
    adjacency: Vec<Vec<usize>>,
}

impl RoadNetwork {
    /// Neighbouring node ids.
    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Nodes with at least one edge.
    pub fn connected_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.adjacency[i].is_empty()).collect()
    }

    /// Distance from `p` to the nearest road, `f64::INFINITY` without roads.
    pub fn distance_to(&self, p: ProjectedPoint) -> f64 {
        self.edges
            .iter()
            .map(|&(a, b, _)| segment_distance(p, self.nodes[a], self.nodes[b]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(p: ProjectedPoint, a: ProjectedPoint, b: ProjectedPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let u = if len2 > 0.0 { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.x - a.x - u * dx).powi(2) + (p.y - a.y - u * dy).powi(2)).sqrt()
}

/// Square lattice offset from the grid lines by 0.375 spacing, so roads never
/// run along 500 m or 1 km cell edges. Edges are pruned with a probability
/// that grows linearly from zero at the center to `prune` at the boundary;
/// only the largest connected piece is kept.
pub fn road_lattice(grid: &GridSpec, spacing: f64, prune: f64, rng: &mut ChaCha8Rng) -> RoadNetwork {
    let off = 0.375 * spacing;
    let xs: Vec<f64> = (0..).map(|i| grid.origin.x + off + i as f64 * spacing).take_while(|x| *x < grid.max_corner().x).collect();
    let ys: Vec<f64> = (0..).map(|j| grid.origin.y + off + j as f64 * spacing).take_while(|y| *y < grid.max_corner().y).collect();
    let (nx, ny) = (xs.len(), ys.len());
    let nodes: Vec<ProjectedPoint> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| ProjectedPoint::new(x, y))).collect();
    let center = ProjectedPoint::new(grid.origin.x + grid.width() / 2.0, grid.origin.y + grid.height() / 2.0);
    let radius = (grid.width().powi(2) + grid.height().powi(2)).sqrt() / 2.0;
    let mut edges = Vec::new();
    let class = |i: usize| if i % 3 == 1 { RoadClass::Primary } else { RoadClass::Secondary };
    for j in 0..ny {
        for i in 0..nx {
            let id = j * nx + i;
            let mut candidates = Vec::with_capacity(2);
            if i + 1 < nx {
                candidates.push((id, id + 1, class(j)));
            }
            if j + 1 < ny {
                candidates.push((id, id + nx, class(i)));
            }
            for (a, b, c) in candidates {
                let mid = ProjectedPoint::new((nodes[a].x + nodes[b].x) / 2.0, (nodes[a].y + nodes[b].y) / 2.0);
                let p = prune * (mid.distance(&center) / radius).min(1.0);
                let draw: f64 = rng.random();
                if c == RoadClass::Primary || draw >= p {
                    edges.push((a, b, c));
                }
            }
        }
    }
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for &(a, b, _) in &edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    // Keep the largest component.
    let mut comp = vec![usize::MAX; nodes.len()];
    let mut sizes = Vec::new();
    for s in 0..nodes.len() {
        if comp[s] != usize::MAX || adjacency[s].is_empty() {
            continue;
        }
        let id = sizes.len();
        let mut q = VecDeque::from([s]);
        comp[s] = id;
        let mut n = 0;
        while let Some(u) = q.pop_front() {
            n += 1;
            for &v in &adjacency[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    q.push_back(v);
                }
            }
        }
        sizes.push(n);
    }
    let keep = sizes.iter().enumerate().max_by_key(|(i, n)| (**n, usize::MAX - i)).map(|(i, _)| i);
    edges.retain(|&(a, _, _)| Some(comp[a]) == keep);
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for &(a, b, _) in &edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    RoadNetwork { nodes, edges, adjacency }
}

/// The known concentration field.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthField {
    pub start: i64,
    pub background: f64,
    /// (relative amplitude, period s, phase) of the background modulation.
    pub swings: Vec<(f64, f64, f64)>,
    pub plumes: Vec<Plume>,
    /// Axis-aligned road segments with their peak increments.
    pub roads: Vec<(ProjectedPoint, ProjectedPoint, f64)>,
    pub road_decay_m: f64,
    pub diurnal_amp: f64,
}

/// Fractional UTC hour of day.
pub fn hour_of_day(t: i64) -> f64 {
    t.rem_euclid(86_400) as f64 / 3600.0
}

impl TruthField {
    pub fn diurnal(&self, t: i64) -> f64 {
        1.0 + self.diurnal_amp * (2.0 * PI * (hour_of_day(t) - 11.0) / 24.0).sin()
    }

    pub fn background_at(&self, t: i64) -> f64 {
        let dt = (t - self.start) as f64;
        self.background * (1.0 + self.swings.iter().map(|&(a, p, ph)| a * (2.0 * PI * dt / p + ph).sin()).sum::<f64>())
    }

    pub fn road_term(&self, p: ProjectedPoint) -> f64 {
        self.roads
            .iter()
            .map(|&(a, b, w)| w * (-segment_distance(p, a, b) / self.road_decay_m).exp())
            .fold(0.0, f64::max)
    }

    pub fn plume_term(&self, p: ProjectedPoint, t: i64) -> f64 {
        let dt = (t - self.start) as f64;
        self.plumes
            .iter()
            .map(|pl| {
                let c = pl.center_at(dt);
                let d2 = (p.x - c.x).powi(2) + (p.y - c.y).powi(2);
                pl.amp * (-d2 / (2.0 * pl.sigma * pl.sigma)).exp()
            })
            .sum()
    }

    /// Concentration at `p` and time `t`, µg/m³. The diurnal cycle scales local sources only.
    pub fn eval(&self, p: ProjectedPoint, t: i64) -> f64 {
        clamp_pm25(self.background_at(t) + self.diurnal(t) * (self.plume_term(p, t) + self.road_term(p)))
    }
}

/// Shared fleet weather.
#[derive(Debug, Clone, PartialEq)]
pub struct Weather {
    pub spec: WeatherSpec,
}

impl Weather {
    /// Relative humidity, lowest mid-afternoon.
    pub fn rh(&self, t: i64) -> f64 {
        self.spec.rh_mean + self.spec.rh_amp * (2.0 * PI * (hour_of_day(t) - 9.0) / 24.0).cos()
    }

    /// Temperature, highest mid-afternoon.
    pub fn temp(&self, t: i64) -> f64 {
        self.spec.temp_mean + self.spec.temp_amp * (2.0 * PI * (hour_of_day(t) - 15.0) / 24.0).cos()
    }
}

/// Sensor reading for a true concentration.
pub fn sensor_reading(s: &SensorSpec, truth: f64, rh: f64, temp: f64, noise: f64) -> f64 {
    truth * s.bias * (1.0 + s.humidity_coef * (rh / 100.0).powi(3)) + s.temp_coef * (temp - 20.0) + noise
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub pos: ProjectedPoint,
    pub geo: GeoPoint,
}

/// A generated scenario held in memory.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub frame: MapFrame,
    pub field: TruthField,
    pub weather: Weather,
    pub roads: RoadNetwork,
    pub stations: Vec<Station>,
    pub fixed: Vec<FixedRecord>,
    pub mobile: Vec<MobileRecord>,
    /// Reference station series over the co-location window.
    pub reference: Vec<FixedRecord>,
    /// Co-located device readings at the reference station.
    pub colocation: Vec<MobileRecord>,
    /// Feature geometry rows: (layer, kind, corner or vertex points).
    pub features: Vec<(String, &'static str, Vec<ProjectedPoint>)>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

fn build_field(cfg: &ScenarioConfig, grid: &GridSpec, roads: &RoadNetwork, rng: &mut ChaCha8Rng) -> TruthField {
    let t = &cfg.truth;
    let inset = 0.1;
    let plumes = (0..t.n_plumes)
        .map(|_| {
            let x = grid.origin.x + grid.width() * rng.random_range(inset..1.0 - inset);
            let y = grid.origin.y + grid.height() * rng.random_range(inset..1.0 - inset);
            let dir: f64 = rng.random_range(0.0..2.0 * PI);
            let speed = t.max_drift_mps * rng.random::<f64>();
            Plume {
                center: ProjectedPoint::new(x, y),
                vx: speed * dir.cos(),
                vy: speed * dir.sin(),
                amp: uniform(rng, t.plume_amp),
                sigma: uniform(rng, t.plume_sigma_m),
            }
        })
        .collect();
    let swing_each = t.background_swing / 3.0;
    let swings = (0..3)
        .map(|_| (swing_each, rng.random_range(5.0..40.0) * 3600.0, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let road_list = roads
        .edges
        .iter()
        .map(|&(a, b, c)| {
            let w = match c {
                RoadClass::Primary => t.road_weight,
                RoadClass::Secondary => t.road_weight / 2.0,
            };
            (roads.nodes[a], roads.nodes[b], w)
        })
        .collect();
    TruthField {
        start: cfg.start,
        background: t.background,
        swings,
        plumes,
        roads: road_list,
        road_decay_m: t.road_decay_m,
        diurnal_amp: t.diurnal_amp,
    }
}

fn place_stations(cfg: &ScenarioConfig, frame: &MapFrame, rng: &mut ChaCha8Rng) -> Result<Vec<Station>> {
    let g = &frame.grid;
    let mut out: Vec<Station> = Vec::with_capacity(cfg.n_stations);
    let mut tries = 0;
    while out.len() < cfg.n_stations {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::Config(format!(
                "cannot place {} stations {} m apart; lower n_stations or min_station_separation_m",
                cfg.n_stations, cfg.min_station_separation_m
            )));
        }
        let p = ProjectedPoint::new(
            g.origin.x + g.width() * rng.random_range(0.03..0.97),
            g.origin.y + g.height() * rng.random_range(0.03..0.97),
        );
        if out.iter().all(|s| s.pos.distance(&p) >= cfg.min_station_separation_m) {
            out.push(Station {
                id: format!("S{:02}", out.len() + 1),
                pos: p,
                geo: frame.projection.unproject(p),
            });
        }
    }
    Ok(out)
}

/// One taxi's readings over the scenario window.
fn drive_taxi(cfg: &ScenarioConfig, scen: &Scenario, index: usize) -> Vec<MobileRecord> {
    let id = format!("T{:03}", index + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, &format!("taxi.{id}")));
    let noise = Normal::new(0.0, cfg.sensor.noise_std).expect("validated noise std");
    let net = &scen.roads;
    let starts = net.connected_nodes();
    let speed = uniform(&mut rng, cfg.taxi_speed_mps);
    let gain = if cfg.sensor.gain_spread > 0.0 {
        LogNormal::new(0.0, cfg.sensor.gain_spread).expect("validated gain spread").sample(&mut rng)
    } else {
        1.0
    };
    let sensor = SensorSpec { bias: cfg.sensor.bias * gain, ..cfg.sensor.clone() };
    let mut from = starts[rng.random_range(0..starts.len())];
    let mut prev = usize::MAX;
    let pick = |rng: &mut ChaCha8Rng, at: usize, prev: usize| {
        let nb = net.neighbours(at);
        let options: Vec<usize> = nb.iter().copied().filter(|&n| n != prev).collect();
        if options.is_empty() { nb[0] } else { options[rng.random_range(0..options.len())] }
    };
    let mut to = pick(&mut rng, from, prev);
    let mut along = rng.random_range(0.0..net.nodes[from].distance(&net.nodes[to]));
    let step = speed * cfg.sample_interval_s as f64;
    let n = cfg.duration_s / cfg.sample_interval_s;
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let t = cfg.start + k * cfg.sample_interval_s;
        let (a, b) = (net.nodes[from], net.nodes[to]);
        let len = a.distance(&b);
        let u = along / len;
        let pos = ProjectedPoint::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
        let (rh, temp) = (scen.weather.rh(t), scen.weather.temp(t));
        let truth = scen.field.eval(pos, t);
        out.push(MobileRecord {
            device_id: id.clone(),
            t,
            pos: scen.frame.projection.unproject(pos),
            pm25_raw: sensor_reading(&sensor, truth, rh, temp, noise.sample(&mut rng)),
            rh,
            temp,
        });
        along += step;
        loop {
            let len = net.nodes[from].distance(&net.nodes[to]);
            if along < len {
                break;
            }
            along -= len;
            prev = from;
            from = to;
            to = pick(&mut rng, from, prev);
        }
    }
    out
}

fn building_features(grid: &GridSpec, roads: &RoadNetwork, spacing: f64, rng: &mut ChaCha8Rng) -> Vec<(String, &'static str, Vec<ProjectedPoint>)> {
    let mut out = Vec::new();
    let center = ProjectedPoint::new(grid.origin.x + grid.width() / 2.0, grid.origin.y + grid.height() / 2.0);
    let radius = (grid.width().powi(2) + grid.height().powi(2)).sqrt() / 2.0;
    for n in &roads.nodes {
        // The block north-east of each lattice node.
        let (x0, y0) = (n.x, n.y);
        if x0 + spacing > grid.max_corner().x || y0 + spacing > grid.max_corner().y {
            continue;
        }
        let density = 1.0 - 0.8 * (n.distance(&center) / radius).min(1.0);
        if rng.random::<f64>() < density {
            let w = spacing * rng.random_range(0.2..0.6) * density.max(0.3);
            let h = spacing * rng.random_range(0.2..0.6) * density.max(0.3);
            let x = x0 + rng.random_range(0.1 * spacing..(0.9 * spacing - w).max(0.1 * spacing + 1.0));
            let y = y0 + rng.random_range(0.1 * spacing..(0.9 * spacing - h).max(0.1 * spacing + 1.0));
            out.push(("building_area".to_string(), "rect", vec![ProjectedPoint::new(x, y), ProjectedPoint::new(x + w, y + h)]));
        } else if rng.random::<f64>() < 0.3 {
            let m = 0.15 * spacing;
            out.push((
                "land_cover.green".to_string(),
                "rect",
                vec![ProjectedPoint::new(x0 + m, y0 + m), ProjectedPoint::new(x0 + spacing - m, y0 + spacing - m)],
            ));
        }
    }
    out
}

/// Generate a scenario in memory.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let frame = cfg.frame()?;
    let grid = frame.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "roads"));
    let roads = road_lattice(&grid, cfg.road_spacing_m, cfg.road_prune, &mut rng);
    if roads.edges.is_empty() {
        return Err(Error::Config("road lattice is empty; lower road_spacing_m or enlarge the grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "field"));
    let field = build_field(cfg, &grid, &roads, &mut rng);
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "stations"));
    let stations = place_stations(cfg, &frame, &mut rng)?;

    let mut scen = Scenario {
        config: cfg.clone(),
        frame,
        field,
        weather: Weather { spec: cfg.weather.clone() },
        roads,
        stations,
        fixed: Vec::new(),
        mobile: Vec::new(),
        reference: Vec::new(),
        colocation: Vec::new(),
        features: Vec::new(),
    };

    let station_noise = Normal::new(0.0, cfg.station_noise_std).expect("validated station noise");
    scen.fixed = scen
        .stations
        .iter()
        .flat_map(|s| {
            let field = &scen.field;
            let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, &format!("station.{}", s.id)));
            (0..(cfg.duration_s + cfg.station_interval_s - 1) / cfg.station_interval_s)
                .map(|k| {
                    let t = cfg.start + k * cfg.station_interval_s;
                    FixedRecord {
                        station_id: s.id.clone(),
                        t,
                        pm25: clamp_pm25(field.eval(s.pos, t) + station_noise.sample(&mut rng)),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mobile: Vec<Vec<MobileRecord>> = (0..cfg.n_taxis).into_par_iter().map(|i| drive_taxi(cfg, &scen, i)).collect();
    scen.mobile = mobile.into_iter().flatten().collect();

    let reference = &scen.stations[0];
    let t0 = cfg.start - cfg.colocation_duration_s;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "reference"));
    scen.reference = (0..cfg.colocation_duration_s / cfg.station_interval_s)
        .map(|k| {
            let t = t0 + k * cfg.station_interval_s;
            FixedRecord {
                station_id: reference.id.clone(),
                t,
                pm25: clamp_pm25(scen.field.eval(reference.pos, t) + station_noise.sample(&mut rng)),
            }
        })
        .collect();
    let coloc: Vec<Vec<MobileRecord>> = (0..cfg.n_colocated)
        .into_par_iter()
        .map(|d| {
            let id = format!("L{}", d + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, &format!("colocated.{id}")));
            let noise = Normal::new(0.0, cfg.sensor.noise_std).expect("validated noise std");
            (0..cfg.colocation_duration_s / cfg.sample_interval_s)
                .map(|k| {
                    let t = t0 + k * cfg.sample_interval_s;
                    let (rh, temp) = (scen.weather.rh(t), scen.weather.temp(t));
                    MobileRecord {
                        device_id: id.clone(),
                        t,
                        pos: reference.geo,
                        pm25_raw: sensor_reading(&cfg.sensor, scen.field.eval(reference.pos, t), rh, temp, noise.sample(&mut rng)),
                        rh,
                        temp,
                    }
                })
                .collect()
        })
        .collect();
    scen.colocation = coloc.into_iter().flatten().collect();

    let mut features: Vec<(String, &'static str, Vec<ProjectedPoint>)> = scen
        .roads
        .edges
        .iter()
        .map(|&(a, b, c)| (c.layer().to_string(), "polyline", vec![scen.roads.nodes[a], scen.roads.nodes[b]]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "buildings"));
    features.extend(building_features(&grid, &scen.roads, cfg.road_spacing_m, &mut rng));
    let (lo, hi) = (grid.origin, grid.max_corner());
    for pl in &scen.field.plumes {
        let c = pl.center;
        let r = pl.sigma;
        features.push((
            "land_use.industrial".to_string(),
            "rect",
            vec![
                ProjectedPoint::new((c.x - r).max(lo.x), (c.y - r).max(lo.y)),
                ProjectedPoint::new((c.x + r).min(hi.x), (c.y + r).min(hi.y)),
            ],
        ));
    }
    scen.features = features;
    Ok(scen)
}

/// Truth averaged over a 4×4 sub-sample lattice in each cell at `time.start`.
pub fn truth_map(field: &TruthField, grid: &GridSpec, time: TimeKey) -> PollutionMap {
    let n = TRUTH_SUBSAMPLES;
    let values: Vec<Option<f64>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let (lo, _) = grid.cell_bounds(grid.key_at(i));
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let p = lo.offset(grid.cell_size * (a as f64 + 0.5) / n as f64, grid.cell_size * (b as f64 + 0.5) / n as f64);
                    s += field.eval(p, time.start);
                }
            }
            Some(s / (n * n) as f64)
        })
        .collect();
    PollutionMap {
        grid: *grid,
        time,
        source: MapSource::Fixed,
        observed: values.clone(),
        values,
    }
}

fn write_file(dir: &Path, rel: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
}

fn write_fixed(w: &mut dyn Write, recs: &[FixedRecord]) -> std::io::Result<()> {
    writeln!(w, "station_id,timestamp,pm25")?;
    for r in recs {
        writeln!(w, "{},{},{:.4}", r.station_id, format_utc(r.t), r.pm25)?;
    }
    Ok(())
}

fn write_mobile(w: &mut dyn Write, recs: &[MobileRecord]) -> std::io::Result<()> {
    writeln!(w, "device_id,timestamp,lat,lon,pm25,rh,temp")?;
    for r in recs {
        writeln!(
            w,
            "{},{},{:.7},{:.7},{:.3},{:.2},{:.2}",
            r.device_id,
            format_utc(r.t),
            r.pos.lat,
            r.pos.lon,
            r.pm25_raw,
            r.rh,
            r.temp
        )?;
    }
    Ok(())
}

/// SHA-256 of a file as lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Scenario {
    pub fn station_info(&self) -> Vec<StationInfo> {
        self.stations
            .iter()
            .map(|s| StationInfo {
                station_id: s.id.clone(),
                pos: s.geo,
            })
            .collect()
    }

    /// Truth maps on the scenario grid, one per truth interval.
    pub fn truth_maps(&self) -> Vec<PollutionMap> {
        let cfg = &self.config;
        (0..cfg.duration_s / cfg.truth_interval_s)
            .map(|k| {
                let time = TimeKey {
                    start: cfg.start + k * cfg.truth_interval_s,
                    len: cfg.truth_interval_s,
                };
                truth_map(&self.field, &self.frame.grid, time)
            })
            .collect()
    }

    /// Write every scenario file plus a `MANIFEST` of SHA-256 checksums.
    /// Returns the manifest entries as (relative path, checksum).
    pub fn write(&self, dir: &Path) -> Result<Vec<(String, String)>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            "stations.csv".to_string(),
            "fixed.csv".to_string(),
            "mobile.csv".to_string(),
            "reference.csv".to_string(),
            "colocation.csv".to_string(),
            "features.csv".to_string(),
            "truth/plumes.csv".to_string(),
        ];
        write_file(dir, "stations.csv", |w| {
            writeln!(w, "station_id,lat,lon")?;
            for s in &self.stations {
                writeln!(w, "{},{:.7},{:.7}", s.id, s.geo.lat, s.geo.lon)?;
            }
            Ok(())
        })?;
        write_file(dir, "fixed.csv", |w| write_fixed(w, &self.fixed))?;
        write_file(dir, "mobile.csv", |w| write_mobile(w, &self.mobile))?;
        write_file(dir, "reference.csv", |w| write_fixed(w, &self.reference))?;
        write_file(dir, "colocation.csv", |w| write_mobile(w, &self.colocation))?;
        write_file(dir, "features.csv", |w| {
            writeln!(w, "layer,kind,lat1,lon1,lat2,lon2")?;
            for (layer, kind, pts) in &self.features {
                write!(w, "{layer},{kind}")?;
                for p in pts {
                    let g = self.frame.projection.unproject(*p);
                    write!(w, ",{:.7},{:.7}", g.lat, g.lon)?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        write_file(dir, "truth/plumes.csv", |w| {
            writeln!(w, "plume,x_m,y_m,vx_mps,vy_mps,amp,sigma_m")?;
            for (i, p) in self.field.plumes.iter().enumerate() {
                writeln!(w, "{},{:.3},{:.3},{:.6},{:.6},{:.4},{:.3}", i + 1, p.center.x, p.center.y, p.vx, p.vy, p.amp, p.sigma)?;
            }
            Ok(())
        })?;
        for m in self.truth_maps() {
            let rel = format!("truth/truth_{}_{}.csv", format_basic(m.time.start), m.time.len);
            write_file(dir, &rel, |mut w| {
                m.write_csv(&mut w).map_err(|e| std::io::Error::other(e.to_string()))
            })?;
            files.push(rel);
        }
        files.sort();
        let mut entries = Vec::with_capacity(files.len());
        for f in &files {
            entries.push((f.clone(), file_sha256(&dir.join(f))?));
        }
        write_file(dir, "MANIFEST", |w| {
            for (f, h) in &entries {
                writeln!(w, "{h}  {f}")?;
            }
            Ok(())
        })?;
        Ok(entries)
    }
}

/// Parse a `MANIFEST` (`<sha256>  <path>` per line).
pub fn read_manifest(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(h, f)| (f.to_string(), h.to_string()))
        .collect()
}
