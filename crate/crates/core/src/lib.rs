//! Fusion of mobile low-cost-sensor and fixed-station PM2.5 measurements
//! into gridded pollution maps.
//!
//! Pipeline stages, bottom up:
//!
//! 1. [`geo`]: local projection, regular grids and station-centered squares.
//! 2. [`ingest`]: CSV readers with range QC and urban-feature rasterization.
//! 3. [`calibrate`]: co-location matching and the four sensor correction models.
//! 4. [`align`]: (cell, interval) aggregation and the resolution sweep.
//! 5. [`learn`]: regression engines (OLS, lasso, kNN, trees, forest, boosting).
//! 6. [`fuse`]: mapping-model training table, model comparison, mapped values.
//! 7. [`maps`]: IDW map products and per-map statistics.
//!
//! [`metrics`] holds the scalar and spatial statistics used throughout, and
//! [`synthcity`] generates deterministic synthetic scenarios with known truth.

pub mod align;
pub mod calibrate;
pub mod error;
pub mod fuse;
pub mod geo;
pub mod ingest;
pub mod learn;
pub mod maps;
pub mod metrics;
pub mod numeric;
pub mod synthcity;
pub mod timefmt;

pub use align::{CellId, CellSample, StatSummary, SweepResult, TimeKey};
pub use error::{Error, Result};
pub use geo::{CellKey, GeoPoint, GridSpec, LocalProjection, MapFrame, ProjectedPoint, StationCell};
pub use ingest::{FixedRecord, IngestReport, MobileRecord, ParseMode, StationInfo, UrbanFeatureLayer};
pub use learn::{Dataset, GainTable, Regressor, RegressorKind};
pub use maps::{MapSource, PollutionMap};
pub use metrics::{MetricReport, PairedSeries};

/// Lower bound of the valid PM2.5 measurement range, µg/m³.
pub const PM25_MIN: f64 = 0.0;
/// Upper bound of the valid PM2.5 measurement range, µg/m³.
pub const PM25_MAX: f64 = 500.0;

/// Clamp a concentration to the valid measurement range.
pub fn clamp_pm25(v: f64) -> f64 {
    v.clamp(PM25_MIN, PM25_MAX)
}
