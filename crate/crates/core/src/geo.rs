//! Spatial addressing: local projection, regular grids and station squares.
//!
//! Everything downstream works in a local tangent plane measured in meters.
//! The projection is equirectangular about a reference point on a spherical
//! Earth, which is accurate to well below a meter over a city-sized area.

use crate::error::{Error, Result};

/// Mean Earth radius, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maximum angular distance from the projection reference, degrees.
pub const MAX_PROJECTION_SPAN_DEG: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::Coordinate(format!("latitude {} out of range", self.lat)));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::Coordinate(format!("longitude {} out of range", self.lon)));
        }
        Ok(())
    }
}

/// Meters east (`x`) and north (`y`) of a projection reference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
}

impl ProjectedPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        ProjectedPoint { x, y }
    }

    pub fn distance(&self, other: &ProjectedPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> ProjectedPoint {
        ProjectedPoint::new(self.x + dx, self.y + dy)
    }
}

/// Local equirectangular projection about a fixed reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalProjection {
    reference: GeoPoint,
    cos_ref: f64,
}

impl LocalProjection {
    pub fn new(reference: GeoPoint) -> Result<Self> {
        reference.validate()?;
        if reference.lat.abs() >= 89.0 {
            return Err(Error::Coordinate(format!(
                "reference latitude {} too close to a pole",
                reference.lat
            )));
        }
        Ok(LocalProjection {
            reference,
            cos_ref: reference.lat.to_radians().cos(),
        })
    }

    pub fn reference(&self) -> GeoPoint {
        self.reference
    }

    pub fn project(&self, p: GeoPoint) -> Result<ProjectedPoint> {
        p.validate()?;
        let dlat = p.lat - self.reference.lat;
        let dlon = p.lon - self.reference.lon;
        if dlat.abs() > MAX_PROJECTION_SPAN_DEG || dlon.abs() > MAX_PROJECTION_SPAN_DEG {
            return Err(Error::Coordinate(format!(
                "({}, {}) is more than {MAX_PROJECTION_SPAN_DEG}° from the projection reference",
                p.lat, p.lon
            )));
        }
        Ok(self.project_unchecked(p))
    }

    /// Projection without range checks, for inputs already validated.
    #[inline]
    pub fn project_unchecked(&self, p: GeoPoint) -> ProjectedPoint {
        ProjectedPoint {
            x: EARTH_RADIUS_M * self.cos_ref * (p.lon - self.reference.lon).to_radians(),
            y: EARTH_RADIUS_M * (p.lat - self.reference.lat).to_radians(),
        }
    }

    pub fn unproject(&self, p: ProjectedPoint) -> GeoPoint {
        GeoPoint {
            lat: self.reference.lat + (p.y / EARTH_RADIUS_M).to_degrees(),
            lon: self.reference.lon + (p.x / (EARTH_RADIUS_M * self.cos_ref)).to_degrees(),
        }
    }
}

/// Project `p` into the local plane about `reference`.
pub fn project(p: GeoPoint, reference: GeoPoint) -> Result<ProjectedPoint> {
    LocalProjection::new(reference)?.project(p)
}

/// Column/row address of a grid cell. Row 0 is the southern edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub col: u32,
    pub row: u32,
}

impl CellKey {
    pub const fn new(col: u32, row: u32) -> Self {
        CellKey { col, row }
    }
}

/// Regular square tessellation anchored at its lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: ProjectedPoint,
    pub cell_size: f64,
    pub n_cols: u32,
    pub n_rows: u32,
}

impl GridSpec {
    pub fn new(origin: ProjectedPoint, cell_size: f64, n_cols: u32, n_rows: u32) -> Result<Self> {
        let g = GridSpec {
            origin,
            cell_size,
            n_cols,
            n_rows,
        };
        g.validate()?;
        Ok(g)
    }

    /// Smallest grid of `cell_size` cells anchored at `min` that covers `max`.
    pub fn covering(min: ProjectedPoint, max: ProjectedPoint, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Config(format!("cell size {cell_size} must be positive")));
        }
        if !(max.x > min.x && max.y > min.y) {
            return Err(Error::Config("empty bounding box".into()));
        }
        let n_cols = ((max.x - min.x) / cell_size).ceil().max(1.0) as u32;
        let n_rows = ((max.y - min.y) / cell_size).ceil().max(1.0) as u32;
        GridSpec::new(min, cell_size, n_cols, n_rows)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(Error::Config(format!("cell size {} must be positive", self.cell_size)));
        }
        if self.n_cols == 0 || self.n_rows == 0 {
            return Err(Error::Config("grid must have at least one row and column".into()));
        }
        if !self.origin.x.is_finite() || !self.origin.y.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols as usize * self.n_rows as usize
    }

    pub fn width(&self) -> f64 {
        self.n_cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.n_rows as f64 * self.cell_size
    }

    pub fn max_corner(&self) -> ProjectedPoint {
        self.origin.offset(self.width(), self.height())
    }

    /// Cell containing `p`, with half-open `[edge, edge + size)` cells.
    #[inline]
    pub fn cell_of(&self, p: ProjectedPoint) -> Option<CellKey> {
        let fx = ((p.x - self.origin.x) / self.cell_size).floor();
        let fy = ((p.y - self.origin.y) / self.cell_size).floor();
        if fx >= 0.0 && fy >= 0.0 && fx < self.n_cols as f64 && fy < self.n_rows as f64 {
            Some(CellKey::new(fx as u32, fy as u32))
        } else {
            None
        }
    }

    pub fn contains_key(&self, key: CellKey) -> bool {
        key.col < self.n_cols && key.row < self.n_rows
    }

    /// Row-major linear index (row 0 first).
    #[inline]
    pub fn index(&self, key: CellKey) -> usize {
        key.row as usize * self.n_cols as usize + key.col as usize
    }

    pub fn key_at(&self, index: usize) -> CellKey {
        let n = self.n_cols as usize;
        CellKey::new((index % n) as u32, (index / n) as u32)
    }

    pub fn keys(&self) -> impl Iterator<Item = CellKey> + '_ {
        (0..self.n_cells()).map(|i| self.key_at(i))
    }

    pub fn cell_center(&self, key: CellKey) -> ProjectedPoint {
        self.origin.offset(
            (key.col as f64 + 0.5) * self.cell_size,
            (key.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Lower-left and upper-right corners of a cell.
    pub fn cell_bounds(&self, key: CellKey) -> (ProjectedPoint, ProjectedPoint) {
        let lo = self.origin.offset(
            key.col as f64 * self.cell_size,
            key.row as f64 * self.cell_size,
        );
        (lo, lo.offset(self.cell_size, self.cell_size))
    }

    /// Same extent re-tessellated at a different cell size.
    pub fn with_cell_size(&self, cell_size: f64) -> Result<GridSpec> {
        GridSpec::covering(self.origin, self.max_corner(), cell_size)
    }
}

/// A square of side `2 * half_width` centered on a fixed station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationCell {
    pub station_id: String,
    pub center: ProjectedPoint,
    pub half_width: f64,
}

impl StationCell {
    pub fn new(station_id: impl Into<String>, center: ProjectedPoint, side: f64) -> Self {
        StationCell {
            station_id: station_id.into(),
            center,
            half_width: side / 2.0,
        }
    }

    /// Half-open membership: `center - hw <= coord < center + hw` on both axes.
    #[inline]
    pub fn contains(&self, p: ProjectedPoint) -> bool {
        let (lx, ly) = (self.center.x - self.half_width, self.center.y - self.half_width);
        let (hx, hy) = (self.center.x + self.half_width, self.center.y + self.half_width);
        p.x >= lx && p.x < hx && p.y >= ly && p.y < hy
    }
}

pub fn in_station_cell(p: ProjectedPoint, cell: &StationCell) -> bool {
    cell.contains(p)
}

/// A grid tied to geographic coordinates through a local projection whose
/// reference is the grid's centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapFrame {
    pub projection: LocalProjection,
    pub grid: GridSpec,
}

impl MapFrame {
    /// Build from the geographic lower-left corner and grid dimensions.
    pub fn from_geo_origin(origin: GeoPoint, cell_size: f64, n_cols: u32, n_rows: u32) -> Result<Self> {
        origin.validate()?;
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Config(format!("cell size {cell_size} must be positive")));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::Config("grid must have at least one row and column".into()));
        }
        let half_w = n_cols as f64 * cell_size / 2.0;
        let half_h = n_rows as f64 * cell_size / 2.0;
        let c_lat = origin.lat + (half_h / EARTH_RADIUS_M).to_degrees();
        let c_lon = origin.lon + (half_w / (EARTH_RADIUS_M * c_lat.to_radians().cos())).to_degrees();
        let projection = LocalProjection::new(GeoPoint::new(c_lat, c_lon)?)?;
        let grid = GridSpec::new(ProjectedPoint::new(-half_w, -half_h), cell_size, n_cols, n_rows)?;
        Ok(MapFrame { projection, grid })
    }

    pub fn with_cell_size(&self, cell_size: f64) -> Result<MapFrame> {
        Ok(MapFrame {
            projection: self.projection,
            grid: self.grid.with_cell_size(cell_size)?,
        })
    }

    pub fn geo_origin(&self) -> GeoPoint {
        self.projection.unproject(self.grid.origin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(ProjectedPoint::new(-1000.0, 250.0), 500.0, 6, 4).unwrap()
    }

    #[test]
    fn identity_at_reference() {
        let r = GeoPoint::new(23.1, 113.3).unwrap();
        assert_eq!(project(r, r).unwrap(), ProjectedPoint::new(0.0, 0.0));
    }

    #[test]
    fn one_millidegree_north_and_east() {
        // R * 0.001° in radians = 6_371_000 * 1.745329251994e-5
        let expected = 111.194_926_644_558_73;
        let r = GeoPoint::new(23.1, 113.3).unwrap();
        let p = project(GeoPoint::new(23.101, 113.3).unwrap(), r).unwrap();
        assert!(p.x.abs() < 1e-12);
        assert!((p.y - expected).abs() < 1e-6, "{}", p.y);

        let r0 = GeoPoint::new(0.0, 10.0).unwrap();
        let q = project(GeoPoint::new(0.0, 10.001).unwrap(), r0).unwrap();
        assert!((q.x - expected).abs() < 1e-6, "{}", q.x);
        assert!(q.y.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_coordinates() {
        let r = GeoPoint::new(23.1, 113.3).unwrap();
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(project(GeoPoint { lat: 26.0, lon: 113.3 }, r).is_err());
        assert!(project(GeoPoint { lat: f64::NAN, lon: 113.3 }, r).is_err());
    }

    #[test]
    fn cell_of_boundaries() {
        let g = grid();
        let s = g.cell_size;
        assert_eq!(g.cell_of(g.origin), Some(CellKey::new(0, 0)));
        assert_eq!(g.cell_of(g.origin.offset(s, s)), Some(CellKey::new(1, 1)));
        assert_eq!(g.cell_of(g.origin.offset(2.5 * s, 0.5 * s)), Some(CellKey::new(2, 0)));
        assert_eq!(g.cell_of(g.origin.offset(-0.01, 1.0)), None);
        assert_eq!(g.cell_of(g.max_corner()), None);
        assert_eq!(g.cell_of(g.origin.offset(g.width(), 1.0)), None);
    }

    #[test]
    fn covering_reaches_box_max() {
        let g = GridSpec::covering(ProjectedPoint::new(0.0, 0.0), ProjectedPoint::new(1201.0, 999.0), 500.0)
            .unwrap();
        assert_eq!((g.n_cols, g.n_rows), (3, 2));
        assert!(g.max_corner().x >= 1201.0 && g.max_corner().y >= 999.0);
        assert!(GridSpec::covering(ProjectedPoint::default(), ProjectedPoint::new(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn station_cell_edges() {
        let c = StationCell::new("S01", ProjectedPoint::new(10.0, -5.0), 500.0);
        let hw = c.half_width;
        assert!(in_station_cell(c.center, &c));
        assert!(!in_station_cell(c.center.offset(hw, 0.0), &c));
        assert!(in_station_cell(c.center.offset(-hw, -hw), &c));
        let eps = 1e-6;
        assert!(in_station_cell(c.center.offset(hw - eps, hw - eps), &c));
    }

    #[test]
    fn frame_centroid_reference() {
        let f = MapFrame::from_geo_origin(GeoPoint::new(23.0, 113.2).unwrap(), 500.0, 16, 12).unwrap();
        let o = f.geo_origin();
        assert!((o.lat - 23.0).abs() < 1e-9 && (o.lon - 113.2).abs() < 1e-9);
        assert_eq!(f.grid.origin, ProjectedPoint::new(-4000.0, -3000.0));
        let coarse = f.with_cell_size(2000.0).unwrap();
        assert_eq!((coarse.grid.n_cols, coarse.grid.n_rows), (4, 3));
    }

    proptest! {
        #[test]
        fn interior_points_map_to_exactly_one_cell(fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
            let g = grid();
            let p = g.origin.offset(fx * g.width(), fy * g.height());
            let hits: Vec<CellKey> = g.keys().filter(|k| {
                let (lo, hi) = g.cell_bounds(*k);
                p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y
            }).collect();
            prop_assert_eq!(hits.len(), 1);
            prop_assert_eq!(g.cell_of(p), Some(hits[0]));
        }

        #[test]
        fn projection_round_trip(dlat in -0.9f64..0.9, dlon in -0.9f64..0.9, lat0 in -60.0f64..60.0, lon0 in -170.0f64..170.0) {
            let proj = LocalProjection::new(GeoPoint::new(lat0, lon0).unwrap()).unwrap();
            let p = GeoPoint::new(lat0 + dlat, lon0 + dlon).unwrap();
            let xy = proj.project(p).unwrap();
            prop_assume!(xy.x.hypot(xy.y) <= 100_000.0);
            let back = proj.unproject(xy);
            prop_assert!((back.lat - p.lat).abs() < 1e-6);
            prop_assert!((back.lon - p.lon).abs() < 1e-6);
        }

        #[test]
        fn station_cell_is_chebyshev_ball(dx in -600.0f64..600.0, dy in -600.0f64..600.0) {
            let c = StationCell::new("S", ProjectedPoint::new(3.0, 4.0), 500.0);
            let p = c.center.offset(dx, dy);
            let brute = (p.x - c.center.x) >= -c.half_width && (p.x - c.center.x) < c.half_width
                && (p.y - c.center.y) >= -c.half_width && (p.y - c.center.y) < c.half_width;
            prop_assert_eq!(in_station_cell(p, &c), brute);
            let cheb = (p.x - c.center.x).abs().max((p.y - c.center.y).abs());
            if cheb < c.half_width {
                prop_assert!(in_station_cell(p, &c));
            }
            if cheb > c.half_width {
                prop_assert!(!in_station_cell(p, &c));
            }
        }
    }
}
