//! Trajectory ingestion: parsers for the supported GPS sources, planar
//! projection, preprocessing (length filter + grid snapping), and the
//! canonical dataset file.

mod parse;
mod store;
mod synthetic;

pub use parse::{parse_geolife_plt, parse_porto_csv, IngestStats};
pub use store::{load_dataset, save_dataset};
pub use synthetic::{generate_synthetic, synthetic_cluster_of};

use crate::error::{Error, Result};

/// Planar point in meters (east, north) relative to the dataset anchor.
pub type Point = [f64; 2];

pub const DEFAULT_MIN_POINTS: usize = 50;
pub const DEFAULT_GRID_SIZE_M: f64 = 50.0;

// Meters per degree at city scale; longitude is additionally scaled by
// cos(anchor latitude).
const M_PER_DEG_LON: f64 = 111_320.0;
const M_PER_DEG_LAT: f64 = 110_540.0;

/// A GPS fix in WGS-84 degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawPoint {
    pub lon: f64,
    pub lat: f64,
    pub timestamp: Option<f64>,
}

impl RawPoint {
    pub fn new(lon: f64, lat: f64) -> Self {
        RawPoint {
            lon,
            lat,
            timestamp: None,
        }
    }

    pub fn in_valid_range(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

/// One trajectory: an id unique within its dataset plus an ordered sequence
/// of projected points.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: u32,
    pub points: Vec<Point>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A set of trajectories sharing one projection anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    /// (lon, lat) of the projection origin.
    pub anchor: (f64, f64),
    pub grid_size_m: f64,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Checks the dataset invariants: dense ids, finite points, length >= 2.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.trajectories.iter().enumerate() {
            if t.id as usize != i {
                return Err(Error::domain(format!(
                    "trajectory at position {i} has id {}, ids must be dense",
                    t.id
                )));
            }
            if t.len() < 2 {
                return Err(Error::domain(format!(
                    "trajectory {} has {} points, need at least 2",
                    t.id,
                    t.len()
                )));
            }
            if t.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(Error::domain(format!(
                    "trajectory {} contains non-finite coordinates",
                    t.id
                )));
            }
        }
        Ok(())
    }

    pub fn points_of(&self, id: usize) -> &[Point] {
        &self.trajectories[id].points
    }
}

/// Equirectangular projection of WGS-84 degrees to meters around an anchor.
pub fn project_to_meters(raw: &[RawPoint], anchor: (f64, f64)) -> Vec<Point> {
    let cos_lat = anchor.1.to_radians().cos();
    raw.iter()
        .map(|p| {
            [
                (p.lon - anchor.0) * cos_lat * M_PER_DEG_LON,
                (p.lat - anchor.1) * M_PER_DEG_LAT,
            ]
        })
        .collect()
}

/// Inverse of `project_to_meters`, back to (lon, lat).
pub fn unproject(p: Point, anchor: (f64, f64)) -> (f64, f64) {
    let cos_lat = anchor.1.to_radians().cos();
    (
        anchor.0 + p[0] / (cos_lat * M_PER_DEG_LON),
        anchor.1 + p[1] / M_PER_DEG_LAT,
    )
}

/// Bounding-box center of a point cloud in degrees; the projection anchor.
pub(crate) fn bbox_center(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let mut lon_min = f64::INFINITY;
    let mut lon_max = f64::NEG_INFINITY;
    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    for (lon, lat) in points {
        lon_min = lon_min.min(lon);
        lon_max = lon_max.max(lon);
        lat_min = lat_min.min(lat);
        lat_max = lat_max.max(lat);
    }
    ((lon_min + lon_max) / 2.0, (lat_min + lat_max) / 2.0)
}

/// Length filter plus optional grid snapping.
///
/// Trajectories shorter than `min_points` are dropped first. With
/// `grid_snap`, every point is replaced by the center of its
/// `grid_size_m` x `grid_size_m` cell and consecutive duplicate cells are
/// collapsed, with a 2-point floor so no trajectory degenerates.
pub fn preprocess(
    ds: &Dataset,
    min_points: usize,
    grid_size_m: f64,
    grid_snap: bool,
) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("preprocess: input has no trajectories".into()));
    }
    if grid_size_m <= 0.0 || !grid_size_m.is_finite() {
        return Err(Error::domain("preprocess: grid_size_m must be positive"));
    }
    let mut out = Vec::new();
    for t in &ds.trajectories {
        if t.len() < min_points {
            continue;
        }
        let points = if grid_snap {
            snap_to_grid(&t.points, grid_size_m)
        } else {
            t.points.clone()
        };
        out.push(Trajectory {
            id: out.len() as u32,
            points,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "preprocess: every trajectory was shorter than {min_points} points"
        )));
    }
    Ok(Dataset {
        trajectories: out,
        anchor: ds.anchor,
        grid_size_m,
        provenance: ds.provenance.clone(),
    })
}

fn snap_to_grid(points: &[Point], grid: f64) -> Vec<Point> {
    let mut cells: Vec<(i64, i64)> = Vec::with_capacity(points.len());
    for p in points {
        let cell = ((p[0] / grid).floor() as i64, (p[1] / grid).floor() as i64);
        if cells.last() != Some(&cell) {
            cells.push(cell);
        }
    }
    let mut snapped: Vec<Point> = cells
        .iter()
        .map(|&(cx, cy)| {
            [
                (cx as f64 + 0.5) * grid,
                (cy as f64 + 0.5) * grid,
            ]
        })
        .collect();
    while snapped.len() < 2 {
        let last = *snapped.last().expect("at least one cell");
        snapped.push(last);
    }
    snapped
}
