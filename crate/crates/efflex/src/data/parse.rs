use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use walkdir::WalkDir;

use crate::data::{bbox_center, project_to_meters, Dataset, RawPoint, Trajectory};
use crate::error::{Error, Result};

/// Counters surfaced by the parsers: rows/files that became trajectories
/// and rows/files (or records) that were skipped as malformed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub parsed: usize,
    pub skipped: usize,
}

fn finish(
    raw: Vec<Vec<RawPoint>>,
    provenance: String,
    stats: IngestStats,
    what: &str,
) -> Result<(Dataset, IngestStats)> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset(format!("{what}: no valid trajectories")));
    }
    let anchor = bbox_center(raw.iter().flatten().map(|p| (p.lon, p.lat)));
    let trajectories = raw
        .into_iter()
        .enumerate()
        .map(|(i, pts)| Trajectory {
            id: i as u32,
            points: project_to_meters(&pts, anchor),
        })
        .collect();
    Ok((
        Dataset {
            trajectories,
            anchor,
            grid_size_m: crate::data::DEFAULT_GRID_SIZE_M,
            provenance,
        },
        stats,
    ))
}

/// Porto taxi CSV: header row, POLYLINE column holding a JSON array of
/// [lon, lat] pairs. Malformed rows are skipped and counted, not fatal.
pub fn parse_porto_csv(path: &Path, limit: Option<usize>) -> Result<(Dataset, IngestStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, format!("cannot read header: {e}")))?;
    let poly_idx = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("POLYLINE"))
        .ok_or_else(|| Error::format(path, "no POLYLINE column in header"))?;

    let mut raw: Vec<Vec<RawPoint>> = Vec::new();
    let mut stats = IngestStats::default();
    for record in reader.records() {
        if let Some(limit) = limit {
            if raw.len() >= limit {
                break;
            }
        }
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                stats.skipped += 1;
                continue;
            }
        };
        let field = match record.get(poly_idx) {
            Some(f) => f,
            None => {
                stats.skipped += 1;
                continue;
            }
        };
        match parse_polyline(field) {
            Some(points) => {
                stats.parsed += 1;
                raw.push(points);
            }
            None => stats.skipped += 1,
        }
    }
    finish(raw, format!("porto:{}", path.display()), stats, "parse_porto_csv")
}

/// A polyline is valid when it decodes as a JSON array of [lon, lat] pairs
/// with at least 2 in-range points.
fn parse_polyline(field: &str) -> Option<Vec<RawPoint>> {
    let pairs: Vec<[f64; 2]> = serde_json::from_str(field).ok()?;
    if pairs.len() < 2 {
        return None;
    }
    let points: Vec<RawPoint> = pairs
        .iter()
        .map(|&[lon, lat]| RawPoint::new(lon, lat))
        .collect();
    if points.iter().all(|p| p.in_valid_range()) {
        Some(points)
    } else {
        None
    }
}

/// Geolife PLT tree: every .plt file is one trajectory. Files carry 6 header
/// lines, then "lat,lon,0,alt,days,date,time" records; out-of-range records
/// are dropped.
pub fn parse_geolife_plt(root: &Path, limit: Option<usize>) -> Result<(Dataset, IngestStats)> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut plt_files: Vec<_> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| {
            e.file_type().is_file()
                && e.path()
                    .extension()
                    .is_some_and(|x| x.eq_ignore_ascii_case("plt"))
        })
        .map(|e| e.into_path())
        .collect();
    plt_files.sort();

    let mut raw: Vec<Vec<RawPoint>> = Vec::new();
    let mut stats = IngestStats::default();
    for path in plt_files {
        if let Some(limit) = limit {
            if raw.len() >= limit {
                break;
            }
        }
        match parse_plt_file(&path)? {
            Some(points) => {
                stats.parsed += 1;
                raw.push(points);
            }
            None => stats.skipped += 1,
        }
    }
    finish(raw, format!("geolife:{}", root.display()), stats, "parse_geolife_plt")
}

const PLT_HEADER_LINES: usize = 6;

fn parse_plt_file(path: &Path) -> Result<Option<Vec<RawPoint>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno < PLT_HEADER_LINES {
            continue;
        }
        let mut fields = line.split(',');
        let lat = fields.next().and_then(|f| f.trim().parse::<f64>().ok());
        let lon = fields.next().and_then(|f| f.trim().parse::<f64>().ok());
        let (lat, lon) = match (lat, lon) {
            (Some(lat), Some(lon)) => (lat, lon),
            _ => continue,
        };
        let p = RawPoint::new(lon, lat);
        if p.in_valid_range() {
            points.push(p);
        }
    }
    if points.len() < 2 {
        return Ok(None);
    }
    Ok(Some(points))
}
