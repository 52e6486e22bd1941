use std::io::Write;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::data::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::io_util;

const MAGIC: &[u8] = b"EFLXDS1";

/// Canonical dataset file: magic, header (anchor, grid size, provenance),
/// u32 trajectory count, then per trajectory u32 id, u32 point count and the
/// f64 coordinate pairs. Everything little-endian, coordinates bit-exact.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = io_util::create(path)?;
    io_util::write_all(&mut w, path, MAGIC)?;
    let werr = |e| io_util::write_error(path, e);
    w.write_f64::<LittleEndian>(ds.anchor.0).map_err(werr)?;
    w.write_f64::<LittleEndian>(ds.anchor.1).map_err(werr)?;
    w.write_f64::<LittleEndian>(ds.grid_size_m).map_err(werr)?;
    let prov = ds.provenance.as_bytes();
    w.write_u32::<LittleEndian>(prov.len() as u32).map_err(werr)?;
    io_util::write_all(&mut w, path, prov)?;
    w.write_u32::<LittleEndian>(ds.trajectories.len() as u32)
        .map_err(werr)?;
    for t in &ds.trajectories {
        w.write_u32::<LittleEndian>(t.id).map_err(werr)?;
        w.write_u32::<LittleEndian>(t.points.len() as u32).map_err(werr)?;
        for p in &t.points {
            w.write_f64::<LittleEndian>(p[0]).map_err(werr)?;
            w.write_f64::<LittleEndian>(p[1]).map_err(werr)?;
        }
    }
    w.flush().map_err(werr)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = io_util::open(path)?;
    io_util::expect_magic(&mut r, path, MAGIC)?;
    let rerr = |e| io_util::read_error(path, e);
    let anchor_lon = r.read_f64::<LittleEndian>().map_err(rerr)?;
    let anchor_lat = r.read_f64::<LittleEndian>().map_err(rerr)?;
    let grid_size_m = r.read_f64::<LittleEndian>().map_err(rerr)?;
    let prov_len = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let mut prov = vec![0u8; prov_len];
    std::io::Read::read_exact(&mut r, &mut prov).map_err(rerr)?;
    let provenance = String::from_utf8(prov)
        .map_err(|_| Error::format(path, "provenance is not valid utf-8"))?;
    let n = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
    let mut trajectories = Vec::with_capacity(n);
    for _ in 0..n {
        let id = r.read_u32::<LittleEndian>().map_err(rerr)?;
        let len = r.read_u32::<LittleEndian>().map_err(rerr)? as usize;
        let mut points = Vec::with_capacity(len);
        for _ in 0..len {
            let x = r.read_f64::<LittleEndian>().map_err(rerr)?;
            let y = r.read_f64::<LittleEndian>().map_err(rerr)?;
            points.push([x, y]);
        }
        trajectories.push(Trajectory { id, points });
    }
    io_util::expect_eof(&mut r, path)?;
    Ok(Dataset {
        trajectories,
        anchor: (anchor_lon, anchor_lat),
        grid_size_m,
        provenance,
    })
}
