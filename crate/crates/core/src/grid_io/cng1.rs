//! The `CNG1` binary gridded format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "CNG1"                      4 bytes magic
//! n_nodes                     u32
//! n_days                      u32
//! n_nodes x (lat f64, lon f64)
//! n_days x day_index i32
//! n_nodes x n_days x f32      node-major, NaN = missing
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{coordinate_problem, GridSpec, GriddedSeries};
use crate::error::{Error, Result};

pub const CNG1_MAGIC: &[u8; 4] = b"CNG1";
const HEADER_LEN: usize = 12;

pub fn read_cng1(path: &Path) -> Result<GriddedSeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_cng1(&bytes, path)
}

pub(crate) fn parse_cng1(bytes: &[u8], path: &Path) -> Result<GriddedSeries> {
    let fail = |offset: usize, msg: String| Error::format(path, format!("byte {offset}"), msg);

    if bytes.len() < HEADER_LEN {
        return Err(fail(0, format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != CNG1_MAGIC {
        return Err(fail(0, "bad magic, expected \"CNG1\"".into()));
    }
    let n_nodes = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n_days = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;

    let coords_end = HEADER_LEN + 16 * n_nodes;
    let expected = coords_end as u128 + 4 * n_days as u128 * (1 + n_nodes as u128);
    if bytes.len() as u128 != expected {
        if bytes.len() < coords_end {
            return Err(fail(
                bytes.len(),
                format!("truncated coordinate block: header declares {n_nodes} nodes"),
            ));
        }
        let rest = bytes.len() - coords_end;
        let per_day = 4 * (1 + n_nodes);
        let msg = if rest % per_day == 0 {
            format!(
                "day-count mismatch: header declares {n_days} days, file holds {}",
                rest / per_day
            )
        } else {
            format!(
                "size mismatch: expected {expected} bytes for {n_nodes} nodes x {n_days} days, found {}",
                bytes.len()
            )
        };
        return Err(fail(bytes.len(), msg));
    }

    let mut coords = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let off = HEADER_LEN + 16 * k;
        let lat = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let lon = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        if let Some(msg) = coordinate_problem(lat, lon) {
            return Err(fail(off, format!("node {k}: {msg}")));
        }
        coords.push((lat, lon));
    }
    let grid = GridSpec::new(coords).map_err(|e| fail(HEADER_LEN, e.to_string()))?;

    let mut days = Vec::with_capacity(n_days);
    for k in 0..n_days {
        let off = coords_end + 4 * k;
        let d = i32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if let Some(&prev) = days.last() {
            if d <= prev {
                return Err(fail(
                    off,
                    format!("day indices not strictly increasing ({prev} then {d})"),
                ));
            }
        }
        days.push(d);
    }

    let values_start = coords_end + 4 * n_days;
    let values = bytes[values_start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();

    GriddedSeries::new(grid, days, values)
}

pub fn write_cng1(gs: &GriddedSeries, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_cng1(gs, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_cng1<W: Write>(gs: &GriddedSeries, w: &mut W) -> std::io::Result<()> {
    w.write_all(CNG1_MAGIC)?;
    w.write_all(&(gs.n_nodes() as u32).to_le_bytes())?;
    w.write_all(&(gs.n_days() as u32).to_le_bytes())?;
    for node in gs.grid().nodes() {
        w.write_all(&node.lat.to_le_bytes())?;
        w.write_all(&node.lon.to_le_bytes())?;
    }
    for d in gs.days() {
        w.write_all(&d.to_le_bytes())?;
    }
    for v in gs.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}
