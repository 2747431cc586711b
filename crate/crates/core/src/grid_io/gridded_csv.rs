//! Long-form CSV for gridded series: `node_id,lat,lon,day_index,value`.

use std::collections::BTreeSet;
use std::path::Path;

use super::{fmt_f32, GridSpec, GriddedSeries};
use crate::error::{Error, Result};

const HEADER: [&str; 5] = ["node_id", "lat", "lon", "day_index", "value"];

struct Row {
    line: u64,
    node: usize,
    lat: f64,
    lon: f64,
    day: i32,
    value: f32,
}

pub fn read_gridded_csv(path: &Path) -> Result<GriddedSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().map(str::trim).ne(HEADER) {
        return Err(Error::format(
            path,
            "line 1",
            format!("malformed header, expected `{}`", HEADER.join(",")),
        ));
    }

    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let at = |msg: String| Error::format(path, format!("line {line}"), msg);
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        let node = field(0)
            .parse::<usize>()
            .map_err(|_| at(format!("bad node_id `{}`", field(0))))?;
        let lat = field(1)
            .parse::<f64>()
            .map_err(|_| at(format!("bad lat `{}`", field(1))))?;
        let lon = field(2)
            .parse::<f64>()
            .map_err(|_| at(format!("bad lon `{}`", field(2))))?;
        let day = field(3)
            .parse::<i32>()
            .map_err(|_| at(format!("bad day_index `{}`", field(3))))?;
        let value = field(4)
            .parse::<f32>()
            .map_err(|_| at(format!("bad value `{}`", field(4))))?;
        if let Some(msg) = super::coordinate_problem(lat, lon) {
            return Err(at(msg));
        }
        rows.push(Row {
            line,
            node,
            lat,
            lon,
            day,
            value,
        });
    }
    if rows.is_empty() {
        return Err(Error::format(path, "line 2", "no data rows"));
    }

    let days: Vec<i32> = rows
        .iter()
        .map(|r| r.day)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_nodes = rows.iter().map(|r| r.node).max().unwrap() + 1;
    let n_days = days.len();
    if rows.len() != n_nodes * n_days {
        return Err(Error::format(
            path,
            format!("line {}", rows.last().unwrap().line),
            format!(
                "row-count mismatch: {} rows for {n_nodes} nodes x {n_days} days",
                rows.len()
            ),
        ));
    }

    let mut coords: Vec<Option<(f64, f64)>> = vec![None; n_nodes];
    let mut values = vec![f32::NAN; n_nodes * n_days];
    let mut filled = vec![false; n_nodes * n_days];
    for r in &rows {
        let at = |msg: String| Error::format(path, format!("line {}", r.line), msg);
        match coords[r.node] {
            None => coords[r.node] = Some((r.lat, r.lon)),
            Some(c) if c != (r.lat, r.lon) => {
                return Err(at(format!("node {} changes coordinates", r.node)))
            }
            Some(_) => {}
        }
        let k = days.binary_search(&r.day).unwrap();
        let idx = r.node * n_days + k;
        if filled[idx] {
            return Err(at(format!("duplicate row for node {} day {}", r.node, r.day)));
        }
        filled[idx] = true;
        values[idx] = r.value;
    }
    let coords = coords
        .into_iter()
        .enumerate()
        .map(|(id, c)| c.ok_or_else(|| Error::format(path, "-", format!("node_id {id} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let grid = GridSpec::new(coords).map_err(|e| Error::format(path, "-", e.to_string()))?;
    GriddedSeries::new(grid, days, values)
}

pub fn write_gridded_csv(gs: &GriddedSeries, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_error(path, e))?;
    for node in 0..gs.n_nodes() {
        let (lat, lon) = gs.grid().coords(node);
        let (lat, lon) = (lat.to_string(), lon.to_string());
        let id = node.to_string();
        for (d, v) in gs.days().iter().zip(gs.node_values(node)) {
            w.write_record([id.as_str(), &lat, &lon, &d.to_string(), &fmt_f32(*v)])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let location = e
        .position()
        .map_or_else(|| "-".to_string(), |p| format!("line {}", p.line()));
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::format(path, location, format!("{kind:?}")),
    }
}
