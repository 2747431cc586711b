//! Derived artifacts: metric fields, edge lists, event series and node tables.
//!
//! Metric fields and event series carry a JSON sidecar next to the CSV
//! (same stem, `.json` extension).

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::gridded_csv::csv_error;
use super::{fmt_f64, GridSpec, Season};
use crate::error::{Error, Result};
use crate::events::{EventSeries, ThresholdSpec};
use crate::netmetrics::{Metric, MetricField};
use crate::network::Network;

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(path, format!("line {}", e.line()), e.to_string()))
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = rdr.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::format(
            path,
            "line 1",
            format!("schema mismatch, expected header `{}`", header.join(",")),
        ));
    }
    Ok(rdr)
}

fn parse_field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, k: usize, name: &str) -> Result<T> {
    let raw = rec.get(k).unwrap_or("").trim();
    raw.parse().map_err(|_| {
        let line = rec.position().map_or(0, |p| p.line());
        Error::format(path, format!("line {line}"), format!("bad {name} `{raw}`"))
    })
}

// --- metric fields -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MetricMeta {
    metric: Metric,
    undefined_nodes: Vec<usize>,
}

const METRIC_HEADER: [&str; 4] = ["node_id", "lat", "lon", "value"];

pub fn write_metric_field(mf: &MetricField, grid: &GridSpec, path: &Path) -> Result<()> {
    if mf.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "metric field has {} values for {} nodes",
            mf.len(),
            grid.len()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(METRIC_HEADER).map_err(|e| csv_error(path, e))?;
    for (id, v) in mf.values.iter().enumerate() {
        let (lat, lon) = grid.coords(id);
        w.write_record([id.to_string(), fmt_f64(lat), fmt_f64(lon), fmt_f64(*v)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = MetricMeta {
        metric: mf.metric,
        undefined_nodes: (0..mf.len()).filter(|&k| mf.undefined[k]).collect(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads a metric CSV. Without a sidecar the metric defaults to `fallback`
/// and NaN values are taken as the undefined nodes.
pub fn read_metric_field(path: &Path, fallback: Metric) -> Result<(MetricField, GridSpec)> {
    let mut rdr = open_csv(path, &METRIC_HEADER)?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let id: usize = parse_field(path, &rec, 0, "node_id")?;
        if id != values.len() {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(Error::format(
                path,
                format!("line {line}"),
                format!("expected node_id {}, found {id}", values.len()),
            ));
        }
        coords.push((parse_field(path, &rec, 1, "lat")?, parse_field(path, &rec, 2, "lon")?));
        values.push(parse_field::<f64>(path, &rec, 3, "value")?);
    }
    let grid = GridSpec::new(coords).map_err(|e| Error::format(path, "-", e.to_string()))?;
    let sidecar = sidecar_path(path);
    let (metric, undefined) = if sidecar.exists() {
        let meta: MetricMeta = read_json(&sidecar)?;
        let mut undefined = vec![false; values.len()];
        for k in meta.undefined_nodes {
            if k >= values.len() {
                return Err(Error::format(&sidecar, "-", format!("undefined node {k} out of range")));
            }
            undefined[k] = true;
        }
        (meta.metric, undefined)
    } else {
        (fallback, values.iter().map(|v| v.is_nan()).collect())
    };
    Ok((
        MetricField {
            metric,
            values,
            undefined,
        },
        grid,
    ))
}

// --- edge lists ----------------------------------------------------------

pub fn write_edge_list(net: &Network, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["i", "j"]).map_err(|e| csv_error(path, e))?;
    for (i, j) in net.edges() {
        w.write_record([i.to_string(), j.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_edge_list(path: &Path, grid: GridSpec) -> Result<Network> {
    let mut rdr = open_csv(path, &["i", "j"])?;
    let mut edges = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let i: usize = parse_field(path, &rec, 0, "i")?;
        let j: usize = parse_field(path, &rec, 1, "j")?;
        if i >= j {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(Error::format(path, format!("line {line}"), format!("edge ({i}, {j}) must have i < j")));
        }
        edges.push((i, j));
    }
    Network::from_edges(grid, edges).map_err(|e| Error::format(path, "-", e.to_string()))
}

// --- node tables ---------------------------------------------------------

pub fn write_grid_csv(grid: &GridSpec, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["node_id", "lat", "lon"]).map_err(|e| csv_error(path, e))?;
    for (id, node) in grid.nodes().iter().enumerate() {
        w.write_record([id.to_string(), fmt_f64(node.lat), fmt_f64(node.lon)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_grid_csv(path: &Path) -> Result<GridSpec> {
    let mut rdr = open_csv(path, &["node_id", "lat", "lon"])?;
    let mut coords = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let id: usize = parse_field(path, &rec, 0, "node_id")?;
        if id != coords.len() {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(Error::format(path, format!("line {line}"), format!("node ids must be 0..n in order, found {id}")));
        }
        coords.push((parse_field(path, &rec, 1, "lat")?, parse_field(path, &rec, 2, "lon")?));
    }
    GridSpec::new(coords).map_err(|e| Error::format(path, "-", e.to_string()))
}

// --- event series --------------------------------------------------------

/// Sidecar describing how an event-series file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventFileMeta {
    pub n_nodes: usize,
    /// Size of the season's day universe.
    #[serde(rename = "T")]
    pub n_days_in_season: usize,
    pub season: Option<Season>,
    pub threshold: Option<ThresholdSpec>,
    pub dedup: bool,
    pub unusable_nodes: Vec<usize>,
    pub season_days: Vec<i32>,
}

pub fn write_event_series(series: &[EventSeries], meta: &EventFileMeta, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["node_id", "day_index"]).map_err(|e| csv_error(path, e))?;
    for es in series {
        let id = es.node_id().to_string();
        for d in es.event_days() {
            w.write_record([id.as_str(), &d.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_event_series(path: &Path) -> Result<(Vec<EventSeries>, EventFileMeta)> {
    let meta: EventFileMeta = read_json(&sidecar_path(path))?;
    if meta.season_days.len() != meta.n_days_in_season {
        return Err(Error::format(
            sidecar_path(path),
            "-",
            format!("T = {} but {} season days listed", meta.n_days_in_season, meta.season_days.len()),
        ));
    }
    let season: Arc<[i32]> = meta.season_days.clone().into();
    let mut per_node: Vec<Vec<i32>> = vec![Vec::new(); meta.n_nodes];
    let mut rdr = open_csv(path, &["node_id", "day_index"])?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let id: usize = parse_field(path, &rec, 0, "node_id")?;
        let day: i32 = parse_field(path, &rec, 1, "day_index")?;
        if id >= meta.n_nodes {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(Error::format(path, format!("line {line}"), format!("node_id {id} >= n_nodes {}", meta.n_nodes)));
        }
        per_node[id].push(day);
    }
    let series = per_node
        .into_iter()
        .enumerate()
        .map(|(id, days)| {
            EventSeries::new(id, days, Arc::clone(&season)).map_err(|e| Error::format(path, "-", e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((series, meta))
}
