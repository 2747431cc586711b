//! Gridded daily series, seasonal extraction and artifact file formats.
//!
//! Day indices count days since 1970-01-01 in the proleptic Gregorian
//! calendar. Missing values are NaN.

mod artifacts;
mod cng1;
mod gridded_csv;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use artifacts::{
    read_edge_list, read_event_series, read_grid_csv, read_metric_field, sidecar_path, write_edge_list,
    write_event_series, write_grid_csv, write_metric_field, EventFileMeta,
};
pub use cng1::{read_cng1, write_cng1, CNG1_MAGIC};
pub use gridded_csv::{read_gridded_csv, write_gridded_csv};

/// Days from 0001-01-01 (CE day 1) to 1970-01-01.
const UNIX_EPOCH_CE_DAYS: i32 = 719_163;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridNode {
    pub lat: f64,
    pub lon: f64,
}

/// Node locations. Node ids are the positions in `nodes`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridSpec {
    nodes: Vec<GridNode>,
}

impl GridSpec {
    pub fn new(coords: Vec<(f64, f64)>) -> Result<Self> {
        let nodes = coords
            .into_iter()
            .map(|(lat, lon)| GridNode { lat, lon })
            .collect::<Vec<_>>();
        let grid = GridSpec { nodes };
        if let Some((id, msg)) = grid.first_violation() {
            return Err(Error::InvalidGrid(format!("node {id}: {msg}")));
        }
        Ok(grid)
    }

    /// First invariant violation, if any, as `(node_id, description)`.
    pub(crate) fn first_violation(&self) -> Option<(usize, String)> {
        let mut seen = HashSet::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(msg) = coordinate_problem(node.lat, node.lon) {
                return Some((id, msg));
            }
            if !seen.insert((node.lat.to_bits(), node.lon.to_bits())) {
                return Some((
                    id,
                    format!("duplicate coordinate ({}, {})", node.lat, node.lon),
                ));
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> GridNode {
        self.nodes[id]
    }

    pub fn coords(&self, id: usize) -> (f64, f64) {
        let n = self.nodes[id];
        (n.lat, n.lon)
    }
}

pub(crate) fn coordinate_problem(lat: f64, lon: f64) -> Option<String> {
    if !(-90.0..=90.0).contains(&lat) {
        return Some(format!("latitude {lat} outside [-90, 90]"));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Some(format!("longitude {lon} outside [-180, 180]"));
    }
    None
}

/// Daily values for every node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedSeries {
    grid: GridSpec,
    days: Vec<i32>,
    values: Vec<f32>,
}

impl GriddedSeries {
    pub fn new(grid: GridSpec, days: Vec<i32>, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() * days.len() {
            return Err(Error::InvalidInput(format!(
                "value matrix has {} entries, expected {} nodes x {} days",
                values.len(),
                grid.len(),
                days.len()
            )));
        }
        if let Some(pos) = days.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "day indices not strictly increasing at position {}",
                pos + 1
            )));
        }
        Ok(GriddedSeries { grid, days, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn days(&self) -> &[i32] {
        &self.days
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// The full daily series of one node.
    pub fn node_values(&self, node: usize) -> &[f32] {
        let d = self.days.len();
        &self.values[node * d..(node + 1) * d]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_parts(self) -> (GridSpec, Vec<i32>, Vec<f32>) {
        (self.grid, self.days, self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Season {
    #[serde(rename = "JJA")]
    Jja,
    #[serde(rename = "DJF")]
    Djf,
}

impl Season {
    pub fn months(self) -> [u32; 3] {
        match self {
            Season::Jja => [6, 7, 8],
            Season::Djf => [12, 1, 2],
        }
    }

    pub fn contains_month(self, month: u32) -> bool {
        self.months().contains(&month)
    }

    pub fn contains_day(self, day_index: i32) -> bool {
        self.contains_month(day_to_date(day_index).month())
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Season::Jja => "JJA",
            Season::Djf => "DJF",
        })
    }
}

impl std::str::FromStr for Season {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "JJA" => Ok(Season::Jja),
            "DJF" => Ok(Season::Djf),
            _ => Err(Error::param("season", format!("unknown season `{s}`"))),
        }
    }
}

pub fn day_to_date(day_index: i32) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt(day_index + UNIX_EPOCH_CE_DAYS)
        .expect("day index within chrono's supported range")
}

pub fn date_to_day(date: NaiveDate) -> i32 {
    date.num_days_from_ce() - UNIX_EPOCH_CE_DAYS
}

/// Keeps the days whose calendar month lies in `season`. Day indices and
/// chronological order are preserved.
pub fn extract_season(gs: &GriddedSeries, season: Season) -> Result<GriddedSeries> {
    if gs.n_days() == 0 || gs.n_nodes() == 0 {
        return Err(Error::InvalidInput("empty gridded series".into()));
    }
    let keep: Vec<usize> = gs
        .days
        .iter()
        .enumerate()
        .filter(|(_, &d)| season.contains_day(d))
        .map(|(k, _)| k)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySeason {
            season: season.to_string(),
        });
    }
    let days = keep.iter().map(|&k| gs.days[k]).collect();
    let mut values = Vec::with_capacity(keep.len() * gs.n_nodes());
    for node in 0..gs.n_nodes() {
        let row = gs.node_values(node);
        values.extend(keep.iter().map(|&k| row[k]));
    }
    Ok(GriddedSeries {
        grid: gs.grid.clone(),
        days,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFormat {
    Binary,
    Csv,
}

pub fn load_gridded(path: &Path, format: GridFormat) -> Result<GriddedSeries> {
    match format {
        GridFormat::Binary => read_cng1(path),
        GridFormat::Csv => read_gridded_csv(path),
    }
}

pub fn save_gridded(gs: &GriddedSeries, path: &Path, format: GridFormat) -> Result<()> {
    match format {
        GridFormat::Binary => write_cng1(gs, path),
        GridFormat::Csv => write_gridded_csv(gs, path),
    }
}

/// Formats a float so that parsing it back yields the same value; NaN is
/// written as `nan`.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

pub(crate) fn fmt_f32(x: f32) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> i32 {
        date_to_day(NaiveDate::from_ymd_opt(y, m, d).unwrap())
    }

    fn series_over(first: i32, last: i32) -> GriddedSeries {
        let grid = GridSpec::new(vec![(40.0, -100.0)]).unwrap();
        let days: Vec<i32> = (first..=last).collect();
        let values = days.iter().map(|&d| d as f32).collect();
        GriddedSeries::new(grid, days, values).unwrap()
    }

    #[test]
    fn epoch_is_day_zero() {
        assert_eq!(date(1970, 1, 1), 0);
        assert_eq!(day_to_date(0), NaiveDate::from_ymd_opt(1970, 1, 1).unwrap());
        assert_eq!(date(1969, 12, 31), -1);
    }

    #[test]
    fn summer_only_series_is_unchanged_by_jja() {
        let gs = series_over(date(1991, 6, 1), date(1991, 8, 31));
        assert_eq!(extract_season(&gs, Season::Jja).unwrap(), gs);
    }

    #[test]
    fn djf_of_a_full_year_counts_calendar_days() {
        let gs = series_over(date(1991, 1, 1), date(1991, 12, 31));
        let djf = extract_season(&gs, Season::Djf).unwrap();
        // Jan 31 + Feb 28 (1991 not leap) + Dec 31, counted with a plain
        // month-length table rather than the date library.
        let month_len = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        let expected = month_len[0] + month_len[1] + month_len[11];
        assert_eq!(djf.n_days(), expected);
        assert_eq!(djf.days()[0], date(1991, 1, 1));
        assert_eq!(*djf.days().last().unwrap(), date(1991, 12, 31));
        // Values travel with their day index.
        for (k, &d) in djf.days().iter().enumerate() {
            assert_eq!(djf.node_values(0)[k], d as f32);
        }
    }

    #[test]
    fn thirty_summers_have_2760_days() {
        let gs = series_over(date(1991, 1, 1), date(2020, 12, 31));
        let jja = extract_season(&gs, Season::Jja).unwrap();
        assert_eq!(jja.n_days(), 30 * (30 + 31 + 31));
    }

    #[test]
    fn djf_spans_the_year_boundary_without_reindexing() {
        let gs = series_over(date(1991, 11, 15), date(1992, 3, 15));
        let djf = extract_season(&gs, Season::Djf).unwrap();
        let dec31 = date(1991, 12, 31);
        let k = djf.days().iter().position(|&d| d == dec31).unwrap();
        assert_eq!(djf.days()[k + 1], dec31 + 1);
        // 1992 is a leap year.
        assert_eq!(djf.n_days(), 31 + 31 + 29);
    }

    #[test]
    fn season_with_no_matching_days_is_an_error() {
        let gs = series_over(date(1991, 3, 1), date(1991, 5, 31));
        assert!(matches!(
            extract_season(&gs, Season::Jja),
            Err(Error::EmptySeason { .. })
        ));
    }

    #[test]
    fn extraction_is_idempotent() {
        let gs = series_over(date(1990, 5, 3), date(1993, 2, 11));
        for season in [Season::Jja, Season::Djf] {
            let once = extract_season(&gs, season).unwrap();
            assert_eq!(extract_season(&once, season).unwrap(), once);
        }
    }

    #[test]
    fn grid_rejects_bad_coordinates() {
        assert!(GridSpec::new(vec![(91.0, 0.0)]).is_err());
        assert!(GridSpec::new(vec![(0.0, -180.5)]).is_err());
        assert!(GridSpec::new(vec![(1.0, 2.0), (1.0, 2.0)]).is_err());
        assert!(GridSpec::new(vec![(90.0, 180.0), (-90.0, -180.0)]).is_ok());
    }

    #[test]
    fn gridded_series_checks_shape_and_order() {
        let grid = GridSpec::new(vec![(0.0, 0.0), (0.0, 1.0)]).unwrap();
        assert!(GriddedSeries::new(grid.clone(), vec![1, 2], vec![0.0; 3]).is_err());
        assert!(GriddedSeries::new(grid.clone(), vec![2, 2], vec![0.0; 4]).is_err());
        assert!(GriddedSeries::new(grid, vec![1, 5], vec![0.0; 4]).is_ok());
    }
}
