//! Boundary corrections against the surrogate expectation.
//!
//! Subtraction: `M_cor = M - <M_sur>`. Division: `M_cor = M / <M_sur>`,
//! undefined where the surrogate mean is zero. Both are then min-max
//! normalized over their defined nodes.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_io::{fmt_f64, GridSpec};
use crate::netmetrics::{Metric, MetricField};
use crate::surrogate::SurrogateStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Subtract,
    Divide,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Subtract => "subtract",
            Method::Divide => "divide",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedField {
    pub method: Method,
    pub metric: Metric,
    pub raw: Vec<f64>,
    pub surrogate_mean: Vec<f64>,
    /// NaN at undefined nodes.
    pub corrected: Vec<f64>,
    /// In [0, 1] at defined nodes, NaN elsewhere.
    pub normalized: Vec<f64>,
    pub norm_bounds: (f64, f64),
    pub undefined: Vec<bool>,
}

impl CorrectedField {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn undefined_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.undefined[i]).collect()
    }

    pub fn defined_count(&self) -> usize {
        self.undefined.iter().filter(|&&u| !u).count()
    }
}

/// Min-max bounds over the defined entries.
fn bounds(values: &[f64], undefined: &[bool]) -> Option<(f64, f64)> {
    values
        .iter()
        .zip(undefined)
        .filter(|(_, &u)| !u)
        .map(|(&v, _)| v)
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

pub fn min_max_normalize(values: &[f64], undefined: &[bool]) -> Result<(Vec<f64>, (f64, f64))> {
    let (lo, hi) = bounds(values, undefined)
        .ok_or_else(|| Error::DegenerateNormalization("no defined nodes".into()))?;
    if hi <= lo {
        return Err(Error::DegenerateNormalization(format!(
            "corrected field is constant ({lo}) over all defined nodes"
        )));
    }
    let range = hi - lo;
    let normalized = values
        .iter()
        .zip(undefined)
        .map(|(&v, &u)| if u { f64::NAN } else { (v - lo) / range })
        .collect();
    Ok((normalized, (lo, hi)))
}

fn check_alignment(raw: &MetricField, sur: &SurrogateStats) -> Result<()> {
    if raw.metric != sur.metric {
        return Err(Error::InvalidInput(format!(
            "raw field is {} but surrogate stats are {}",
            raw.metric, sur.metric
        )));
    }
    if raw.len() != sur.mean.len() {
        return Err(Error::InvalidInput(format!(
            "raw field has {} nodes, surrogate stats {}",
            raw.len(),
            sur.mean.len()
        )));
    }
    Ok(())
}

fn finish(
    method: Method,
    raw: &MetricField,
    sur: &SurrogateStats,
    corrected: Vec<f64>,
    undefined: Vec<bool>,
) -> Result<CorrectedField> {
    let (normalized, norm_bounds) = min_max_normalize(&corrected, &undefined).map_err(|e| {
        Error::DegenerateNormalization(format!("{} {method} correction: {e}", raw.metric))
    })?;
    Ok(CorrectedField {
        method,
        metric: raw.metric,
        raw: raw.values.clone(),
        surrogate_mean: sur.mean.clone(),
        corrected,
        normalized,
        norm_bounds,
        undefined,
    })
}

pub fn correct_subtract(raw: &MetricField, sur: &SurrogateStats) -> Result<CorrectedField> {
    check_alignment(raw, sur)?;
    let corrected = raw.values.iter().zip(&sur.mean).map(|(m, s)| m - s).collect();
    finish(Method::Subtract, raw, sur, corrected, vec![false; raw.len()])
}

pub fn correct_divide(raw: &MetricField, sur: &SurrogateStats) -> Result<CorrectedField> {
    check_alignment(raw, sur)?;
    let undefined: Vec<bool> = sur.mean.iter().map(|&s| !(s > 0.0)).collect();
    let corrected = raw
        .values
        .iter()
        .zip(&sur.mean)
        .zip(&undefined)
        .map(|((m, s), &u)| if u { f64::NAN } else { m / s })
        .collect();
    finish(Method::Divide, raw, sur, corrected, undefined)
}

pub fn correct(method: Method, raw: &MetricField, sur: &SurrogateStats) -> Result<CorrectedField> {
    match method {
        Method::Subtract => correct_subtract(raw, sur),
        Method::Divide => correct_divide(raw, sur),
    }
}

/// Which stage of a corrected field feeds the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldStage {
    #[default]
    Normalized,
    Corrected,
}

/// Aligned per-node values of two corrections, restricted to nodes defined
/// under both.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFields {
    pub nodes: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn paired_values(sub: &CorrectedField, div: &CorrectedField, stage: FieldStage) -> Result<PairedFields> {
    if sub.len() != div.len() {
        return Err(Error::InvalidInput(format!(
            "fields have {} and {} nodes",
            sub.len(),
            div.len()
        )));
    }
    let pick = |f: &CorrectedField, i: usize| match stage {
        FieldStage::Normalized => f.normalized[i],
        FieldStage::Corrected => f.corrected[i],
    };
    let nodes: Vec<usize> = (0..sub.len())
        .filter(|&i| !sub.undefined[i] && !div.undefined[i])
        .collect();
    if nodes.is_empty() {
        return Err(Error::InvalidInput("no node is defined under both corrections".into()));
    }
    Ok(PairedFields {
        x: nodes.iter().map(|&i| pick(sub, i)).collect(),
        y: nodes.iter().map(|&i| pick(div, i)).collect(),
        nodes,
    })
}

pub fn paired_fields(sub: &CorrectedField, div: &CorrectedField) -> Result<PairedFields> {
    paired_values(sub, div, FieldStage::Normalized)
}

const HEADER: &str = "node_id,lat,lon,raw,surrogate_mean,corrected,normalized,defined";

/// CSV `node_id,lat,lon,raw,surrogate_mean,corrected,normalized,defined`.
pub fn write_corrected_field(cf: &CorrectedField, grid: &GridSpec, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * cf.len());
    out.push_str(HEADER);
    out.push('\n');
    for i in 0..cf.len() {
        let (lat, lon) = grid.coords(i);
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            fmt_f64(lat),
            fmt_f64(lon),
            fmt_f64(cf.raw[i]),
            fmt_f64(cf.surrogate_mean[i]),
            fmt_f64(cf.corrected[i]),
            fmt_f64(cf.normalized[i]),
            u8::from(!cf.undefined[i])
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a corrected-field CSV; method and metric come from the caller since
/// the format does not carry them.
pub fn read_corrected_field(path: &Path, method: Method, metric: Metric) -> Result<(CorrectedField, GridSpec)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l) != Some(HEADER) {
        return Err(Error::format(path, "line 1", format!("schema mismatch, expected `{HEADER}`")));
    }
    let mut coords = Vec::new();
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut undefined = Vec::new();
    for (k, line) in lines {
        let bad = |msg: &str| Error::format(path, format!("line {}", k + 1), msg.to_string());
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        if parts[0].parse::<usize>().ok() != Some(coords.len()) {
            return Err(bad("node ids must run 0..n"));
        }
        coords.push((num(parts[1])?, num(parts[2])?));
        for (c, p) in cols.iter_mut().zip(&parts[3..7]) {
            c.push(num(p)?);
        }
        undefined.push(match parts[7] {
            "1" => false,
            "0" => true,
            _ => return Err(bad("defined must be 0 or 1")),
        });
    }
    let grid = GridSpec::new(coords).map_err(|e| Error::format(path, "-", e.to_string()))?;
    let [raw, surrogate_mean, corrected, normalized] = cols;
    let norm_bounds = bounds(&corrected, &undefined).unwrap_or((f64::NAN, f64::NAN));
    Ok((
        CorrectedField {
            method,
            metric,
            raw,
            surrogate_mean,
            corrected,
            normalized,
            norm_bounds,
            undefined,
        },
        grid,
    ))
}
