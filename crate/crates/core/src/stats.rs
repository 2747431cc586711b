//! Paired t-test, two-sample Kolmogorov-Smirnov test and the
//! subtraction-vs-division comparison report.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use statrs::function::beta::beta_reg;

use crate::correction::PairedFields;
use crate::error::{Error, Result};
use crate::grid_io::Season;
use crate::netmetrics::Metric;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Above this `n_x * n_y` the K-S p-value falls back to the asymptotic series.
pub const KS_EXACT_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: (usize, usize),
    pub alpha: f64,
    pub reject: bool,
    /// Zero-variance differences in the paired t-test.
    #[serde(default)]
    pub degenerate: bool,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, n: (usize, usize), alpha: f64, degenerate: bool) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult {
            statistic,
            p_value,
            n,
            alpha,
            reject: p_value < alpha,
            degenerate,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Two-sided tail `P(|T| >= |t|)` of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x)
}

pub fn paired_t_test(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "paired samples differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSupport { found: n, required: 2 });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("paired samples contain non-finite values".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = crate::rng::compensated_sum(d.iter().copied()) / nf;
    let ss = crate::rng::compensated_sum(d.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (nf - 1.0)).sqrt();
    // Differences that agree up to rounding of the inputs count as constant.
    let scale = x.iter().chain(y).fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = 8.0 * f64::EPSILON * scale;
    if sd <= noise {
        let t = if mean.abs() <= noise { 0.0 } else { mean.signum() * f64::INFINITY };
        let p = if t == 0.0 { 1.0 } else { 0.0 };
        return Ok(TestResult::new(t, p, (n, n), alpha, true));
    }
    let t = mean / (sd / nf.sqrt());
    Ok(TestResult::new(t, t_two_sided_p(t, nf - 1.0), (n, n), alpha, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KsPValue {
    /// Exact for `n_x * n_y <= KS_EXACT_LIMIT`, asymptotic above.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

/// `D * n_x * n_y` as an integer: the largest `|i * n_y - j * n_x|` over
/// pooled values, where `i`, `j` count sample points `<= v`.
pub fn ks_numerator(x: &[f64], y: &[f64]) -> u64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as i64, ys.len() as i64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best = 0i64;
    while i < xs.len() || j < ys.len() {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(a), Some(b)) => a.min(*b),
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => unreachable!(),
        };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        best = best.max((i as i64 * ny - j as i64 * nx).abs());
    }
    best as u64
}

/// Exact `P(D >= dnum / (nx*ny))` under exchangeability, no ties: the
/// fraction of monotone lattice paths that touch `|i*ny - j*nx| >= dnum`.
pub fn ks_exact_p(nx: usize, ny: usize, dnum: u64) -> f64 {
    let hit = |i: usize, j: usize| (i as i64 * ny as i64 - j as i64 * nx as i64).unsigned_abs() >= dnum;
    let mut row = vec![0.0f64; ny + 1];
    for i in 0..=nx {
        for j in 0..=ny {
            row[j] = if hit(i, j) {
                1.0
            } else if i == 0 && j == 0 {
                0.0
            } else {
                let (fi, fj) = (i as f64, j as f64);
                let up = if i > 0 { row[j] * fi } else { 0.0 };
                let left = if j > 0 { row[j - 1] * fj } else { 0.0 };
                (up + left) / (fi + fj)
            };
        }
    }
    row[ny]
}

/// Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // The alternating series converges slowly here; use the theta form.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=64u32 {
            let m = f64::from(2 * k - 1);
            let term = (-m * m * c).exp();
            s += term;
            if term < 1e-16 {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..=100u32 {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * s).clamp(0.0, 1.0)
}

pub fn ks_asymptotic_p(nx: usize, ny: usize, d: f64) -> f64 {
    let ne = (nx * ny) as f64 / (nx + ny) as f64;
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

pub fn ks_two_sample(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult> {
    ks_two_sample_with(x, y, alpha, KsPValue::Auto)
}

pub fn ks_two_sample_with(x: &[f64], y: &[f64], alpha: f64, mode: KsPValue) -> Result<TestResult> {
    check_alpha(alpha)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::InsufficientSupport { found: x.len().min(y.len()), required: 1 });
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("K-S samples contain NaN".into()));
    }
    let (nx, ny) = (x.len(), y.len());
    let dnum = ks_numerator(x, y);
    let d = dnum as f64 / (nx as f64 * ny as f64);
    let exact = match mode {
        KsPValue::Exact => true,
        KsPValue::Asymptotic => false,
        KsPValue::Auto => nx.saturating_mul(ny) <= KS_EXACT_LIMIT,
    };
    let p = if dnum == 0 {
        1.0
    } else if exact {
        ks_exact_p(nx, ny, dnum)
    } else {
        ks_asymptotic_p(nx, ny, d)
    };
    Ok(TestResult::new(d, p, (nx, ny), alpha, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "EPE")]
    Epe,
    #[serde(rename = "ETE")]
    Ete,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 2] = [NetworkKind::Epe, NetworkKind::Ete];

    pub fn code(self) -> &'static str {
        match self {
            NetworkKind::Epe => "EPE",
            NetworkKind::Ete => "ETE",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EPE" => Ok(NetworkKind::Epe),
            "ETE" => Ok(NetworkKind::Ete),
            _ => Err(Error::param("network", format!("unknown network `{s}` (EPE or ETE)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub network: NetworkKind,
    pub season: Season,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub paired_t: TestResult,
    pub ks: TestResult,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done(CellResult),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub cells: BTreeMap<CellKey, CellOutcome>,
    /// Requested cells with no input at all.
    pub missing: Vec<CellKey>,
}

/// Row order: network, then summer before winter (`Season` orders JJA first).
fn row_order(mut rows: Vec<(NetworkKind, Season)>) -> Vec<(NetworkKind, Season)> {
    rows.sort();
    rows.dedup();
    rows
}

/// Runs both tests on every supplied cell. `expected` lists cells that should
/// be present; those without input are recorded as missing.
pub fn compare_methods(
    runs: &BTreeMap<CellKey, PairedFields>,
    expected: &[CellKey],
    alpha: f64,
) -> Result<ComparisonReport> {
    check_alpha(alpha)?;
    let cells: BTreeMap<CellKey, CellOutcome> = runs
        .par_iter()
        .map(|(key, pf)| {
            let (x, y) = snap_pair(&pf.x, &pf.y);
            let outcome = paired_t_test(&x, &y, alpha)
                .and_then(|t| Ok((t, ks_two_sample(&x, &y, alpha)?)))
                .map(|(paired_t, ks)| {
                    CellOutcome::Done(CellResult { paired_t, ks, n_nodes: pf.x.len() })
                })
                .unwrap_or_else(|e| CellOutcome::Failed(e.to_string()));
            (*key, outcome)
        })
        .collect();
    let mut missing: Vec<CellKey> = expected.iter().filter(|k| !runs.contains_key(k)).copied().collect();
    missing.sort();
    missing.dedup();
    Ok(ComparisonReport { alpha, cells, missing })
}

/// Relative resolution at which the two fields of a cell are compared.
pub const COMPARE_RESOLUTION: f64 = 1e-12;

/// Rounds both samples onto a common grid of `COMPARE_RESOLUTION` times the
/// largest magnitude, so values equal up to rounding noise become exact ties.
pub fn snap_pair(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let scale = x.iter().chain(y).filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return (x.to_vec(), y.to_vec());
    }
    let step = scale * COMPARE_RESOLUTION;
    let snap = |v: &f64| if v.is_finite() { (v / step).round() * step } else { *v };
    (x.iter().map(snap).collect(), y.iter().map(snap).collect())
}

/// Three significant figures as `m.mm×10^e`; `0.00` below 1e-300.
pub fn format_p(p: f64) -> String {
    if p.is_nan() {
        return "nan".into();
    }
    if p < 1e-300 {
        return "0.00".into();
    }
    let s = format!("{p:.2e}");
    let (mant, exp) = s.split_once('e').expect("scientific format");
    format!("{mant}×10^{exp}")
}

fn result_json(r: &TestResult) -> Value {
    json!({ "stat": r.statistic, "p": r.p_value, "reject": r.reject })
}

impl ComparisonReport {
    pub fn get(&self, network: NetworkKind, season: Season, metric: Metric) -> Option<&CellResult> {
        match self.cells.get(&CellKey { network, season, metric }) {
            Some(CellOutcome::Done(r)) => Some(r),
            _ => None,
        }
    }

    /// Cells that were requested or attempted but hold no result.
    pub fn incomplete(&self) -> Vec<(CellKey, String)> {
        let mut out: Vec<(CellKey, String)> =
            self.missing.iter().map(|k| (*k, "no input".to_string())).collect();
        for (k, c) in &self.cells {
            if let CellOutcome::Failed(msg) = c {
                out.push((*k, msg.clone()));
            }
        }
        out.sort_by_key(|(k, _)| *k);
        out
    }

    fn keys(&self) -> impl Iterator<Item = CellKey> + '_ {
        self.cells.keys().chain(self.missing.iter()).copied()
    }

    /// `{network: {season: {metric: {paired_t: {stat, p, reject}, ks: {...}}}}}`;
    /// cells without a result are `null`.
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for key in self.keys() {
            let cell = match self.cells.get(&key) {
                Some(CellOutcome::Done(r)) => json!({
                    "paired_t": result_json(&r.paired_t),
                    "ks": result_json(&r.ks),
                }),
                _ => Value::Null,
            };
            let net = root
                .entry(key.network.code())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("object");
            let season = net
                .entry(key.season.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("object");
            season.insert(key.metric.code().to_string(), cell);
        }
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }

    /// Plain-text table: one block per network-season, a paired-t and a KS row,
    /// metrics as columns.
    pub fn to_text(&self) -> String {
        let rows = row_order(self.keys().map(|k| (k.network, k.season)).collect());
        let width = 16;
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "Statistical test");
        for m in Metric::ALL {
            let _ = write!(out, "{:>width$}", m.code());
        }
        out.push('\n');
        for (network, season) in rows {
            let label = match season {
                Season::Jja => "Summer (JJA)",
                Season::Djf => "Winter (DJF)",
            };
            let _ = writeln!(out, "{network} network-{label}");
            for (name, pick) in [
                ("Paired t-test", (|c: &CellResult| c.paired_t.p_value) as fn(&CellResult) -> f64),
                ("KS test", |c: &CellResult| c.ks.p_value),
            ] {
                let _ = write!(out, "{name:<16}");
                for metric in Metric::ALL {
                    let text = match self.cells.get(&CellKey { network, season, metric }) {
                        Some(CellOutcome::Done(c)) => format_p(pick(c)),
                        Some(CellOutcome::Failed(_)) => "failed".into(),
                        None => "-".into(),
                    };
                    let _ = write!(out, "{text:>width$}");
                }
                out.push('\n');
            }
        }
        let incomplete = self.incomplete();
        if !incomplete.is_empty() {
            out.push_str("\nMissing cells:\n");
            for (k, why) in incomplete {
                let _ = writeln!(out, "  {}-{} {}: {why}", k.network, k.season, k.metric);
            }
        }
        let _ = writeln!(out, "\nalpha = {}", self.alpha);
        out
    }
}
