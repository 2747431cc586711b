//! Seeded synthetic inputs with known structure: lattices and spatially
//! embedded random graphs, clustered event fields, paired samples that
//! diverge by construction, and gridded daily fields with moving storms.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{dedup_consecutive, EventSeries};
use crate::grid_io::{GridSpec, GriddedSeries};
use crate::netmetrics::{haversine, EARTH_RADIUS_KM};
use crate::network::Network;
use crate::rng::{derive_seed, stream};

const TAG_LINK: u64 = 0x4C49_4E4B;
const TAG_GROUP: u64 = 0x4752_5550;
const TAG_NODE: u64 = 0x4E4F_4445;
const TAG_DIV: u64 = 0x4449_5645;
const TAG_STORM: u64 = 0x5354_524D;
const TAG_NOISE: u64 = 0x4E4F_4953;

/// Kilometres per degree of arc on the sphere used for distances.
pub fn km_per_degree() -> f64 {
    EARTH_RADIUS_KM * std::f64::consts::PI / 180.0
}

/// `rows x cols` nodes spaced `spacing_km` apart along the equator and the
/// central meridian, centred on (0, 0). Row-major ids.
pub fn rect_lattice(rows: usize, cols: usize, spacing_km: f64) -> Result<GridSpec> {
    if rows == 0 || cols == 0 {
        return Err(Error::param("layout", "lattice needs at least one row and column"));
    }
    if !(spacing_km > 0.0 && spacing_km.is_finite()) {
        return Err(Error::param("spacing_km", format!("must be positive, got {spacing_km}")));
    }
    let step = spacing_km / km_per_degree();
    let lat0 = -(rows as f64 - 1.0) / 2.0 * step;
    let lon0 = -(cols as f64 - 1.0) / 2.0 * step;
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            coords.push((lat0 + r as f64 * step, lon0 + c as f64 * step));
        }
    }
    GridSpec::new(coords)
}

/// Regular lat/lon grid starting at `(lat0, lon0)` with `step_deg` spacing.
pub fn regular_grid(lat0: f64, lon0: f64, rows: usize, cols: usize, step_deg: f64) -> Result<GridSpec> {
    let mut coords = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            coords.push((lat0 + r as f64 * step_deg, lon0 + c as f64 * step_deg));
        }
    }
    GridSpec::new(coords)
}

/// Marks nodes in the outer ring of width `ring` of a row-major lattice.
pub fn lattice_boundary(rows: usize, cols: usize, ring: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(r < ring || c < ring || r + ring >= rows || c + ring >= cols);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    RectLattice { rows: usize, cols: usize, spacing_km: f64 },
    #[serde(skip)]
    FromGrid(GridSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LinkModel {
    HardCutoff { d0_km: f64 },
    Exponential { p0: f64, lambda_km: f64 },
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LinkModel::HardCutoff { d0_km } if !(d0_km > 0.0) => {
                Err(Error::param("d0_km", format!("must be positive, got {d0_km}")))
            }
            LinkModel::Exponential { p0, .. } if !(p0 > 0.0 && p0 <= 1.0) => {
                Err(Error::param("p0", format!("must lie in (0, 1], got {p0}")))
            }
            LinkModel::Exponential { lambda_km, .. } if !(lambda_km > 0.0) => {
                Err(Error::param("lambda_km", format!("must be positive, got {lambda_km}")))
            }
            _ => Ok(()),
        }
    }

    pub fn prob(&self, d_km: f64) -> f64 {
        match *self {
            LinkModel::HardCutoff { d0_km } => f64::from(u8::from(d_km <= d0_km)),
            LinkModel::Exponential { p0, lambda_km } => p0 * (-d_km / lambda_km).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthNetSpec {
    pub layout: Layout,
    pub link_model: LinkModel,
    pub seed: u64,
}

impl SynthNetSpec {
    pub fn grid(&self) -> Result<GridSpec> {
        match &self.layout {
            Layout::RectLattice { rows, cols, spacing_km } => rect_lattice(*rows, *cols, *spacing_km),
            Layout::FromGrid(g) => Ok(g.clone()),
        }
    }
}

/// Links every pair independently with `link_model.prob(haversine)`.
/// Row `i` draws from its own stream, so results do not depend on threads.
pub fn gen_embedded_network(spec: &SynthNetSpec) -> Result<Network> {
    spec.link_model.validate()?;
    let grid = spec.grid()?;
    let n = grid.len();
    if n < 3 {
        return Err(Error::InvalidGrid(format!("embedded network needs at least 3 nodes, got {n}")));
    }
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = stream(derive_seed(spec.seed, &[TAG_LINK, i as u64]));
            let a = grid.coords(i);
            let grid = &grid;
            let model = spec.link_model;
            (i + 1..n).filter_map(move |j| {
                let p = model.prob(haversine(a, grid.coords(j)));
                let linked = if p >= 1.0 { true } else if p <= 0.0 { false } else { rng.random::<f64>() < p };
                linked.then_some((i, j))
            })
        })
        .collect();
    Network::from_edges(grid, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGroup {
    pub nodes: Vec<usize>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEventSpec {
    pub n_nodes: usize,
    /// Season length; days are `0..t`.
    pub t: usize,
    pub base_rate: f64,
    pub cluster_groups: Vec<ClusterGroup>,
    pub seed: u64,
    pub dedup: bool,
}

impl SynthEventSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(Error::param("base_rate", format!("must lie in [0, 1], got {}", self.base_rate)));
        }
        if self.t == 0 || self.t > i32::MAX as usize {
            return Err(Error::param("T", format!("must be positive, got {}", self.t)));
        }
        for (g, group) in self.cluster_groups.iter().enumerate() {
            if !(0.0..=1.0).contains(&group.rho) {
                return Err(Error::param("rho", format!("group {g}: must lie in [0, 1], got {}", group.rho)));
            }
            if let Some(&bad) = group.nodes.iter().find(|&&i| i >= self.n_nodes) {
                return Err(Error::IndexOutOfRange(format!("group {g} names node {bad} of {}", self.n_nodes)));
            }
        }
        Ok(())
    }
}

/// Joint group firing plus independent background events, then optional
/// consecutive-day dedup.
pub fn gen_event_field(spec: &SynthEventSpec) -> Result<Vec<EventSeries>> {
    spec.validate()?;
    let days: Arc<[i32]> = (0..spec.t as i32).collect();
    let mut fired = vec![vec![false; spec.t]; spec.n_nodes];
    for (g, group) in spec.cluster_groups.iter().enumerate() {
        let mut rng = stream(derive_seed(spec.seed, &[TAG_GROUP, g as u64]));
        for d in 0..spec.t {
            if rng.random::<f64>() < group.rho {
                for &i in &group.nodes {
                    fired[i][d] = true;
                }
            }
        }
    }
    fired
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let mut rng = stream(derive_seed(spec.seed, &[TAG_NODE, i as u64]));
            for slot in row.iter_mut() {
                if rng.random::<f64>() < spec.base_rate {
                    *slot = true;
                }
            }
            let event_days = (0..spec.t).filter(|&d| row[d]).map(|d| d as i32).collect();
            let es = EventSeries::new(i, event_days, Arc::clone(&days))?;
            Ok(if spec.dedup { dedup_consecutive(&es) } else { es })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceSpec {
    /// Common denominator offset.
    pub s: f64,
    /// Scale of the heterogeneous part `eps_i = eps_scale * u_i^2`.
    pub eps_scale: f64,
}

impl Default for DivergenceSpec {
    fn default() -> Self {
        DivergenceSpec { s: 0.05, eps_scale: 1.0 }
    }
}

/// Paired samples `x_i ~ U(0.1, 1)` and `y_i = x_i / (s + eps_i)`.
pub fn gen_divergence_fixture_with(n: usize, seed: u64, spec: DivergenceSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if n < 30 {
        return Err(Error::param("n", format!("divergence fixture needs n >= 30, got {n}")));
    }
    if !(spec.s + spec.eps_scale.min(0.0) > 0.0) {
        return Err(Error::param("s", "denominators must stay positive"));
    }
    let mut rng = stream(derive_seed(seed, &[TAG_DIV]));
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = 0.1 + 0.9 * rng.random::<f64>();
        let u: f64 = rng.random();
        x.push(xi);
        y.push(xi / (spec.s + spec.eps_scale * u * u));
    }
    Ok((x, y))
}

pub fn gen_divergence_fixture(n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    gen_divergence_fixture_with(n, seed, DivergenceSpec::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    /// Non-negative daily totals, dry days at zero.
    Precip,
    /// Daily temperature anomalies around a seasonal cycle.
    Temperature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StormFieldSpec {
    pub grid: GridSpec,
    pub first_day: i32,
    pub n_days: usize,
    pub kind: FieldKind,
    /// Expected storms per day.
    pub storm_rate: f64,
    pub storm_radius_km: f64,
    pub storm_amplitude: f64,
    pub wet_prob: f64,
    pub seed: u64,
}

struct Storm {
    day: usize,
    center: (f64, f64),
    amplitude: f64,
}

/// Daily field: independent background noise per node plus Gaussian storm
/// footprints shared by nearby nodes, so extremes co-occur in space.
pub fn gen_storm_field(spec: &StormFieldSpec) -> Result<GriddedSeries> {
    if spec.n_days == 0 {
        return Err(Error::param("n_days", "must be positive"));
    }
    if !(spec.storm_radius_km > 0.0) || !(spec.storm_rate >= 0.0) || !(0.0..=1.0).contains(&spec.wet_prob) {
        return Err(Error::param("storm", "radius must be positive, rate non-negative, wet_prob in [0, 1]"));
    }
    let grid = &spec.grid;
    let n = grid.len();
    let (mut lat_lo, mut lat_hi, mut lon_lo, mut lon_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..n {
        let (la, lo) = grid.coords(i);
        lat_lo = lat_lo.min(la);
        lat_hi = lat_hi.max(la);
        lon_lo = lon_lo.min(lo);
        lon_hi = lon_hi.max(lo);
    }

    let mut rng = stream(derive_seed(spec.seed, &[TAG_STORM]));
    let mut storms = Vec::new();
    let per_day = spec.storm_rate.floor() as usize;
    let frac = spec.storm_rate - per_day as f64;
    for day in 0..spec.n_days {
        let count = per_day + usize::from(rng.random::<f64>() < frac);
        for _ in 0..count {
            let center = (
                lat_lo + (lat_hi - lat_lo) * rng.random::<f64>(),
                lon_lo + (lon_hi - lon_lo) * rng.random::<f64>(),
            );
            let sign = match spec.kind {
                FieldKind::Precip => 1.0,
                FieldKind::Temperature => {
                    if rng.random::<bool>() { 1.0 } else { -1.0 }
                }
            };
            let amplitude = sign * spec.storm_amplitude * (0.5 + rng.random::<f64>());
            storms.push(Storm { day, center, amplitude });
        }
    }

    let days: Vec<i32> = (0..spec.n_days as i32).map(|k| spec.first_day + k).collect();
    let two_r2 = 2.0 * spec.storm_radius_km * spec.storm_radius_km;
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(derive_seed(spec.seed, &[TAG_NOISE, i as u64]));
            let here = grid.coords(i);
            let exp = Exp::new(1.0).expect("rate 1");
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let mut row: Vec<f64> = days
                .iter()
                .map(|&d| match spec.kind {
                    FieldKind::Precip => {
                        if rng.random::<f64>() < spec.wet_prob { exp.sample(&mut rng) } else { 0.0 }
                    }
                    FieldKind::Temperature => {
                        let phase = 2.0 * std::f64::consts::PI * (d as f64 - 196.0) / 365.25;
                        10.0 * phase.cos() + 3.0 * normal.sample(&mut rng)
                    }
                })
                .collect();
            for s in &storms {
                let d = haversine(here, s.center);
                row[s.day] += s.amplitude * (-d * d / two_r2).exp();
            }
            row.into_iter().map(|v| v as f32).collect()
        })
        .collect();
    GriddedSeries::new(grid.clone(), days, rows.concat())
}
