//! Node-level network metrics.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::rng::CompensatedSum;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Sources per betweenness work unit. Fixed so that the summation order is
/// the same for every thread count.
const BC_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "DC")]
    Degree,
    #[serde(rename = "CC")]
    Clustering,
    #[serde(rename = "MGD")]
    MeanGeoDistance,
    #[serde(rename = "BC")]
    Betweenness,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Degree,
        Metric::Clustering,
        Metric::MeanGeoDistance,
        Metric::Betweenness,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Metric::Degree => "DC",
            Metric::Clustering => "CC",
            Metric::MeanGeoDistance => "MGD",
            Metric::Betweenness => "BC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DC" => Ok(Metric::Degree),
            "CC" => Ok(Metric::Clustering),
            "MGD" => Ok(Metric::MeanGeoDistance),
            "BC" => Ok(Metric::Betweenness),
            _ => Err(Error::param("metric", format!("unknown metric `{s}`"))),
        }
    }
}

/// One value per node. Nodes where the metric's formula is undefined carry
/// their conventional value (0) and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub metric: Metric,
    pub values: Vec<f64>,
    pub undefined: Vec<bool>,
}

impl MetricField {
    pub fn new(metric: Metric, values: Vec<f64>) -> Self {
        let undefined = vec![false; values.len()];
        MetricField {
            metric,
            values,
            undefined,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn undefined_count(&self) -> usize {
        self.undefined.iter().filter(|&&u| u).count()
    }
}

/// Great-circle distance in km between `(lat, lon)` points in degrees.
pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

pub fn degree(net: &Network) -> MetricField {
    let values = (0..net.n()).map(|i| net.degree(i) as f64).collect();
    MetricField::new(Metric::Degree, values)
}

/// Number of links among the neighbors of `node`.
pub fn links_among_neighbors(net: &Network, node: usize) -> usize {
    let nbrs = net.neighbors(node);
    let twice: usize = nbrs
        .iter()
        .map(|&j| sorted_intersection_len(nbrs, net.neighbors(j as usize)))
        .sum();
    twice / 2
}

fn sorted_intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Local clustering coefficient `2 L_i / (k_i (k_i - 1))`; nodes with degree
/// below 2 get 0 and are flagged undefined.
pub fn clustering(net: &Network) -> MetricField {
    let (values, undefined) = (0..net.n())
        .into_par_iter()
        .map(|i| {
            let k = net.degree(i);
            if k < 2 {
                (0.0, true)
            } else {
                let links = links_among_neighbors(net, i);
                (2.0 * links as f64 / (k * (k - 1)) as f64, false)
            }
        })
        .unzip();
    MetricField {
        metric: Metric::Clustering,
        values,
        undefined,
    }
}

/// Mean haversine distance to neighbors; isolated nodes get 0, flagged.
pub fn mean_geo_distance(net: &Network) -> MetricField {
    let grid = net.grid();
    let (values, undefined) = (0..net.n())
        .into_par_iter()
        .map(|i| {
            let nbrs = net.neighbors(i);
            if nbrs.is_empty() {
                return (0.0, true);
            }
            let here = grid.coords(i);
            let mut sum = CompensatedSum::default();
            for &j in nbrs {
                sum.add(haversine(here, grid.coords(j as usize)));
            }
            (sum.value() / nbrs.len() as f64, false)
        })
        .unzip();
    MetricField {
        metric: Metric::MeanGeoDistance,
        values,
        undefined,
    }
}

/// Single-source shortest-path state reused across sources.
struct BrandesScratch {
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        BrandesScratch {
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    /// Adds the dependencies of every vertex on `source` into `acc`.
    fn accumulate(&mut self, net: &Network, source: usize, acc: &mut [f64]) {
        self.sigma.fill(0.0);
        self.dist.fill(-1);
        self.delta.fill(0.0);
        self.order.clear();

        self.sigma[source] = 1.0;
        self.dist[source] = 0;
        self.queue.push_back(source);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            for &w in net.neighbors(v) {
                let w = w as usize;
                if self.dist[w] < 0 {
                    self.dist[w] = self.dist[v] + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == self.dist[v] + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }

        // Predecessors of w are its neighbors one level closer to the source.
        for &w in self.order.iter().rev() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            for &v in net.neighbors(w) {
                let v = v as usize;
                if self.dist[v] >= 0 && self.dist[v] + 1 == self.dist[w] {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
            if w != source {
                acc[w] += self.delta[w];
            }
        }
    }
}

/// Normalized betweenness `2 Σ_{s<t} σ_st(v)/σ_st / ((n-1)(n-2))` over
/// unweighted shortest paths. Pairs in different components contribute
/// nothing; the normalization is global.
pub fn betweenness(net: &Network) -> Result<MetricField> {
    let n = net.n();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "betweenness needs at least 3 nodes, got {n}"
        )));
    }
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(BC_CHUNK)
        .map(|chunk| {
            let mut scratch = BrandesScratch::new(n);
            let mut acc = vec![0.0; n];
            for &s in chunk {
                scratch.accumulate(net, s, &mut acc);
            }
            acc
        })
        .collect();

    // Each unordered pair was visited from both ends.
    let norm = ((n - 1) * (n - 2)) as f64;
    let values = (0..n)
        .map(|v| {
            let mut sum = CompensatedSum::default();
            for part in &partials {
                sum.add(part[v]);
            }
            sum.value() / norm
        })
        .collect();
    Ok(MetricField::new(Metric::Betweenness, values))
}

/// `ln(1 + BC)`, for display.
pub fn log_bc(mf: &MetricField) -> MetricField {
    MetricField {
        metric: mf.metric,
        values: mf.values.iter().map(|v| v.ln_1p()).collect(),
        undefined: mf.undefined.clone(),
    }
}

pub fn compute_metric(net: &Network, metric: Metric) -> Result<MetricField> {
    match metric {
        Metric::Degree => Ok(degree(net)),
        Metric::Clustering => Ok(clustering(net)),
        Metric::MeanGeoDistance => Ok(mean_geo_distance(net)),
        Metric::Betweenness => betweenness(net),
    }
}
