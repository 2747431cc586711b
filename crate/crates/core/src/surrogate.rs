//! Spatially embedded surrogate networks.
//!
//! A surrogate keeps the node positions of the original network and links
//! every node pair independently with the empirical probability `p(Δ)` of
//! the distance bin the pair falls in. Ensemble means of node metrics over
//! such surrogates give the value expected from the spatial embedding alone.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_io::{GridSpec};
use crate::netmetrics::{compute_metric, haversine, Metric};
use crate::network::Network;
use crate::rng::{member_seed, stream, CompensatedSum};

pub const DEFAULT_BIN_WIDTH_KM: f64 = 50.0;

/// Members evaluated per parallel batch. Fixed, so that accumulation order
/// does not depend on the thread count.
const MEMBER_BATCH: usize = 16;

/// Link probability per distance bin `[k w, (k+1) w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    pub bin_width_km: f64,
    pub pair_count: Vec<u64>,
    pub link_count: Vec<u64>,
    pub prob: Vec<f64>,
}

impl DistanceProfile {
    pub fn n_bins(&self) -> usize {
        self.prob.len()
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.n_bins()).map(|k| k as f64 * self.bin_width_km).collect()
    }

    pub fn bin_of(&self, distance_km: f64) -> usize {
        (distance_km / self.bin_width_km).floor() as usize
    }

    /// `p(Δ)`; zero beyond the last bin.
    pub fn prob_at(&self, distance_km: f64) -> f64 {
        self.prob.get(self.bin_of(distance_km)).copied().unwrap_or(0.0)
    }

    /// Expected number of links, `Σ pairs·p`.
    pub fn expected_links(&self) -> f64 {
        self.pair_count
            .iter()
            .zip(&self.prob)
            .map(|(&c, &p)| c as f64 * p)
            .sum()
    }

    /// CSV `bin_lo_km,bin_hi_km,pairs,links,prob`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("bin_lo_km,bin_hi_km,pairs,links,prob\n");
        for k in 0..self.n_bins() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                k as f64 * self.bin_width_km,
                (k + 1) as f64 * self.bin_width_km,
                self.pair_count[k],
                self.link_count[k],
                self.prob[k]
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn pair_distances(grid: &GridSpec) -> Vec<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let here = grid.coords(i);
            (i + 1..grid.len()).map(|j| haversine(here, grid.coords(j))).collect()
        })
        .collect()
}

/// Bins every unordered node pair by distance and records the fraction that
/// is linked. An edgeless network yields `p ≡ 0`.
pub fn estimate_profile(net: &Network, bin_width_km: f64) -> Result<DistanceProfile> {
    if !(bin_width_km > 0.0 && bin_width_km.is_finite()) {
        return Err(Error::param("bin_width_km", format!("{bin_width_km} must be positive")));
    }
    let dist = pair_distances(net.grid());
    let max_d = dist.iter().flatten().copied().fold(0.0, f64::max);
    let n_bins = (max_d / bin_width_km).floor() as usize + 1;
    let mut pair_count = vec![0u64; n_bins];
    let mut link_count = vec![0u64; n_bins];
    for (i, row) in dist.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let bin = (d / bin_width_km).floor() as usize;
            pair_count[bin] += 1;
            if net.has_edge(i, i + 1 + k) {
                link_count[bin] += 1;
            }
        }
    }
    let prob = pair_count
        .iter()
        .zip(&link_count)
        .map(|(&p, &l)| if p == 0 { 0.0 } else { l as f64 / p as f64 })
        .collect();
    Ok(DistanceProfile {
        bin_width_km,
        pair_count,
        link_count,
        prob,
    })
}

/// Per-pair link probabilities for one grid, computed once and reused for
/// every ensemble member.
pub struct SurrogateSampler {
    grid: GridSpec,
    /// Row `i` holds `p` for pairs `(i, j)`, `j > i`.
    pair_prob: Vec<Vec<f64>>,
}

impl SurrogateSampler {
    pub fn new(profile: &DistanceProfile, grid: &GridSpec) -> Self {
        let pair_prob = pair_distances(grid)
            .into_iter()
            .map(|row| row.into_iter().map(|d| profile.prob_at(d)).collect())
            .collect();
        SurrogateSampler {
            grid: grid.clone(),
            pair_prob,
        }
    }

    /// Expected degree of every node, `Σ_j p(D_ij)`.
    pub fn expected_degree(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut deg = vec![CompensatedSum::default(); n];
        for (i, row) in self.pair_prob.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                deg[i].add(p);
                deg[i + 1 + k].add(p);
            }
        }
        deg.iter().map(CompensatedSum::value).collect()
    }

    /// One surrogate, fully determined by `key`.
    pub fn sample(&self, key: u64) -> Network {
        let mut rng = stream(key);
        let mut edges = Vec::new();
        for (i, row) in self.pair_prob.iter().enumerate() {
            for (k, &p) in row.iter().enumerate() {
                let linked = if p <= 0.0 {
                    false
                } else if p >= 1.0 {
                    true
                } else {
                    rng.random::<f64>() < p
                };
                if linked {
                    edges.push((i, i + 1 + k));
                }
            }
        }
        Network::from_edges(self.grid.clone(), edges).expect("pairs are in range and distinct")
    }
}

pub fn sample_surrogate(profile: &DistanceProfile, grid: &GridSpec, member_key: u64) -> Network {
    SurrogateSampler::new(profile, grid).sample(member_key)
}

/// Ensemble mean of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateStats {
    pub metric: Metric,
    pub mean: Vec<f64>,
    pub ensemble_size: usize,
    pub zero_mean_nodes: Vec<usize>,
}

/// Per-node ensemble means of `metrics` over `ensemble_size` surrogates.
/// Member `k` uses the stream `member_seed(seed, k)`.
pub fn ensemble_stats(
    profile: &DistanceProfile,
    grid: &GridSpec,
    metrics: &[Metric],
    ensemble_size: usize,
    seed: u64,
) -> Result<Vec<SurrogateStats>> {
    if ensemble_size == 0 {
        return Err(Error::param("ensemble_size", "must be at least 1"));
    }
    if metrics.contains(&Metric::Betweenness) && grid.len() < 3 {
        return Err(Error::InvalidInput("betweenness needs at least 3 nodes".into()));
    }
    let sampler = SurrogateSampler::new(profile, grid);
    let n = grid.len();
    let mut sums = vec![vec![CompensatedSum::default(); n]; metrics.len()];

    let members: Vec<usize> = (0..ensemble_size).collect();
    for batch in members.chunks(MEMBER_BATCH) {
        let fields: Vec<Vec<Vec<f64>>> = batch
            .par_iter()
            .map(|&k| {
                let net = sampler.sample(member_seed(seed, k));
                metrics
                    .iter()
                    .map(|&m| compute_metric(&net, m).map(|f| f.values))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for member in &fields {
            for (acc, values) in sums.iter_mut().zip(member) {
                for (a, &v) in acc.iter_mut().zip(values) {
                    a.add(v);
                }
            }
        }
    }

    Ok(metrics
        .iter()
        .zip(sums)
        .map(|(&metric, acc)| {
            let mean: Vec<f64> = acc.iter().map(|s| s.value() / ensemble_size as f64).collect();
            let zero_mean_nodes = (0..n).filter(|&i| mean[i] == 0.0).collect();
            SurrogateStats {
                metric,
                mean,
                ensemble_size,
                zero_mean_nodes,
            }
        })
        .collect())
}

/// CSV `node_id,metric,mean,zero_flag`, metrics in the given order.
pub fn write_surrogate_stats(stats: &[SurrogateStats], path: &Path) -> Result<()> {
    let mut out = String::from("node_id,metric,mean,zero_flag\n");
    for s in stats {
        for (i, m) in s.mean.iter().enumerate() {
            out.push_str(&format!("{i},{},{m},{}\n", s.metric, u8::from(*m == 0.0)));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_surrogate_stats(path: &Path, ensemble_size: usize) -> Result<Vec<SurrogateStats>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "node_id,metric,mean,zero_flag")) => {}
        _ => return Err(Error::format(path, "line 1", "schema mismatch, expected `node_id,metric,mean,zero_flag`")),
    }
    let mut out: Vec<SurrogateStats> = Vec::new();
    for (k, line) in lines {
        let bad = |msg: &str| Error::format(path, format!("line {}", k + 1), format!("{msg}: `{line}`"));
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let node: usize = parts[0].parse().map_err(|_| bad("bad node_id"))?;
        let metric: Metric = parts[1].parse().map_err(|_| bad("bad metric"))?;
        let mean: f64 = parts[2].parse().map_err(|_| bad("bad mean"))?;
        if out.last().is_none_or(|s| s.metric != metric) {
            out.push(SurrogateStats {
                metric,
                mean: Vec::new(),
                ensemble_size,
                zero_mean_nodes: Vec::new(),
            });
        }
        let cur = out.last_mut().unwrap();
        if node != cur.mean.len() {
            return Err(bad("node ids must run 0..n per metric"));
        }
        if mean == 0.0 {
            cur.zero_mean_nodes.push(node);
        }
        cur.mean.push(mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmetrics::degree;

    fn lattice(rows: usize, cols: usize, step: f64) -> GridSpec {
        GridSpec::new(
            (0..rows * cols)
                .map(|k| ((k / cols) as f64 * step, (k % cols) as f64 * step))
                .collect(),
        )
        .unwrap()
    }

    fn geometric(grid: &GridSpec, d0: f64) -> Network {
        let n = grid.len();
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| haversine(grid.coords(i), grid.coords(j)) <= d0);
        Network::from_edges(grid.clone(), edges.collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn complete_graph_profile_is_one() {
        let g = lattice(4, 4, 0.5);
        let net = geometric(&g, 1e9);
        let prof = estimate_profile(&net, 50.0).unwrap();
        for k in 0..prof.n_bins() {
            if prof.pair_count[k] > 0 {
                assert_eq!(prof.prob[k], 1.0);
            }
        }
        assert_eq!(prof.pair_count.iter().sum::<u64>(), 16 * 15 / 2);
        let sur = sample_surrogate(&prof, &g, 1);
        assert_eq!(sur.edge_count(), 120);
    }

    #[test]
    fn edgeless_profile_is_zero() {
        let g = lattice(3, 3, 0.5);
        let prof = estimate_profile(&Network::edgeless(g.clone()), 50.0).unwrap();
        assert!(prof.prob.iter().all(|&p| p == 0.0));
        assert_eq!(sample_surrogate(&prof, &g, 3).edge_count(), 0);
        assert!(estimate_profile(&Network::edgeless(g), 0.0).is_err());
    }

    #[test]
    fn hard_cutoff_profile_matches_brute_force_bins() {
        let g = lattice(6, 6, 0.5);
        let d0 = 120.0;
        let net = geometric(&g, d0);
        let w = 25.0;
        let prof = estimate_profile(&net, w).unwrap();
        // Recount every pair independently.
        let n = g.len();
        let mut pairs = vec![0u64; prof.n_bins()];
        let mut links = vec![0u64; prof.n_bins()];
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    let d = haversine(g.coords(i), g.coords(j));
                    let b = (d / w) as usize;
                    pairs[b] += 1;
                    if d <= d0 {
                        links[b] += 1;
                    }
                }
            }
        }
        assert_eq!(prof.pair_count, pairs);
        assert_eq!(prof.link_count, links);
        for k in 0..prof.n_bins() {
            let hi = (k + 1) as f64 * w;
            let lo = k as f64 * w;
            if pairs[k] > 0 && hi <= d0 {
                assert_eq!(prof.prob[k], 1.0);
            }
            if lo > d0 {
                assert_eq!(prof.prob[k], 0.0);
            }
        }
    }

    #[test]
    fn edge_counts_follow_binomial_expectation() {
        let g = lattice(8, 8, 0.5);
        let prof = DistanceProfile {
            bin_width_km: 100.0,
            pair_count: vec![0; 6],
            link_count: vec![0; 6],
            prob: vec![0.9, 0.5, 0.3, 0.1, 0.05, 0.02],
        };
        let sampler = SurrogateSampler::new(&prof, &g);
        let (mut mean, mut var) = (0.0, 0.0);
        for row in &sampler.pair_prob {
            for &p in row {
                mean += p;
                var += p * (1.0 - p);
            }
        }
        let members = 200;
        let total: usize = (0..members).map(|k| sampler.sample(member_seed(4, k)).edge_count()).sum();
        let avg = total as f64 / members as f64;
        let sigma = (var / members as f64).sqrt();
        assert!((avg - mean).abs() < 3.0 * sigma, "{avg} vs {mean} ± {sigma}");
    }

    #[test]
    fn single_member_mean_is_that_member() {
        let g = lattice(5, 5, 0.5);
        let prof = estimate_profile(&geometric(&g, 130.0), 50.0).unwrap();
        let stats = ensemble_stats(&prof, &g, &[Metric::Degree, Metric::Betweenness], 1, 8).unwrap();
        let member = sample_surrogate(&prof, &g, member_seed(8, 0));
        assert_eq!(stats[0].mean, degree(&member).values);
        assert_eq!(stats[1].mean, crate::netmetrics::betweenness(&member).unwrap().values);
    }

    #[test]
    fn ensemble_degree_tracks_expected_degree() {
        let g = lattice(7, 7, 0.5);
        let prof = DistanceProfile {
            bin_width_km: 60.0,
            pair_count: vec![0; 4],
            link_count: vec![0; 4],
            prob: vec![0.8, 0.4, 0.2, 0.1],
        };
        let size = 200;
        let stats = ensemble_stats(&prof, &g, &[Metric::Degree], size, 21).unwrap();
        let sampler = SurrogateSampler::new(&prof, &g);
        let expected = sampler.expected_degree();
        for i in 0..g.len() {
            let var: f64 = (0..g.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let p = prof.prob_at(haversine(g.coords(i), g.coords(j)));
                    p * (1.0 - p)
                })
                .sum();
            let sigma = (var / size as f64).sqrt();
            assert!((stats[0].mean[i] - expected[i]).abs() <= 3.5 * sigma.max(1e-12));
        }
    }

    #[test]
    fn isolated_node_has_zero_surrogate_mean() {
        let mut coords: Vec<(f64, f64)> = (0..16).map(|k| ((k / 4) as f64 * 0.5, (k % 4) as f64 * 0.5)).collect();
        coords.push((30.0, 30.0));
        let g = GridSpec::new(coords).unwrap();
        let net = geometric(&g, 80.0);
        let prof = estimate_profile(&net, 50.0).unwrap();
        let stats = ensemble_stats(&prof, &g, &[Metric::Degree], 20, 2).unwrap();
        assert_eq!(stats[0].mean[16], 0.0);
        assert!(stats[0].zero_mean_nodes.contains(&16));
    }

    #[test]
    fn ensemble_is_deterministic_across_thread_counts() {
        let g = lattice(6, 6, 0.5);
        let prof = estimate_profile(&geometric(&g, 150.0), 40.0).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_stats(&prof, &g, &Metric::ALL, 40, 77).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn stats_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sur.csv");
        let stats = vec![
            SurrogateStats { metric: Metric::Degree, mean: vec![0.0, 1.25, 3.0], ensemble_size: 5, zero_mean_nodes: vec![0] },
            SurrogateStats { metric: Metric::Clustering, mean: vec![0.1, 0.0, 0.2], ensemble_size: 5, zero_mean_nodes: vec![1] },
        ];
        write_surrogate_stats(&stats, &path).unwrap();
        assert_eq!(read_surrogate_stats(&path, 5).unwrap(), stats);
    }
}
