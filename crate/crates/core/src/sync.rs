//! Event synchronization between node pairs and significance-thresholded
//! network construction.
//!
//! Two events `t_m` at node i and `t_n` at node j are synchronized when their
//! delay `Δ = t_n - t_m` satisfies `|Δ| <= tau_max` and `|Δ| < τ`, where `τ`
//! is half the smallest gap between either event and its neighbors in its
//! own series. A pair of nodes is linked when its synchronization count
//! reaches the `link_quantile` order statistic of a shuffle null model.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventSeries;
use crate::grid_io::GridSpec;
use crate::network::Network;
use crate::rng::{derive_seed, pair_seed, stream};

pub const MIN_SHUFFLES: usize = 100;

/// Which key seeds the null-model stream of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// `per_counts` when `tau_max = 0`, otherwise `per_pair`.
    Auto,
    /// Stream keyed by `(seed, min(i,j), max(i,j))`.
    PerPair,
    /// Stream keyed by `(seed, T, min(N_i,N_j), max(N_i,N_j))`. Pairs with
    /// equal event counts share a null sample, which is what allows the
    /// threshold cache.
    PerCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncParams {
    pub tau_max: u32,
    pub n_shuffles: usize,
    pub link_quantile: f64,
    pub seed: u64,
    /// Weight of a simultaneous (`Δ = 0`) pair in the synchronization score.
    pub simultaneous_weight: f64,
    pub seed_policy: SeedPolicy,
    /// Cache null thresholds by `(T, N_i, N_j)`; effective only under the
    /// per-counts policy.
    pub memoize: bool,
}

impl Default for SyncParams {
    fn default() -> Self {
        SyncParams {
            tau_max: 0,
            n_shuffles: 1000,
            link_quantile: 0.995,
            seed: 0,
            simultaneous_weight: 1.0,
            seed_policy: SeedPolicy::Auto,
            memoize: true,
        }
    }
}

impl SyncParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_shuffles < MIN_SHUFFLES {
            return Err(Error::param(
                "n_shuffles",
                format!("{} < {MIN_SHUFFLES}", self.n_shuffles),
            ));
        }
        if !(self.link_quantile > 0.0 && self.link_quantile < 1.0) {
            return Err(Error::param(
                "link_quantile",
                format!("{} not in (0, 1)", self.link_quantile),
            ));
        }
        if !(self.simultaneous_weight > 0.0 && self.simultaneous_weight <= 1.0) {
            return Err(Error::param(
                "simultaneous_weight",
                format!("{} not in (0, 1]", self.simultaneous_weight),
            ));
        }
        Ok(())
    }

    pub fn effective_policy(&self) -> SeedPolicy {
        match self.seed_policy {
            SeedPolicy::Auto if self.tau_max == 0 => SeedPolicy::PerCounts,
            SeedPolicy::Auto => SeedPolicy::PerPair,
            p => p,
        }
    }
}

/// Delay between two events and the local time scale around them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPair {
    pub delta: i64,
    pub tau: f64,
}

/// Synchronization outcome for one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub es: f64,
    pub threshold: f64,
    pub significant: bool,
}

/// Synchronized event pairs, split by whether the delay is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyncCounts {
    pub simultaneous: u32,
    pub lagged: u32,
}

impl SyncCounts {
    pub fn total(self) -> u32 {
        self.simultaneous + self.lagged
    }

    pub fn score(self, simultaneous_weight: f64) -> f64 {
        self.lagged as f64 + simultaneous_weight * self.simultaneous as f64
    }
}

/// Smallest gap from `days[k]` to its neighbors within the same series.
fn min_own_gap(days: &[i32], k: usize) -> Option<i64> {
    let prev = (k > 0).then(|| days[k] as i64 - days[k - 1] as i64);
    let next = (k + 1 < days.len()).then(|| days[k + 1] as i64 - days[k] as i64);
    match (prev, next) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn local_tau_days(a: &[i32], m: usize, b: &[i32], n: usize) -> f64 {
    match (min_own_gap(a, m), min_own_gap(b, n)) {
        (Some(x), Some(y)) => 0.5 * x.min(y) as f64,
        (Some(x), None) | (None, Some(x)) => 0.5 * x as f64,
        (None, None) => f64::INFINITY,
    }
}

/// Local time scale for the `m`-th event of `ei` and `n`-th event of `ej`
/// (zero-based). Gaps past either end of a series are omitted; two
/// singleton series give `+inf`.
pub fn local_tau(ei: &EventSeries, ej: &EventSeries, m: usize, n: usize) -> Result<f64> {
    if m >= ei.len() || n >= ej.len() {
        return Err(Error::IndexOutOfRange(format!(
            "event ({m}, {n}) for series of length ({}, {})",
            ei.len(),
            ej.len()
        )));
    }
    Ok(local_tau_days(ei.event_days(), m, ej.event_days(), n))
}

pub fn delay_pair(ei: &EventSeries, ej: &EventSeries, m: usize, n: usize) -> Result<DelayPair> {
    let tau = local_tau(ei, ej, m, n)?;
    let delta = ej.event_days()[n] as i64 - ei.event_days()[m] as i64;
    Ok(DelayPair { delta, tau })
}

/// Synchronization counts between two sorted event-day slices.
pub fn sync_counts(a: &[i32], b: &[i32], tau_max: u32) -> SyncCounts {
    let mut counts = SyncCounts::default();
    let tau_max = tau_max as i64;
    for (m, &t) in a.iter().enumerate() {
        let lo = b.partition_point(|&s| (s as i64) < t as i64 - tau_max);
        for (n, &s) in b.iter().enumerate().skip(lo) {
            let delta = s as i64 - t as i64;
            if delta > tau_max {
                break;
            }
            if (delta.abs() as f64) < local_tau_days(a, m, b, n) {
                if delta == 0 {
                    counts.simultaneous += 1;
                } else {
                    counts.lagged += 1;
                }
            }
        }
    }
    counts
}

/// Number of synchronized event pairs, each counted once.
pub fn event_sync(ei: &EventSeries, ej: &EventSeries, tau_max: u32) -> u32 {
    sync_counts(ei.event_days(), ej.event_days(), tau_max).total()
}

/// Nearest-rank order statistic: element `ceil(q n)` (one-based) of the
/// ascending sample.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

/// Shuffle null sample drawn from the stream `key`.
fn null_sample(
    season: &[i32],
    n_i: usize,
    n_j: usize,
    params: &SyncParams,
    key: u64,
) -> Vec<f64> {
    let mut rng = stream(key);
    let t = season.len();
    let mut a = Vec::with_capacity(n_i);
    let mut b = Vec::with_capacity(n_j);
    let draw = |k: usize, out: &mut Vec<i32>, rng: &mut rand_chacha::ChaCha8Rng| {
        out.clear();
        out.extend(index::sample(rng, t, k).into_iter().map(|p| season[p]));
        out.sort_unstable();
    };
    let mut sample: Vec<f64> = (0..params.n_shuffles)
        .map(|_| {
            draw(n_i, &mut a, &mut rng);
            draw(n_j, &mut b, &mut rng);
            sync_counts(&a, &b, params.tau_max).score(params.simultaneous_weight)
        })
        .collect();
    sample.sort_by(f64::total_cmp);
    sample
}

fn null_threshold_keyed(
    season: &[i32],
    n_i: usize,
    n_j: usize,
    params: &SyncParams,
    key: u64,
) -> f64 {
    if n_i == 0 || n_j == 0 {
        return 0.0;
    }
    nearest_rank(&null_sample(season, n_i, n_j, params, key), params.link_quantile)
}

/// Stream key of the per-counts policy. The smaller count is drawn first so
/// that `(N_i, N_j)` and `(N_j, N_i)` share a sample.
pub fn counts_seed(seed: u64, t: usize, n_i: usize, n_j: usize) -> u64 {
    let (lo, hi) = if n_i <= n_j { (n_i, n_j) } else { (n_j, n_i) };
    derive_seed(seed, &[0x434E_5453, t as u64, lo as u64, hi as u64])
}

/// Null-model significance threshold: each shuffle draws `N_i` and `N_j`
/// event days uniformly without replacement from the season; the result is
/// the `link_quantile` nearest-rank order statistic of the shuffled scores.
/// Either series empty gives 0.
pub fn null_threshold(
    ei: &EventSeries,
    ej: &EventSeries,
    params: &SyncParams,
    pair_key: u64,
) -> Result<f64> {
    params.validate()?;
    let (n_i, n_j) = (ei.len(), ej.len());
    let (lo, hi) = if n_i <= n_j { (n_i, n_j) } else { (n_j, n_i) };
    Ok(null_threshold_keyed(ei.season_days(), lo, hi, params, pair_key))
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Smallest `k` with hypergeometric `CDF(k; T, N_i, N_j) >= q`: the exact
/// `q`-quantile of the overlap between independent uniform subsets of sizes
/// `N_i` and `N_j` of a `T`-day season.
pub fn null_threshold_exact(t: usize, n_i: usize, n_j: usize, q: f64) -> Result<u32> {
    if n_i > t || n_j > t {
        return Err(Error::param(
            "event counts",
            format!("N_i = {n_i}, N_j = {n_j} must not exceed T = {t}"),
        ));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::param("q", format!("{q} not in (0, 1]")));
    }
    let k_min = (n_i + n_j).saturating_sub(t);
    let k_max = n_i.min(n_j);
    if q >= 1.0 {
        return Ok(k_max as u32);
    }
    let lf = ln_factorials(t);
    let ln_choose = |n: usize, k: usize| lf[n] - lf[k] - lf[n - k];
    let ln_total = ln_choose(t, n_j);
    let mut cdf = 0.0;
    for k in k_min..=k_max {
        cdf += (ln_choose(n_i, k) + ln_choose(t - n_i, n_j - k) - ln_total).exp();
        if cdf >= q - 1e-12 {
            return Ok(k as u32);
        }
    }
    Ok(k_max as u32)
}

/// Complete synchronization result for one pair under `params`.
pub fn sync_pair(ei: &EventSeries, ej: &EventSeries, params: &SyncParams) -> Result<SyncResult> {
    params.validate()?;
    let es = sync_counts(ei.event_days(), ej.event_days(), params.tau_max)
        .score(params.simultaneous_weight);
    if ei.is_empty() || ej.is_empty() {
        return Ok(SyncResult { es, threshold: 0.0, significant: false });
    }
    let key = match params.effective_policy() {
        SeedPolicy::PerCounts => counts_seed(params.seed, ei.n_days_in_season(), ei.len(), ej.len()),
        _ => pair_seed(params.seed, ei.node_id(), ej.node_id()),
    };
    let threshold = null_threshold(ei, ej, params, key)?;
    Ok(SyncResult { es, threshold, significant: es >= threshold })
}

/// Null thresholds for every count pair that occurs among the series.
fn threshold_table(
    season: &[i32],
    counts: &[usize],
    params: &SyncParams,
) -> HashMap<(usize, usize), f64> {
    let mut multiplicity: HashMap<usize, usize> = HashMap::new();
    for &c in counts.iter().filter(|&&c| c > 0) {
        *multiplicity.entry(c).or_default() += 1;
    }
    let distinct: Vec<usize> = multiplicity.keys().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let keys: Vec<(usize, usize)> = distinct
        .iter()
        .enumerate()
        .flat_map(|(a, &lo)| distinct[a..].iter().map(move |&hi| (lo, hi)))
        .filter(|&(lo, hi)| lo != hi || multiplicity[&lo] >= 2)
        .collect();
    let t = season.len();
    keys.into_par_iter()
        .map(|(lo, hi)| {
            let key = counts_seed(params.seed, t, lo, hi);
            ((lo, hi), null_threshold_keyed(season, lo, hi, params, key))
        })
        .collect()
}

/// Links every pair whose synchronization score reaches its null threshold.
/// Nodes with empty series stay isolated. The edge set depends only on the
/// inputs and `params.seed`, never on scheduling.
pub fn build_network(all_series: &[EventSeries], grid: &GridSpec, params: &SyncParams) -> Result<Network> {
    params.validate()?;
    if all_series.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} event series for {} grid nodes",
            all_series.len(),
            grid.len()
        )));
    }
    if let Some((k, es)) = all_series.iter().enumerate().find(|(k, es)| es.node_id() != *k) {
        return Err(Error::InvalidInput(format!(
            "series at position {k} belongs to node {}",
            es.node_id()
        )));
    }
    let Some(first) = all_series.first() else {
        return Ok(Network::edgeless(grid.clone()));
    };
    let season: Arc<[i32]> = Arc::clone(first.season_days());
    if all_series
        .iter()
        .any(|es| !Arc::ptr_eq(es.season_days(), &season) && es.season_days()[..] != season[..])
    {
        return Err(Error::InvalidInput("event series come from different seasons".into()));
    }

    let policy = params.effective_policy();
    let counts: Vec<usize> = all_series.iter().map(EventSeries::len).collect();
    let table = (policy == SeedPolicy::PerCounts && params.memoize)
        .then(|| threshold_table(&season, &counts, params));
    let t = season.len();

    let n = all_series.len();
    let edges: Vec<Vec<(usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ei = &all_series[i];
            if ei.is_empty() {
                return Vec::new();
            }
            let mut linked = Vec::new();
            for (j, ej) in all_series.iter().enumerate().skip(i + 1) {
                if ej.is_empty() {
                    continue;
                }
                let es = sync_counts(ei.event_days(), ej.event_days(), params.tau_max)
                    .score(params.simultaneous_weight);
                let (lo, hi) = if ei.len() <= ej.len() { (ei.len(), ej.len()) } else { (ej.len(), ei.len()) };
                let threshold = match (&table, policy) {
                    (Some(tab), _) => tab[&(lo, hi)],
                    (None, SeedPolicy::PerCounts) => {
                        null_threshold_keyed(&season, lo, hi, params, counts_seed(params.seed, t, lo, hi))
                    }
                    (None, _) => null_threshold_keyed(&season, lo, hi, params, pair_seed(params.seed, i, j)),
                };
                if es >= threshold {
                    linked.push((i, j));
                }
            }
            linked
        })
        .collect();
    Network::from_edges(grid.clone(), edges.into_iter().flatten())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn season(t: i32) -> Arc<[i32]> {
        (0..t).collect::<Vec<_>>().into()
    }

    fn series(id: usize, days: &[i32], t: i32) -> EventSeries {
        EventSeries::new(id, days.to_vec(), season(t)).unwrap()
    }

    #[test]
    fn local_tau_examples() {
        let ei = series(0, &[10, 14, 20], 40);
        let ej = series(1, &[13, 19], 40);
        assert_eq!(local_tau(&ei, &ej, 1, 0).unwrap(), 2.0);
        let a = series(0, &[5], 40);
        let b = series(1, &[9], 40);
        assert_eq!(local_tau(&a, &b, 0, 0).unwrap(), f64::INFINITY);
        let a = series(0, &[5, 7], 40);
        let b = series(1, &[6, 8], 40);
        assert_eq!(local_tau(&a, &b, 0, 0).unwrap(), 1.0);
        assert!(local_tau(&a, &b, 2, 0).is_err());
        let dp = delay_pair(&ei, &ej, 1, 0).unwrap();
        assert_eq!(dp, DelayPair { delta: -1, tau: 2.0 });
    }

    #[test]
    fn event_sync_examples() {
        let a = series(0, &[10, 20, 30], 40);
        assert_eq!(event_sync(&a, &a, 0), 3);
        let b = series(1, &[11, 21, 31], 40);
        assert_eq!(event_sync(&a, &b, 0), 0);
        // With a one-day lag allowed these all synchronize (τ = 5).
        assert_eq!(event_sync(&a, &b, 1), 3);
        assert_eq!(event_sync(&b, &a, 1), 3);
    }

    #[test]
    fn lag_must_be_strictly_below_local_tau() {
        // Gaps of 2 give τ = 1, so a one-day lag does not count.
        let a = series(0, &[10, 12], 40);
        let b = series(1, &[11, 13], 40);
        assert_eq!(event_sync(&a, &b, 3), 0);
        assert_eq!(sync_counts(&[10, 20], &[10, 21], 5), SyncCounts { simultaneous: 1, lagged: 1 });
        assert_eq!(SyncCounts { simultaneous: 2, lagged: 1 }.score(0.5), 2.0);
    }

    fn random_dedup(rng: &mut impl Rng, t: i32, rate: f64) -> Vec<i32> {
        let mut days = Vec::new();
        for d in 0..t {
            if rng.random_bool(rate) && days.last() != Some(&(d - 1)) {
                days.push(d);
            }
        }
        days
    }

    #[test]
    fn event_sync_equals_intersection_for_zero_lag() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (ra, rb) = (rng.random_range(0.01..0.1), rng.random_range(0.01..0.1));
            let a = random_dedup(&mut rng, 2760, ra);
            let b = random_dedup(&mut rng, 2760, rb);
            let set: std::collections::HashSet<_> = a.iter().collect();
            let expected = b.iter().filter(|d| set.contains(d)).count() as u32;
            assert_eq!(sync_counts(&a, &b, 0).total(), expected);
        }
    }

    /// Direct double loop over all event pairs.
    fn brute_force_es(a: &[i32], b: &[i32], tau_max: u32) -> u32 {
        let gap = |s: &[i32], k: usize| {
            let mut g = f64::INFINITY;
            if k > 0 {
                g = g.min((s[k] - s[k - 1]) as f64);
            }
            if k + 1 < s.len() {
                g = g.min((s[k + 1] - s[k]) as f64);
            }
            g
        };
        let mut count = 0;
        for m in 0..a.len() {
            for n in 0..b.len() {
                let delta = (b[n] - a[m]).abs() as f64;
                let tau = 0.5 * gap(a, m).min(gap(b, n));
                if delta <= tau_max as f64 && delta < tau {
                    count += 1;
                }
            }
        }
        count
    }

    proptest! {
        #[test]
        fn sync_matches_double_loop_and_is_symmetric(
            a in proptest::collection::btree_set(0i32..200, 0..40),
            b in proptest::collection::btree_set(0i32..200, 0..40),
            tau_max in 0u32..6,
        ) {
            let a: Vec<i32> = a.into_iter().collect();
            let b: Vec<i32> = b.into_iter().collect();
            let ab = sync_counts(&a, &b, tau_max).total();
            prop_assert_eq!(ab, brute_force_es(&a, &b, tau_max));
            prop_assert_eq!(ab, sync_counts(&b, &a, tau_max).total());
        }

        #[test]
        fn adding_a_shared_day_never_decreases_es(
            a in proptest::collection::btree_set(0i32..300, 0..40),
            b in proptest::collection::btree_set(0i32..300, 0..40),
            extra in 0i32..300,
        ) {
            let dedup = |s: Vec<i32>| {
                let mut out: Vec<i32> = Vec::new();
                for d in s {
                    if out.last().is_none_or(|&p| d > p + 1) { out.push(d); }
                }
                out
            };
            let a = dedup(a.into_iter().collect());
            let b = dedup(b.into_iter().collect());
            let free = |s: &[i32]| !s.iter().any(|&d| (d - extra).abs() <= 1);
            prop_assume!(free(&a) && free(&b));
            let before = sync_counts(&a, &b, 0).total();
            let mut a2 = a.clone(); a2.push(extra); a2.sort_unstable();
            let mut b2 = b.clone(); b2.push(extra); b2.sort_unstable();
            prop_assert!(sync_counts(&a2, &b2, 0).total() >= before + 1);
        }
    }

    #[test]
    fn nearest_rank_convention() {
        let sample: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(nearest_rank(&sample, 0.995), 995.0);
        assert_eq!(nearest_rank(&sample, 0.5), 500.0);
        assert_eq!(nearest_rank(&sample, 1e-9), 1.0);
    }

    #[test]
    fn null_threshold_edge_cases() {
        let p = SyncParams::default();
        let empty = EventSeries::empty(0, season(50));
        let full = series(1, &(0..50).collect::<Vec<_>>(), 50);
        assert_eq!(null_threshold(&empty, &full, &p, 1).unwrap(), 0.0);
        assert_eq!(null_threshold(&full, &full, &p, 1).unwrap(), 50.0);
        let few = SyncParams { n_shuffles: 99, ..p };
        assert!(null_threshold(&full, &full, &few, 1).is_err());
    }

    #[test]
    fn exact_threshold_edge_cases() {
        assert_eq!(null_threshold_exact(100, 0, 30, 0.995).unwrap(), 0);
        assert_eq!(null_threshold_exact(100, 40, 30, 1.0).unwrap(), 30);
        // Two 8-subsets of 10 items overlap in at least 6.
        assert_eq!(null_threshold_exact(10, 8, 8, 1e-6).unwrap(), 6);
        assert!(null_threshold_exact(10, 11, 3, 0.9).is_err());
        assert!(null_threshold_exact(10, 1, 3, 0.0).is_err());
    }

    /// Overlap distribution of all subset pairs of sizes (a, b) from T items.
    fn enumerate_quantile(t: u32, a: u32, b: u32, q: f64) -> u32 {
        let masks: Vec<u32> = (0u32..(1 << t)).collect();
        let sa: Vec<u32> = masks.iter().copied().filter(|m| m.count_ones() == a).collect();
        let sb: Vec<u32> = masks.iter().copied().filter(|m| m.count_ones() == b).collect();
        let mut hist = vec![0u64; (a.min(b) + 1) as usize];
        for x in &sa {
            for y in &sb {
                hist[(x & y).count_ones() as usize] += 1;
            }
        }
        let total = (sa.len() * sb.len()) as u64;
        let mut acc = 0u64;
        for (k, h) in hist.iter().enumerate() {
            acc += h;
            // acc / total >= q, in integers where q is a multiple of 1e-3
            if acc as f64 >= q * total as f64 - 1e-9 {
                return k as u32;
            }
        }
        a.min(b)
    }

    #[test]
    fn exact_threshold_matches_enumeration_t10() {
        let expected = enumerate_quantile(10, 5, 5, 0.995);
        assert_eq!(null_threshold_exact(10, 5, 5, 0.995).unwrap(), expected);
    }

    #[test]
    fn shuffle_threshold_tracks_hypergeometric() {
        let t = 2760;
        let exact = null_threshold_exact(t, 138, 138, 0.995).unwrap() as f64;
        let days: Vec<i32> = (0..138).map(|k| k * 20).collect();
        let a = series(0, &days, t as i32);
        let mut close = 0;
        for trial in 0..20 {
            let thr = null_threshold(&a, &a, &SyncParams::default(), trial).unwrap();
            if (thr - exact).abs() <= 1.0 {
                close += 1;
            }
        }
        assert!(close >= 18, "{close}/20");
    }

    #[test]
    fn memoized_and_fresh_thresholds_agree() {
        let t = 300;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let all: Vec<EventSeries> = (0..40)
            .map(|k| series(k, &random_dedup(&mut rng, t, 0.06), t))
            .collect();
        let grid = GridSpec::new((0..40).map(|k| (0.0, k as f64)).collect()).unwrap();
        let params = SyncParams { n_shuffles: 200, seed: 5, ..Default::default() };
        let memo = build_network(&all, &grid, &params).unwrap();
        let fresh = build_network(&all, &grid, &SyncParams { memoize: false, ..params }).unwrap();
        assert_eq!(memo, fresh);

        let table = threshold_table(&all[0].season_days()[..], &all.iter().map(|s| s.len()).collect::<Vec<_>>(), &params);
        for ((lo, hi), thr) in table {
            let key = counts_seed(params.seed, t as usize, lo, hi);
            assert_eq!(thr, null_threshold_keyed(&all[0].season_days()[..], lo, hi, &params, key));
        }
    }

    #[test]
    fn build_network_examples() {
        let t = 400;
        let grid = GridSpec::new((0..6).map(|k| (0.0, k as f64)).collect()).unwrap();
        let params = SyncParams { n_shuffles: 200, ..Default::default() };
        let empty: Vec<EventSeries> = (0..6).map(|k| EventSeries::empty(k, season(t))).collect();
        assert_eq!(build_network(&empty, &grid, &params).unwrap().edge_count(), 0);

        let heavy: Vec<i32> = (0..t).step_by(5).collect();
        let mut with_pair = empty.clone();
        with_pair[1] = series(1, &heavy, t);
        with_pair[4] = series(4, &heavy, t);
        let exact = null_threshold_exact(t as usize, heavy.len(), heavy.len(), 0.995).unwrap();
        assert!(heavy.len() as u32 > exact);
        let net = build_network(&with_pair, &grid, &params).unwrap();
        assert_eq!(net.edges().collect::<Vec<_>>(), vec![(1, 4)]);

        assert!(build_network(&empty[..5], &grid, &params).is_err());
    }

    #[test]
    fn per_pair_policy_is_order_and_thread_independent() {
        let t = 200;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let all: Vec<EventSeries> = (0..25)
            .map(|k| series(k, &random_dedup(&mut rng, t, 0.08), t))
            .collect();
        let grid = GridSpec::new((0..25).map(|k| (1.0, k as f64)).collect()).unwrap();
        let params = SyncParams { n_shuffles: 100, seed_policy: SeedPolicy::PerPair, seed: 9, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| build_network(&all, &grid, &params).unwrap());
        let b = build_network(&all, &grid, &params).unwrap();
        assert_eq!(a, b);
        for (i, j) in a.edges() {
            let r = sync_pair(&all[j], &all[i], &params).unwrap();
            assert!(r.significant);
        }
    }
}
