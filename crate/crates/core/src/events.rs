//! Extreme-event series from local percentile thresholds.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_io::GriddedSeries;

/// Nodes with fewer finite support values than this are unusable.
pub const MIN_SUPPORT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Only values strictly above the wet-day cutoff enter the percentile.
    PositiveOnly,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub percentile: f64,
    pub direction: Direction,
    pub support: Support,
    /// Wet-day cutoff used by [`Support::PositiveOnly`].
    #[serde(default)]
    pub wet_cutoff: f64,
}

impl ThresholdSpec {
    /// 95th percentile of wet-day (> 0) values, events above.
    pub fn precipitation() -> Self {
        ThresholdSpec {
            percentile: 95.0,
            direction: Direction::Above,
            support: Support::PositiveOnly,
            wet_cutoff: 0.0,
        }
    }

    /// 95th percentile of daily maxima, events above.
    pub fn heat() -> Self {
        ThresholdSpec {
            percentile: 95.0,
            direction: Direction::Above,
            support: Support::All,
            wet_cutoff: 0.0,
        }
    }

    /// 5th percentile of daily minima, events below.
    pub fn cold() -> Self {
        ThresholdSpec {
            percentile: 5.0,
            direction: Direction::Below,
            support: Support::All,
            wet_cutoff: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::param(
                "percentile",
                format!("{} not in (0, 100)", self.percentile),
            ));
        }
        if !self.wet_cutoff.is_finite() {
            return Err(Error::param("wet_cutoff", "must be finite"));
        }
        Ok(())
    }
}

/// Sorted event days of one node, together with the day universe of the
/// season they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    node_id: usize,
    event_days: Vec<i32>,
    season_days: Arc<[i32]>,
}

impl EventSeries {
    pub fn new(node_id: usize, event_days: Vec<i32>, season_days: Arc<[i32]>) -> Result<Self> {
        if event_days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "node {node_id}: event days not strictly increasing"
            )));
        }
        if let Some(d) = event_days
            .iter()
            .find(|d| season_days.binary_search(d).is_err())
        {
            return Err(Error::InvalidInput(format!(
                "node {node_id}: event day {d} outside the season"
            )));
        }
        Ok(EventSeries {
            node_id,
            event_days,
            season_days,
        })
    }

    pub fn empty(node_id: usize, season_days: Arc<[i32]>) -> Self {
        EventSeries {
            node_id,
            event_days: Vec::new(),
            season_days,
        }
    }

    pub fn node_id(&self) -> usize {
        self.node_id
    }

    pub fn event_days(&self) -> &[i32] {
        &self.event_days
    }

    pub fn len(&self) -> usize {
        self.event_days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_days.is_empty()
    }

    pub fn season_days(&self) -> &Arc<[i32]> {
        &self.season_days
    }

    /// Size `T` of the season's day universe.
    pub fn n_days_in_season(&self) -> usize {
        self.season_days.len()
    }
}

/// Linear-interpolation quantile of an ascending slice, `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Local percentile threshold over the finite values in the support set.
pub fn compute_threshold(values: &[f32], spec: &ThresholdSpec) -> Result<f64> {
    spec.validate()?;
    let mut support: Vec<f64> = values
        .iter()
        .map(|&v| v as f64)
        .filter(|v| v.is_finite())
        .filter(|&v| match spec.support {
            Support::All => true,
            Support::PositiveOnly => v > spec.wet_cutoff,
        })
        .collect();
    if support.len() < MIN_SUPPORT {
        return Err(Error::InsufficientSupport {
            found: support.len(),
            required: MIN_SUPPORT,
        });
    }
    support.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&support, spec.percentile / 100.0))
}

/// Days whose value strictly exceeds (or falls strictly below) `threshold`.
/// NaN values are never events.
pub fn to_event_series(
    node_id: usize,
    values: &[f32],
    days: Arc<[i32]>,
    threshold: f64,
    direction: Direction,
) -> Result<EventSeries> {
    if !threshold.is_finite() {
        return Err(Error::param("threshold", format!("{threshold} is not finite")));
    }
    if values.len() != days.len() {
        return Err(Error::InvalidInput(format!(
            "node {node_id}: {} values for {} days",
            values.len(),
            days.len()
        )));
    }
    let event_days = values
        .iter()
        .zip(days.iter())
        .filter(|(&v, _)| match direction {
            Direction::Above => (v as f64) > threshold,
            Direction::Below => (v as f64) < threshold,
        })
        .map(|(_, &d)| d)
        .collect();
    EventSeries::new(node_id, event_days, days)
}

/// Collapses every run of calendar-consecutive event days to its first day.
pub fn dedup_consecutive(es: &EventSeries) -> EventSeries {
    let mut kept = Vec::with_capacity(es.event_days.len());
    let mut prev: Option<i32> = None;
    for &d in &es.event_days {
        if prev != Some(d - 1) {
            kept.push(d);
        }
        prev = Some(d);
    }
    EventSeries {
        node_id: es.node_id,
        event_days: kept,
        season_days: Arc::clone(&es.season_days),
    }
}

/// Event series for every node of a seasonal series.
#[derive(Debug, Clone)]
pub struct EventDetection {
    pub series: Vec<EventSeries>,
    /// `None` for unusable nodes.
    pub thresholds: Vec<Option<f64>>,
    pub unusable: Vec<usize>,
}

/// Thresholds every node independently; unusable nodes get empty series.
pub fn detect_events(gs: &GriddedSeries, spec: &ThresholdSpec, dedup: bool) -> Result<EventDetection> {
    spec.validate()?;
    let days: Arc<[i32]> = gs.days().into();
    let per_node: Vec<(EventSeries, Option<f64>)> = (0..gs.n_nodes())
        .into_par_iter()
        .map(|node| {
            let values = gs.node_values(node);
            match compute_threshold(values, spec) {
                Ok(thr) => {
                    let es = to_event_series(node, values, Arc::clone(&days), thr, spec.direction)?;
                    let es = if dedup { dedup_consecutive(&es) } else { es };
                    Ok((es, Some(thr)))
                }
                Err(Error::InsufficientSupport { .. }) => Ok((EventSeries::empty(node, Arc::clone(&days)), None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let unusable = per_node
        .iter()
        .enumerate()
        .filter(|(_, (_, t))| t.is_none())
        .map(|(k, _)| k)
        .collect();
    let (series, thresholds) = per_node.into_iter().unzip();
    Ok(EventDetection {
        series,
        thresholds,
        unusable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn universe(n: i32) -> Arc<[i32]> {
        (0..n).collect::<Vec<_>>().into()
    }

    /// Independent linear quantile: rank-based walk over a sorted copy.
    fn oracle_quantile(values: &[f64], p: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pos = p * (v.len() as f64 - 1.0);
        let below = pos as usize;
        let frac = pos - below as f64;
        if below + 1 >= v.len() {
            return v[below];
        }
        v[below] * (1.0 - frac) + v[below + 1] * frac
    }

    #[test]
    fn ninety_fifth_percentile_of_one_to_hundred() {
        let values: Vec<f32> = (1..=100).map(|v| v as f32).collect();
        let spec = ThresholdSpec { support: Support::All, ..ThresholdSpec::heat() };
        let oracle = oracle_quantile(&(1..=100).map(f64::from).collect::<Vec<_>>(), 0.95);
        let thr = compute_threshold(&values, &spec).unwrap();
        assert!((thr - 95.05).abs() < 1e-12);
        assert!((thr - oracle).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_threshold_c_and_no_events() {
        let values = vec![3.25f32; 50];
        let thr = compute_threshold(&values, &ThresholdSpec::heat()).unwrap();
        assert_eq!(thr, 3.25);
        let es = to_event_series(0, &values, universe(50), thr, Direction::Above).unwrap();
        assert!(es.is_empty());
    }

    #[test]
    fn positive_only_support_ignores_dry_days() {
        // Dry days padded so the support set {5, 10} x 10 meets the minimum.
        let mut values = vec![0.0f32; 30];
        values.extend(std::iter::repeat_n(5.0, 10));
        values.extend(std::iter::repeat_n(10.0, 10));
        let thr = compute_threshold(&values, &ThresholdSpec::precipitation()).unwrap();
        let support: Vec<f64> = values.iter().filter(|&&v| v > 0.0).map(|&v| v as f64).collect();
        assert_eq!(thr, oracle_quantile(&support, 0.95));
        assert_eq!(thr, 10.0);

        let spec = ThresholdSpec { support: Support::All, ..ThresholdSpec::precipitation() };
        let all: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        assert_eq!(compute_threshold(&values, &spec).unwrap(), oracle_quantile(&all, 0.95));
    }

    #[test]
    fn five_value_wet_day_example_uses_only_positive_values() {
        // [0,0,0,5,10]: the support set is {5, 10}; too small for a threshold.
        let values = [0.0f32, 0.0, 0.0, 5.0, 10.0];
        assert!(compute_threshold(&values, &ThresholdSpec::precipitation()).is_err());
        assert_eq!(quantile_sorted(&[5.0, 10.0], 0.95), 9.75);
    }

    #[test]
    fn wet_cutoff_is_configurable() {
        let values: Vec<f32> = (0..40).map(|k| (k % 4) as f32 * 0.5).collect();
        let spec = ThresholdSpec { wet_cutoff: 1.0, ..ThresholdSpec::precipitation() };
        // Only the 1.5 mm days remain.
        assert!(compute_threshold(&values, &spec).is_err());
        let spec = ThresholdSpec { wet_cutoff: 0.25, ..ThresholdSpec::precipitation() };
        assert!(compute_threshold(&values, &spec).is_ok());
    }

    #[test]
    fn nan_values_are_excluded_and_never_events() {
        let mut values: Vec<f32> = (1..=30).map(|v| v as f32).collect();
        values.push(f32::NAN);
        let thr = compute_threshold(&values, &ThresholdSpec::heat()).unwrap();
        let oracle = oracle_quantile(&(1..=30).map(f64::from).collect::<Vec<_>>(), 0.95);
        assert_eq!(thr, oracle);
        let es = to_event_series(0, &values, universe(31), thr, Direction::Above).unwrap();
        assert_eq!(es.event_days(), &[28, 29]);
        let es = to_event_series(0, &values, universe(31), 100.0, Direction::Below).unwrap();
        assert_eq!(es.len(), 30);
    }

    #[test]
    fn too_little_support_is_unusable() {
        let values = vec![1.0f32; MIN_SUPPORT - 1];
        assert!(compute_threshold(&values, &ThresholdSpec::heat()).is_err());
    }

    #[test]
    fn strict_exceedance() {
        let values = [1.0f32, 9.0, 2.0, 9.0, 1.0];
        let es = to_event_series(3, &values, universe(5), 5.0, Direction::Above).unwrap();
        // day positions 2 and 4 (1-based)
        assert_eq!(es.event_days(), &[1, 3]);
        let es = to_event_series(3, &values, universe(5), 9.0, Direction::Above).unwrap();
        assert!(es.is_empty());
        let es = to_event_series(3, &values, universe(5), 1.0, Direction::Below).unwrap();
        assert!(es.is_empty());
        let es = to_event_series(3, &values, universe(5), 1.5, Direction::Below).unwrap();
        assert_eq!(es.event_days(), &[0, 4]);
        assert!(to_event_series(3, &values, universe(5), f64::NAN, Direction::Below).is_err());
    }

    #[test]
    fn dedup_examples() {
        let season: Arc<[i32]> = (0..40).collect::<Vec<_>>().into();
        let es = EventSeries::new(0, vec![10, 11, 12, 20], Arc::clone(&season)).unwrap();
        assert_eq!(dedup_consecutive(&es).event_days(), &[10, 20]);
        let es = EventSeries::new(0, vec![10, 12, 14], season).unwrap();
        assert_eq!(dedup_consecutive(&es).event_days(), &[10, 12, 14]);
    }

    #[test]
    fn events_across_a_season_gap_are_not_consecutive() {
        // Aug 31 and the following Jun 1 are far apart as day indices.
        let season: Arc<[i32]> = vec![100, 101, 465, 466].into();
        let es = EventSeries::new(0, vec![101, 465], season).unwrap();
        assert_eq!(dedup_consecutive(&es).event_days(), &[101, 465]);
    }

    /// Brute-force rescan: an event is dropped iff the previous calendar day
    /// was also an event in the input.
    fn rescan_oracle(days: &[i32]) -> Vec<i32> {
        let set: std::collections::HashSet<i32> = days.iter().copied().collect();
        days.iter().copied().filter(|d| !set.contains(&(d - 1))).collect()
    }

    #[test]
    fn dedup_on_a_clustered_jja_season() {
        let t = 2760;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut days = Vec::new();
        let mut d = 0;
        while d < t {
            if rng.random_bool(0.05) {
                let run = rng.random_range(1..5);
                for k in 0..run {
                    if d + k < t {
                        days.push(d + k);
                    }
                }
                d += run;
            }
            d += 1;
        }
        let es = EventSeries::new(0, days.clone(), universe(t)).unwrap();
        let out = dedup_consecutive(&es);
        assert_eq!(out.event_days(), rescan_oracle(&days).as_slice());
        assert!(out.event_days().windows(2).all(|w| w[1] - w[0] >= 2));
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent_and_keeps_first(days in proptest::collection::btree_set(0i32..300, 0..120)) {
            let days: Vec<i32> = days.into_iter().collect();
            let es = EventSeries::new(1, days.clone(), universe(300)).unwrap();
            let once = dedup_consecutive(&es);
            let twice = dedup_consecutive(&once);
            prop_assert_eq!(twice.event_days(), once.event_days());
            prop_assert!(once.len() <= es.len());
            prop_assert_eq!(once.event_days().first(), days.first());
            let expected = rescan_oracle(&days);
            prop_assert_eq!(once.event_days(), expected.as_slice());
        }

        #[test]
        fn threshold_matches_oracle(values in proptest::collection::vec(-50.0f32..50.0, 20..200), pct in 1.0f64..99.0) {
            let spec = ThresholdSpec { percentile: pct, ..ThresholdSpec::heat() };
            let thr = compute_threshold(&values, &spec).unwrap();
            let vals: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assert!((thr - oracle_quantile(&vals, pct / 100.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn exceedance_rate_is_near_five_percent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t = 2760usize;
        for _ in 0..20 {
            let values: Vec<f32> = (0..t).map(|_| rng.random::<f32>() * 30.0).collect();
            let thr = compute_threshold(&values, &ThresholdSpec::heat()).unwrap();
            let es = to_event_series(0, &values, universe(t as i32), thr, Direction::Above).unwrap();
            let p = 0.05;
            let sigma = (t as f64 * p * (1.0 - p)).sqrt();
            assert!((es.len() as f64 - t as f64 * p).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn event_series_validates_membership() {
        assert!(EventSeries::new(0, vec![3, 2], universe(5)).is_err());
        assert!(EventSeries::new(0, vec![7], universe(5)).is_err());
    }
}
