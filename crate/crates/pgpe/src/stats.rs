//! Running mean/variance over observation vectors, and the frozen
//! normalization snapshots derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest standard deviation used when normalizing, to avoid division blowup.
pub const STDEV_FLOOR: f64 = 1e-8;

/// One-pass count/mean/M2 accumulator (Welford's method), mergeable across
/// independently filled partials without revisiting the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dimension: usize) -> Self {
        RunningStats { count: 0, mean: vec![0.0; dimension], m2: vec![0.0; dimension] }
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance `m2 / count` (zero while empty).
    pub fn variance(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.dimension()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|m2| m2 / n).collect()
    }

    /// Fold in one observation vector.
    pub fn push(&mut self, observation: &[f64]) -> Result<()> {
        if observation.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: observation.len(),
            });
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, &x) in observation.iter().enumerate() {
            let delta = x - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (x - self.mean[i]);
        }
        Ok(())
    }

    /// Fold in a flat buffer of concatenated observation vectors.
    pub fn push_flat(&mut self, observations: &[f64]) -> Result<()> {
        let dim = self.dimension();
        if dim == 0 || observations.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: observations.len(),
            });
        }
        for row in observations.chunks_exact(dim) {
            self.push(row)?;
        }
        Ok(())
    }

    /// Combine with another accumulator as if their streams were concatenated.
    pub fn merge(&mut self, other: &RunningStats) -> Result<()> {
        if other.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: other.dimension(),
            });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.dimension() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// Snapshot the current statistics as an immutable normalizer.
    pub fn normalizer(&self) -> ObsNormalizer {
        if self.count == 0 {
            // No data yet: normalize as the identity.
            return ObsNormalizer {
                mean: vec![0.0; self.dimension()],
                inv_stdev: vec![1.0; self.dimension()],
            };
        }
        let inv_stdev = self
            .variance()
            .iter()
            .map(|v| 1.0 / v.sqrt().max(STDEV_FLOOR))
            .collect();
        ObsNormalizer { mean: self.mean.clone(), inv_stdev }
    }
}

/// Frozen normalization: `(obs - mean) / max(stdev, 1e-8)` per component.
///
/// Snapshots are taken once per iteration, so every evaluation inside an
/// iteration sees the same transform regardless of scheduling.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsNormalizer {
    mean: Vec<f64>,
    inv_stdev: Vec<f64>,
}

impl ObsNormalizer {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Normalize in place.
    pub fn apply(&self, observation: &mut [f64]) {
        debug_assert_eq!(observation.len(), self.dimension());
        for (i, x) in observation.iter_mut().enumerate() {
            *x = (*x - self.mean[i]) * self.inv_stdev[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_example_gives_population_variance() {
        let mut stats = RunningStats::new(2);
        stats.push(&[1.0, 2.0]).unwrap();
        stats.push(&[3.0, 4.0]).unwrap();
        assert_eq!(stats.count(), 2);
        assert_eq!(stats.mean(), &[2.0, 3.0]);
        assert_eq!(stats.variance(), vec![1.0, 1.0]);
    }

    #[test]
    fn empty_stats_normalize_as_identity() {
        let stats = RunningStats::new(3);
        let norm = stats.normalizer();
        let mut obs = [5.0, -2.0, 0.25];
        norm.apply(&mut obs);
        assert_eq!(obs, [5.0, -2.0, 0.25]);
    }

    #[test]
    fn constant_observations_hit_the_stdev_floor() {
        let mut stats = RunningStats::new(1);
        for _ in 0..10 {
            stats.push(&[7.0]).unwrap();
        }
        let norm = stats.normalizer();
        let mut obs = [7.0 + 1e-6];
        norm.apply(&mut obs);
        // Variance is 0, so the divisor is the 1e-8 floor, not zero.
        assert!(obs[0].is_finite());
        assert!((obs[0] - 1e-6 / STDEV_FLOOR).abs() < 1e-3, "got {}", obs[0]);
    }

    #[test]
    fn normalized_stream_has_zero_mean_unit_variance() {
        let mut stats = RunningStats::new(1);
        let data: Vec<f64> = (0..100).map(|i| (i as f64) * 0.37 - 5.0).collect();
        for &x in &data {
            stats.push(&[x]).unwrap();
        }
        let norm = stats.normalizer();
        let mut check = RunningStats::new(1);
        for &x in &data {
            let mut obs = [x];
            norm.apply(&mut obs);
            check.push(&obs).unwrap();
        }
        assert!(check.mean()[0].abs() < 1e-12);
        assert!((check.variance()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_with_empty_is_identity_both_ways() {
        let mut filled = RunningStats::new(1);
        filled.push(&[1.0]).unwrap();
        filled.push(&[5.0]).unwrap();

        let mut a = filled.clone();
        a.merge(&RunningStats::new(1)).unwrap();
        assert_eq!(a, filled);

        let mut b = RunningStats::new(1);
        b.merge(&filled).unwrap();
        assert_eq!(b, filled);
    }

    #[test]
    fn merge_is_associative_within_float_noise() {
        let mut parts = Vec::new();
        for chunk in [[1.0, 2.0], [30.0, -4.0], [0.5, 0.25]] {
            let mut s = RunningStats::new(1);
            for x in chunk {
                s.push(&[x]).unwrap();
            }
            parts.push(s);
        }
        let mut left = parts[0].clone();
        left.merge(&parts[1]).unwrap();
        left.merge(&parts[2]).unwrap();

        let mut right_tail = parts[1].clone();
        right_tail.merge(&parts[2]).unwrap();
        let mut right = parts[0].clone();
        right.merge(&right_tail).unwrap();

        assert_eq!(left.count(), right.count());
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        assert!(rel(left.mean()[0], right.mean()[0]) < 1e-9);
        assert!(rel(left.variance()[0], right.variance()[0]) < 1e-9);
    }

    #[test]
    fn push_flat_rejects_ragged_buffers() {
        let mut stats = RunningStats::new(3);
        let err = stats.push_flat(&[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "got {err:?}");
    }

    proptest! {
        /// Merging partial accumulators matches pushing the whole stream.
        #[test]
        fn merge_matches_sequential(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..60),
            split in 0usize..60,
        ) {
            let split = split.min(xs.len());
            let mut whole = RunningStats::new(1);
            for &x in &xs {
                whole.push(&[x]).unwrap();
            }
            let mut left = RunningStats::new(1);
            for &x in &xs[..split] {
                left.push(&[x]).unwrap();
            }
            let mut right = RunningStats::new(1);
            for &x in &xs[split..] {
                right.push(&[x]).unwrap();
            }
            left.merge(&right).unwrap();
            prop_assert_eq!(left.count(), whole.count());
            prop_assert!((left.mean()[0] - whole.mean()[0]).abs() < 1e-9);
            prop_assert!((left.variance()[0] - whole.variance()[0]).abs() < 1e-7);
        }
    }
}
