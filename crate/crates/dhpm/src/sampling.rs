//! Seeded, splittable randomness and 1-D Latin hypercube sampling.
//!
//! In one dimension Latin hypercube sampling reduces to stratified sampling
//! followed by a shuffle: the interval is cut into `n` equal strata, one
//! uniform point is drawn in each, and the resulting sequence is permuted so
//! callers see no ordering structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Deterministic random stream, splittable into independent named
/// substreams. Two streams with the same seed produce identical sequences.
#[derive(Debug, Clone)]
pub struct RngStream {
    algorithm: &'static str,
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            algorithm: "chacha8",
            seed,
            draws: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent stream keyed by `name`. The substream depends
    /// only on this stream's seed and the name, never on how much has been
    /// drawn so far.
    pub fn substream(&self, name: &str) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ fnv1a(name.as_bytes())))
    }

    pub fn algorithm(&self) -> &'static str {
        self.algorithm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of values drawn from this stream so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }

    /// Uniform draw in 0..bound.
    pub fn next_index(&mut self, bound: usize) -> usize {
        self.draws += 1;
        self.rng.random_range(0..bound)
    }
}

/// Latin hypercube sample of `n` points over `[lo, hi)`: exactly one point
/// uniformly placed in each of the `n` equal strata, returned shuffled.
pub fn lhs_sample(
    n: usize,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>, SamplingError> {
    if n == 0 {
        return Err(SamplingError::InvalidArgument("need n >= 1".into()));
    }
    if !(lo < hi) {
        return Err(SamplingError::InvalidArgument(format!(
            "need lo < hi, got [{lo}, {hi})"
        )));
    }
    let span = hi - lo;
    let mut points: Vec<f64> = (0..n)
        .map(|i| lo + (i as f64 + rng.next_f64()) / n as f64 * span)
        .collect();
    // Fisher-Yates.
    for i in (1..n).rev() {
        let j = rng.next_index(i + 1);
        points.swap(i, j);
    }
    Ok(points)
}

/// Fresh collocation draw over `[0, t_end)` for one training step, advancing
/// the stream.
pub fn resample_collocation(n_points: usize, t_end: f64, rng: &mut RngStream) -> Vec<f64> {
    lhs_sample(n_points, 0.0, t_end, rng).expect("collocation settings are validated upstream")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stratum_occupancy(points: &[f64], lo: f64, hi: f64) -> Vec<usize> {
        let n = points.len();
        let mut counts = vec![0usize; n];
        for &p in points {
            assert!((lo..hi).contains(&p), "{p} outside [{lo}, {hi})");
            let idx = (((p - lo) / (hi - lo)) * n as f64).floor() as usize;
            counts[idx.min(n - 1)] += 1;
        }
        counts
    }

    #[test]
    fn four_points_fill_four_strata() {
        let mut rng = RngStream::new(0);
        let pts = lhs_sample(4, 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(stratum_occupancy(&pts, 0.0, 1.0), vec![1, 1, 1, 1]);
    }

    #[test]
    fn single_point_lands_in_range() {
        let mut rng = RngStream::new(9);
        let pts = lhs_sample(1, 2.0, 3.0, &mut rng).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((2.0..3.0).contains(&pts[0]));
    }

    #[test]
    fn thousand_point_mean_is_centered() {
        let mut rng = RngStream::new(123);
        let pts = lhs_sample(1000, 0.0, 50.0, &mut rng).unwrap();
        let mean = pts.iter().sum::<f64>() / pts.len() as f64;
        // 3-sigma bound for plain uniform sampling; stratification is far
        // tighter, so this is conservative.
        assert!((mean - 25.0).abs() <= 1.37, "mean {mean}");
    }

    #[test]
    fn rejects_empty_or_inverted_interval() {
        let mut rng = RngStream::new(0);
        assert!(lhs_sample(0, 0.0, 1.0, &mut rng).is_err());
        assert!(lhs_sample(4, 1.0, 1.0, &mut rng).is_err());
        assert!(lhs_sample(4, 2.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn consecutive_resamples_differ_but_reruns_match() {
        let mut a = RngStream::new(7).substream("collocation");
        let first = resample_collocation(64, 20.0, &mut a);
        let second = resample_collocation(64, 20.0, &mut a);
        assert_ne!(first, second);

        let mut b = RngStream::new(7).substream("collocation");
        assert_eq!(first, resample_collocation(64, 20.0, &mut b));
        assert_eq!(second, resample_collocation(64, 20.0, &mut b));
        assert_eq!(a.draws(), b.draws());
    }

    #[test]
    fn substreams_are_independent_of_parent_position() {
        let parent = RngStream::new(42);
        let sub_before = parent.substream("init");
        let mut parent = parent;
        parent.next_f64();
        let sub_after = parent.substream("init");
        assert_eq!(sub_before.seed(), sub_after.seed());
        assert_ne!(sub_before.seed(), parent.substream("data").seed());
    }

    proptest! {
        #[test]
        fn stratification_holds_for_any_size(n in 1usize..200, seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let pts = lhs_sample(n, -3.0, 17.0, &mut rng).unwrap();
            let counts = stratum_occupancy(&pts, -3.0, 17.0);
            prop_assert!(counts.iter().all(|&c| c == 1));
        }
    }
}
