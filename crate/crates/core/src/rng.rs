//! Deterministic random streams.
//!
//! Every generation stage draws from its own stream, derived from the run's
//! master seed and a short stage tag. Streams are ChaCha20 generators keyed
//! by `SHA-256(domain || master_seed || tag)`, so a stream's output depends
//! only on `(master_seed, tag)` and is identical on every platform.
//!
//! Adding a new stage never perturbs the draws of an existing one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DOMAIN: &[u8] = b"primecvd/rng-stream/v1";

/// Tolerance on the sum of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-9;

/// A named, seed-deterministic random stream owned by one generation stage.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stage_tag: String,
    inner: ChaCha20Rng,
}

/// Derive the stream for `(master_seed, stage_tag)`.
pub fn derive_stream(master_seed: u64, stage_tag: &str) -> RngStream {
    RngStream::derive(master_seed, stage_tag)
}

impl RngStream {
    pub fn derive(master_seed: u64, stage_tag: &str) -> Self {
        assert!(!stage_tag.is_empty(), "stage tag must be non-empty");
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(master_seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(stage_tag.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self {
            master_seed,
            stage_tag: stage_tag.to_owned(),
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stage_tag(&self) -> &str {
        &self.stage_tag
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to pass to `ln`.
    pub fn uniform_open_zero(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Draw one value from `N(mean, sd)` without validating `sd`.
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    pub fn draw_normal(&mut self, mean: f64, sd: f64, n: usize) -> Result<Vec<f64>> {
        check_sd(sd)?;
        Ok((0..n).map(|_| self.normal(mean, sd)).collect())
    }

    pub fn draw_categorical<T: Clone>(
        &mut self,
        labels: &[T],
        probs: &[f64],
        n: usize,
    ) -> Result<Vec<T>> {
        if labels.len() != probs.len() {
            return Err(Error::invalid(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        let table = Categorical::new(probs)?;
        Ok((0..n)
            .map(|_| labels[table.sample(self)].clone())
            .collect())
    }

    pub fn draw_bernoulli(&mut self, p: &[f64]) -> Result<Vec<bool>> {
        if let Some((i, bad)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "bernoulli probability at index {i} is {bad}, outside [0, 1]"
            )));
        }
        Ok(p.iter().map(|&pi| self.bernoulli(pi)).collect())
    }

    /// Single Bernoulli trial. `p = 0` never fires and `p = 1` always does.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// A uniformly random permutation of `0..n` (Fisher-Yates).
    pub fn permute(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }

    /// `k` distinct indices from `0..n`, chosen uniformly.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx = self.permute(n);
        idx.truncate(k.min(n));
        idx
    }

    /// Exponential waiting time with the given rate; infinite when `rate == 0`.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        -self.uniform_open_zero().ln() / rate
    }
}

fn check_sd(sd: f64) -> Result<()> {
    if sd.is_finite() && sd >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("standard deviation must be >= 0, got {sd}")))
    }
}

/// Validated categorical distribution sampled by inverse CDF.
#[derive(Debug, Clone)]
pub struct Categorical {
    cumulative: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty probability vector"));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::invalid(format!("negative or non-finite probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Index of the sampled category.
    pub fn sample(&self, stream: &mut RngStream) -> usize {
        // scaling by the total keeps u strictly below the last cumulative value;
        // the strict comparison skips zero-probability categories
        let last = self.cumulative.len() - 1;
        let u = stream.uniform() * self.cumulative[last];
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_sd(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    }

    fn first_draws(seed: u64, tag: &str, n: usize) -> Vec<f64> {
        let mut s = derive_stream(seed, tag);
        (0..n).map(|_| s.uniform()).collect()
    }

    #[test]
    fn same_seed_and_tag_repeat() {
        assert_eq!(first_draws(7, "age", 1000), first_draws(7, "age", 1000));
    }

    #[test]
    fn different_tag_or_seed_differ() {
        let base = first_draws(7, "age", 1000);
        assert_ne!(base, first_draws(7, "bmi", 1000));
        assert_ne!(base, first_draws(8, "age", 1000));
    }

    #[test]
    fn degenerate_normal() {
        let mut s = derive_stream(1, "t");
        assert_eq!(s.draw_normal(5.0, 0.0, 3).unwrap(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn negative_sd_rejected() {
        let mut s = derive_stream(1, "t");
        assert!(matches!(
            s.draw_normal(0.0, -1.0, 3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn standard_normal_moments() {
        let mut s = derive_stream(11, "normal-moments");
        let xs = s.draw_normal(0.0, 1.0, 100_000).unwrap();
        let (m, sd) = mean_sd(&xs);
        assert!(m.abs() <= 0.02, "mean {m}");
        assert!((0.99..=1.01).contains(&sd), "sd {sd}");
    }

    #[test]
    fn point_mass_categorical() {
        let mut s = derive_stream(1, "cat");
        assert_eq!(
            s.draw_categorical(&["A"], &[1.0], 5).unwrap(),
            vec!["A"; 5]
        );
    }

    #[test]
    fn irsd_weight_frequency() {
        let mut s = derive_stream(3, "irsd-freq");
        let labels = [1u8, 2, 3, 4, 5];
        let probs = [0.2136, 0.1622, 0.2393, 0.1678, 0.2171];
        let draws = s.draw_categorical(&labels, &probs, 50_000).unwrap();
        let f1 = draws.iter().filter(|&&q| q == 1).count() as f64 / 50_000.0;
        assert!((f1 - 0.2136).abs() <= 0.006, "freq(1) = {f1}");
    }

    #[test]
    fn bad_probability_sum_rejected() {
        let mut s = derive_stream(1, "cat");
        assert!(s.draw_categorical(&["a", "b"], &[0.5, 0.6], 1).is_err());
        assert!(s.draw_categorical(&["a", "b"], &[0.5], 1).is_err());
    }

    #[test]
    fn zero_probability_never_drawn() {
        let table = Categorical::new(&[0.0, 1.0, 0.0]).unwrap();
        let mut s = derive_stream(5, "zero");
        assert!((0..10_000).all(|_| table.sample(&mut s) == 1));
    }

    #[test]
    fn bernoulli_edges_and_rate() {
        let mut s = derive_stream(2, "bern");
        assert_eq!(s.draw_bernoulli(&[0.0; 3]).unwrap(), vec![false; 3]);
        assert_eq!(s.draw_bernoulli(&[1.0; 2]).unwrap(), vec![true; 2]);
        let hits = s.draw_bernoulli(&vec![0.3; 100_000]).unwrap();
        let rate = hits.iter().filter(|b| **b).count() as f64 / 100_000.0;
        assert!((0.296..=0.304).contains(&rate), "rate {rate}");
        assert!(s.draw_bernoulli(&[1.2]).is_err());
        assert!(s.draw_bernoulli(&[-0.1]).is_err());
    }

    #[test]
    fn permute_small_cases() {
        let mut s = derive_stream(1, "perm");
        assert!(s.permute(0).is_empty());
        assert_eq!(s.permute(1), vec![0]);
        let a = derive_stream(9, "perm").permute(10);
        let b = derive_stream(9, "perm").permute(10);
        assert_eq!(a, b);
    }

    #[test]
    fn streams_uncorrelated() {
        let mut a = derive_stream(7, "age");
        let mut b = derive_stream(7, "bmi");
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let (mx, sx) = mean_sd(&xs);
        let (my, sy) = mean_sd(&ys);
        let r = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / ((n as f64 - 1.0) * sx * sy);
        assert!(r.abs() <= 0.02, "r = {r}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn permute_is_bijection(seed in any::<u64>(), n in 0usize..500) {
                let mut p = derive_stream(seed, "prop-perm").permute(n);
                p.sort_unstable();
                prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
