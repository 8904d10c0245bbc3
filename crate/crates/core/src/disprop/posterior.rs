//! Dirichlet-multinomial posterior draws of the information component and
//! per-arm relative risks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gamma::sample_gamma;
use super::hyperprior::DirichletPrior;
use crate::error::{Result, ShieldError};

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the RNG substream for one term. Depends only on the run seed and
/// the term's position, never on evaluation order.
pub fn substream_seed(seed: u64, term_index: usize) -> u64 {
    mix64(mix64(seed) ^ mix64((term_index as u64).wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

/// Monte Carlo draws for one term.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    /// IC per draw, in bits. Signed by the two-arm direction rule when k = 2.
    pub ic: Vec<f64>,
    /// Relative risk per draw, row-major draws x k.
    pub rr: Vec<f64>,
    pub num_arms: usize,
}

impl PosteriorSamples {
    pub fn draws(&self) -> usize {
        self.ic.len()
    }

    /// RR draws for one arm.
    pub fn rr_arm(&self, arm: usize) -> Vec<f64> {
        self.rr
            .iter()
            .skip(arm)
            .step_by(self.num_arms)
            .copied()
            .collect()
    }
}

/// Draws `draws` samples from Dirichlet(counts + alpha) through normalized
/// Gamma variates and maps each to IC = sum_j pi_j log2(pi_j / mu_j) and
/// RR_j = pi_j / mu_j, where mu is `expected` normalized to sum 1.
///
/// For two arms each IC draw is negated unless pi_2 exceeds mu_2.
pub fn posterior_samples(
    counts: &[u64],
    prior: &DirichletPrior,
    expected: &[f64],
    draws: usize,
    seed: u64,
    term_index: usize,
) -> Result<PosteriorSamples> {
    let k = counts.len();
    if prior.alpha().len() != k || expected.len() != k {
        return Err(ShieldError::InvalidArgument(format!(
            "{k} counts, {} prior components, {} expected counts",
            prior.alpha().len(),
            expected.len()
        )));
    }
    if draws == 0 {
        return Err(ShieldError::InvalidArgument(
            "draws must be positive".into(),
        ));
    }
    let expected_total: f64 = expected.iter().sum();
    if expected_total.is_nan() || expected_total <= 0.0 {
        return Err(ShieldError::InvalidArgument(
            "expected counts sum to zero".into(),
        ));
    }
    let null_share: Vec<f64> = expected.iter().map(|e| e / expected_total).collect();
    let shapes: Vec<f64> = counts
        .iter()
        .zip(prior.alpha())
        .map(|(&c, a)| c as f64 + a)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, term_index));
    let mut ic = Vec::with_capacity(draws);
    let mut rr = Vec::with_capacity(draws * k);
    let mut y = vec![0.0; k];
    for _ in 0..draws {
        for (yj, &shape) in y.iter_mut().zip(&shapes) {
            *yj = sample_gamma(&mut rng, shape);
        }
        let total: f64 = y.iter().sum();
        let mut value = 0.0;
        for (j, &yj) in y.iter().enumerate() {
            let share = yj / total;
            let ratio = share / null_share[j];
            if share > 0.0 {
                value += share * ratio.log2();
            }
            rr.push(ratio);
        }
        if k == 2 && y[1] / total <= null_share[1] {
            value = -value;
        }
        ic.push(value);
    }
    Ok(PosteriorSamples {
        ic,
        rr,
        num_arms: k,
    })
}

/// Point and interval summaries of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Sample quantile with linear interpolation at position p (n - 1).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Mean, median and the equal-tailed interval at level `gamma`.
pub fn posterior_summaries(samples: &[f64], gamma: f64) -> Result<Summary> {
    if samples.is_empty() {
        return Err(ShieldError::InvalidArgument(
            "no samples to summarize".into(),
        ));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(ShieldError::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {gamma}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - gamma) / 2.0;
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let median = quantile_sorted(&sorted, 0.5);
    let lower = quantile_sorted(&sorted, tail);
    let upper = quantile_sorted(&sorted, 1.0 - tail);
    // The mean can drift outside [min, max] by rounding for constant input.
    let mean = mean.clamp(sorted[0], sorted[sorted.len() - 1]);
    Ok(Summary {
        mean,
        median,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn summary_of_small_sample() {
        let s = posterior_summaries(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.8).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 3.0);
        assert!((s.lower - 1.4).abs() < 1e-12);
        assert!((s.upper - 4.6).abs() < 1e-12);
    }

    #[test]
    fn summary_of_constant_sample() {
        let s = posterior_summaries(&[0.7; 11], 0.95).unwrap();
        assert_eq!((s.lower, s.median, s.upper, s.mean), (0.7, 0.7, 0.7, 0.7));
    }

    #[test]
    fn summary_rejects_empty() {
        assert!(matches!(
            posterior_summaries(&[], 0.95),
            Err(ShieldError::InvalidArgument(_))
        ));
    }

    #[test]
    fn normal_quantile() {
        // Oracle: the standard normal 2.5% quantile is -1.959964.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.sample(StandardNormal)).collect();
        let s = posterior_summaries(&xs, 0.95).unwrap();
        assert!((s.lower + 1.96).abs() < 0.05, "lower = {}", s.lower);
        assert!((s.upper - 1.96).abs() < 0.05, "upper = {}", s.upper);
    }

    #[test]
    fn symmetric_case_centers_relative_risk() {
        let prior = DirichletPrior::new(vec![1.0, 1.0]).unwrap();
        let s = posterior_samples(&[5, 5], &prior, &[5.0, 5.0], 20_000, 42, 0).unwrap();
        for arm in 0..2 {
            let rr = s.rr_arm(arm);
            let mean = rr.iter().sum::<f64>() / rr.len() as f64;
            assert!((0.95..=1.05).contains(&mean), "arm {arm}: {mean}");
        }
        // signed draws: roughly half on each side
        let positive = s.ic.iter().filter(|&&v| v > 0.0).count();
        assert!((9_000..11_000).contains(&positive));
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let prior = DirichletPrior::new(vec![0.6, 0.5, 0.55, 0.3]).unwrap();
        let e = [0.76, 0.75, 0.73, 0.76];
        let a = posterior_samples(&[0, 0, 3, 0], &prior, &e, 5000, 7, 12).unwrap();
        let b = posterior_samples(&[0, 0, 3, 0], &prior, &e, 5000, 7, 12).unwrap();
        assert_eq!(a, b);
        let c = posterior_samples(&[0, 0, 3, 0], &prior, &e, 5000, 7, 13).unwrap();
        assert_ne!(a.ic, c.ic);
    }

    #[test]
    fn multi_arm_draws_are_nonnegative() {
        let prior = DirichletPrior::new(vec![0.6, 0.5, 0.55]).unwrap();
        let s = posterior_samples(&[1, 0, 9], &prior, &[3.3, 3.3, 3.4], 5000, 1, 0).unwrap();
        assert!(s.ic.iter().all(|&v| v >= 0.0));
        assert!(s.rr.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream_seed(42, 0), substream_seed(42, 1));
        assert_ne!(substream_seed(42, 0), substream_seed(43, 0));
    }
}
