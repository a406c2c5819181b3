//! Empirical distribution comparison and small reference computations.

use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    EmptySample,
    /// The requested stationary distribution does not exist.
    UnstableChain,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptySample => write!(f, "empty sample"),
            StatsError::UnstableChain => write!(f, "chain has no stationary distribution"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Two-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value (Kolmogorov distribution with the effective sample
    /// size `n1*n2/(n1+n2)`).
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
///
/// Ties are handled by evaluating both empirical CDFs at the pooled jump
/// points, so heavily discrete samples (integer marginals) are compared
/// correctly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);

    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = libm::sqrt(ne) * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_sf(lambda) })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = libm::exp(-2.0 * (j as f64) * (j as f64) * x * x);
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var)
}

/// Median (averaging the two central order statistics for even sizes).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean system size of the stationary birth–death chain with birth rate
/// `lambda_n`, service rate `min(j, n)·mu` and abandonment rate
/// `max(j−n, 0)·alpha` in state `j`.
///
/// This is the classical Erlang-A reference used to check long-run simulator
/// averages.
pub fn birth_death_mean_system_size(
    n: usize,
    lambda_n: f64,
    mu: f64,
    alpha: f64,
) -> Result<f64, StatsError> {
    if lambda_n <= 0.0 || mu <= 0.0 || alpha < 0.0 {
        return Err(StatsError::UnstableChain);
    }
    if alpha == 0.0 && lambda_n >= n as f64 * mu {
        return Err(StatsError::UnstableChain);
    }
    let mut weight = 1.0f64; // unnormalized pi_j, starting at j = 0
    let mut total = 1.0f64;
    let mut first_moment = 0.0f64;
    let mut j = 0usize;
    loop {
        let death = (j + 1).min(n) as f64 * mu + (j + 1).saturating_sub(n) as f64 * alpha;
        weight *= lambda_n / death;
        j += 1;
        total += weight;
        first_moment += j as f64 * weight;
        if j > n && weight < 1e-16 * total {
            break;
        }
        if j > 100_000_000 {
            return Err(StatsError::UnstableChain);
        }
    }
    Ok(first_moment / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{self, stream};

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [4.0, 3.0, 2.0, 1.0];
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn ks_known_value_with_ties() {
        let a = [1.0, 1.0, 4.0, 4.0];
        let b = [1.0, 1.0, 1.0, 4.0];
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ks_disjoint_samples_is_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 1.0);
    }

    #[test]
    fn ks_same_law_not_rejected_different_laws_rejected() {
        let mut r = stream(9, 0);
        let x: Vec<f64> = (0..2000).map(|_| random::standard_normal(&mut r)).collect();
        let y: Vec<f64> = (0..2000).map(|_| random::standard_normal(&mut r)).collect();
        let z: Vec<f64> = (0..2000).map(|_| random::standard_normal(&mut r) + 0.5).collect();
        assert!(ks_two_sample(&x, &y).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&x, &z).unwrap().p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_sf_reference_points() {
        // Q(1.36) is about 0.049, the classical 5% critical point.
        assert!((kolmogorov_sf(1.36) - 0.049).abs() < 0.002);
        assert!((kolmogorov_sf(1.63) - 0.010) < 0.002);
        assert!(kolmogorov_sf(0.0) == 1.0);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn birth_death_matches_hand_computation() {
        // M/M/1+M with lambda = mu = alpha = 1: death rate in state j is j, so
        // the stationary law is Poisson(1) and the mean system size is 1.
        let mean = birth_death_mean_system_size(1, 1.0, 1.0, 1.0).unwrap();
        assert!((mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn birth_death_no_abandonment_unstable() {
        assert!(birth_death_mean_system_size(2, 3.0, 1.0, 0.0).is_err());
    }
}
