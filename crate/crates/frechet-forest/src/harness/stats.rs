//! Statistical helpers for the experiment harness: Kolmogorov-Smirnov
//! tests, Wilson intervals, bootstrap standard deviations, paired t-tests,
//! and false-discovery-rate correction.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
pub fn ks_two_sample_pvalue(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    kolmogorov_pvalue(ne.sqrt() * d)
}

/// One-sample Kolmogorov-Smirnov p-value against a CDF.
pub fn ks_one_sample_pvalue(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if sample.is_empty() {
        return 1.0;
    }
    let mut xs: Vec<f64> = sample.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((f - k as f64 / n).abs());
        d = d.max(((k as f64 + 1.0) / n - f).abs());
    }
    let sqrt_n = n.sqrt();
    kolmogorov_pvalue((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_pvalue(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..101 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(p_hat: f64, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let z2 = z * z;
    let center = (p_hat + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    (center - half, center + half)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
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

/// Bootstrap standard deviation of a coverage estimate: `k` resamples, each
/// re-pairing `m` training replicates and `m` test draws independently with
/// replacement, without refitting anything.
pub fn bootstrap_sd(
    indicator: impl Fn(usize, usize) -> f64,
    m: usize,
    k: usize,
    rng: &mut impl Rng,
) -> f64 {
    assert!(k >= 2, "bootstrap needs k >= 2");
    let mut estimates = Vec::with_capacity(k);
    for _ in 0..k {
        let mut total = 0.0;
        for _ in 0..m {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            total += indicator(i, j);
        }
        estimates.push(total / m as f64);
    }
    sample_sd(&estimates)
}

/// One-sided paired t-test p-value for `H1: mean(a) < mean(b)` on paired
/// observations.
pub fn paired_t_pvalue_less(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    if sd == 0.0 {
        return if m < 0.0 { 0.0 } else { 1.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid dof");
    dist.cdf(t)
}

/// Benjamini-Hochberg adjusted p-values. `None` entries (self-comparisons)
/// pass through unchanged.
pub fn benjamini_hochberg(pvalues: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut indexed: Vec<(usize, f64)> = pvalues
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|v| (i, v)))
        .collect();
    let m = indexed.len();
    indexed.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut adjusted = vec![None; pvalues.len()];
    let mut running = 1.0f64;
    for (rank, (idx, p)) in indexed.iter().enumerate().rev() {
        let candidate = (p * m as f64 / (rank as f64 + 1.0)).min(1.0);
        running = running.min(candidate);
        adjusted[*idx] = Some(running);
    }
    adjusted
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bootstrap_sd_zero_for_constant_indicators() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let sd = bootstrap_sd(|_, _| 1.0, 100, 50, &mut rng);
        assert_eq!(sd, 0.0);
    }

    #[test]
    fn bootstrap_sd_of_bernoulli_matrix_matches_binomial_scale() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let m = 1000;
        let k = 500;
        let matrix: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..m).map(|_| f64::from(rng.random::<f64>() < 0.9)).collect())
            .collect();
        let sd = bootstrap_sd(|i, j| matrix[i][j], m, k, &mut rng);
        let expected = (0.9f64 * 0.1 / m as f64).sqrt();
        assert!(
            (sd - expected).abs() < 0.3 * expected,
            "sd {sd} vs binomial {expected}"
        );
    }

    #[test]
    fn wilson_interval_contains_the_point_estimate() {
        let (lo, hi) = wilson_interval(0.9, 500, 1.96);
        assert!(lo < 0.9 && 0.9 < hi);
        assert!(lo > 0.85 && hi < 0.95);
    }

    #[test]
    fn paired_t_detects_a_shift() {
        let a: Vec<f64> = (0..40).map(|i| i as f64 * 0.01).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        assert!(paired_t_pvalue_less(&a, &b) < 1e-6);
        assert!(paired_t_pvalue_less(&b, &a) > 0.99);
    }

    #[test]
    fn bh_adjustment_is_monotone() {
        let ps = vec![Some(0.01), Some(0.04), None, Some(0.03), Some(0.9)];
        let adj = benjamini_hochberg(&ps);
        assert!(adj[2].is_none());
        for (orig, adj) in ps.iter().zip(&adj) {
            if let (Some(o), Some(a)) = (orig, adj) {
                assert!(a >= o);
                assert!(*a <= 1.0);
            }
        }
    }

    #[test]
    fn ks_uniform_sample_is_not_rejected() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let sample: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let p = ks_one_sample_pvalue(&sample, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "p = {p}");
    }
}
