//! Empirical distribution helpers: KS distances, quantiles, binomial intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Asymptotic one-sample KS critical coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.63;

/// `sup_z |F_N(z) − F(z)|` for the empirical CDF of `samples`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let f = cdf(z);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic `sup_z |F_a(z) − F_b(z)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let z = a[i].min(b[j]);
        while i < a.len() && a[i] <= z {
            i += 1;
        }
        while j < b.len() && b[j] <= z {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical KS distance at the 1% level for `n` samples.
pub fn ks_critical(n: usize) -> f64 {
    KS_COEFF_1PCT / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(na: usize, nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    KS_COEFF_1PCT * ((na + nb) / (na * nb)).sqrt()
}

/// Linear-interpolation quantile (the "type 7" rule). `q ∈ [0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(samples: &[f64]) -> f64 {
    quantile(samples, 0.5)
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// An observed proportion with its exact (Clopper–Pearson) confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub total: usize,
    pub fraction: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

pub fn clopper_pearson(successes: usize, total: usize, confidence: f64) -> Proportion {
    assert!(successes <= total && total > 0);
    let alpha = 1.0 - confidence;
    let (k, n) = (successes as f64, total as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if successes == total {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    Proportion {
        successes,
        total,
        fraction: k / n,
        lower,
        upper,
        confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_grid_is_half_step() {
        // Midpoints of a uniform grid sit 1/(2N) from the uniform CDF.
        let n = 100;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_one_sample(&s, |z| z) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_extremes() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[0.7, 0.8]), 1.0);
    }

    #[test]
    fn quantiles() {
        let s = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&s), 2.5);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn clopper_pearson_known_values() {
        let p = clopper_pearson(0, 10, 0.95);
        assert_eq!(p.lower, 0.0);
        // Upper end for zero successes is 1 − (α/2)^{1/n}.
        assert!((p.upper - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
        let p = clopper_pearson(10, 10, 0.95);
        assert_eq!(p.upper, 1.0);
        assert!((p.lower - 0.025f64.powf(0.1)).abs() < 1e-9);
        let p = clopper_pearson(5, 10, 0.99);
        assert!(p.lower < 0.5 && p.upper > 0.5);
    }
}
