//! Summary statistics, histograms and Kolmogorov–Smirnov tests.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Unbiased (n − 1) standard deviation.
    pub std: f64,
    pub n: usize,
}

pub fn summarize(samples: &[f64]) -> Result<Summary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::config(format!("summarize needs at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(Summary {
        mean,
        std: (ss / (n - 1) as f64).sqrt(),
        n,
    })
}

/// `Φ((x − mean)/std)`.
pub fn gaussian_cdf(x: f64, mean: f64, std: f64) -> Result<f64> {
    if !(std > 0.0) {
        return Err(Error::config(format!("gaussian_cdf: std must be positive, got {std}")));
    }
    Ok(0.5 * erfc(-(x - mean) / (std * std::f64::consts::SQRT_2)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    pub p_value: f64,
}

impl KsResult {
    /// Rejection at level `alpha` (the experiments use 0.001).
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `P(K > t)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    const MAX_TERMS: usize = 200;
    const TOL: f64 = 1e-12;
    if t < 1.0 {
        // P(K ≤ t) = √(2π)/t Σ_{k≥1} exp(−(2k−1)² π² / (8t²))
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t);
        let mut sum = 0.0;
        for k in 1..=MAX_TERMS {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < TOL * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * sum).clamp(0.0, 1.0)
    } else {
        // P(K > t) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²t²)
        let mut sum = 0.0;
        for k in 1..=MAX_TERMS {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * t * t).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < TOL {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::config("KS test needs at least one sample"));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("KS test: non-finite sample {bad}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// One-sample KS test with the asymptotic p-value.
pub fn ks_test(samples: &[f64], reference_cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let xs = sorted_finite(samples)?;
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = reference_cdf(x);
        let upper = (i + 1) as f64 / nf - f;
        let lower = f - i as f64 / nf;
        d = d.max(upper).max(lower);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(KsResult {
        statistic: d,
        n,
        p_value: kolmogorov_sf(nf.sqrt() * d),
    })
}

/// Two-sample KS test; `n` in the result is the effective size `nm/(n+m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let xa = sorted_finite(a)?;
    let xb = sorted_finite(b)?;
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok(KsResult {
        statistic: d,
        n: ne.round() as usize,
        p_value: kolmogorov_sf(ne.sqrt() * d),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width histogram over `[min, max]`, last bin closed.
///
/// A zero-width range falls back to one unit-width bin per requested bin,
/// starting at the common value.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::config("histogram of an empty sample"));
    }
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("histogram: non-finite sample"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins && hi > lo { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in samples {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (1.0, 0.0, 3));
        let s = summarize(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
        assert!(summarize(&[1.0]).is_err());
    }

    #[test]
    fn summarize_large_normal_sample() {
        let mut rng = seed::rng(2024);
        let xs: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = summarize(&xs).unwrap();
        assert!(s.mean.abs() < 0.004);
        assert!((0.996..=1.004).contains(&s.std));
    }

    #[test]
    fn gaussian_cdf_examples() {
        assert_eq!(gaussian_cdf(2.0, 2.0, 3.0).unwrap(), 0.5);
        assert!((gaussian_cdf(1.0, 0.0, 1.0).unwrap() - 0.841_344_746_068_543).abs() < 1e-9);
        assert!((gaussian_cdf(5.0, 2.0, 3.0).unwrap() - 0.841_344_746_068_543).abs() < 1e-9);
        assert_eq!(gaussian_cdf(f64::NEG_INFINITY, 0.0, 1.0).unwrap(), 0.0);
        assert!(gaussian_cdf(-40.0, 0.0, 1.0).unwrap() < 1e-300);
        assert!(gaussian_cdf(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ks_examples() {
        let r = ks_test(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
        assert_eq!(r.statistic, 0.5);

        let n = 50;
        let qs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let r = ks_test(&qs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 1.0 / (2.0 * n as f64)).abs() < 1e-15);

        assert!(ks_test(&[], |x| x).is_err());
        assert!(ks_test(&[f64::NAN], |x| x).is_err());
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // Known quantiles of the limiting distribution.
        assert!((kolmogorov_sf(1.3580986) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_sf(1.6276236) - 0.01).abs() < 1e-6);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 2e-6);
        // both branches agree at the switch point
        let below = kolmogorov_sf(1.0 - 1e-12);
        let above = kolmogorov_sf(1.0);
        assert!((below - above).abs() < 1e-10);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(10.0) < 1e-80);
    }

    #[test]
    fn ks_level_on_true_null() {
        let passes = (0..100u64)
            .filter(|&s| {
                let mut rng = seed::rng(seed::derive(55, 0, s));
                let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
                let r = ks_test(&xs, |x| gaussian_cdf(x, 0.0, 1.0).unwrap()).unwrap();
                r.p_value > 0.001
            })
            .count();
        assert!(passes >= 99, "{passes}");
    }

    #[test]
    fn two_sample_ks() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        let b = [4.0, 5.0, 6.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 1.0);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
        assert_eq!(h.edges, vec![0.0, 1.5, 3.0]);

        let h = histogram(&[4.0; 7], 3).unwrap();
        assert_eq!(h.counts, vec![7, 0, 0]);
        assert!(h.edges.windows(2).all(|w| w[1] > w[0]));

        assert!(histogram(&[], 3).is_err());
        assert!(histogram(&[1.0], 0).is_err());
    }

    #[test]
    fn histogram_uniform_counts() {
        let mut rng = seed::rng(31337);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let h = histogram(&xs, 10).unwrap();
        let p = 0.1;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in h.counts {
            assert!((c as f64 - n as f64 * p).abs() < 5.0 * sd, "{c}");
        }
    }

    proptest! {
        #[test]
        fn histogram_counts_sum(xs in prop::collection::vec(-1e3f64..1e3, 1..200), bins in 1usize..40) {
            let h = histogram(&xs, bins).unwrap();
            prop_assert_eq!(h.counts.iter().sum::<usize>(), xs.len());
            prop_assert!(h.edges.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn std_affine_equivariance(xs in prop::collection::vec(-10.0f64..10.0, 2..60), a in -5.0f64..5.0, b in -3.0f64..3.0) {
            let s = summarize(&xs).unwrap();
            let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            let t = summarize(&ys).unwrap();
            prop_assert!((t.std - b.abs() * s.std).abs() <= 1e-12 * (1.0 + s.std * 10.0));
        }

        #[test]
        fn ks_invariant_under_monotone_transform(xs in prop::collection::vec(-3.0f64..3.0, 1..80)) {
            let cdf = |x: f64| gaussian_cdf(x, 0.0, 1.0).unwrap();
            let a = ks_test(&xs, cdf).unwrap();
            // g(x) = exp(x) applied to samples and the reference argument
            let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let b = ks_test(&ys, |y: f64| cdf(y.ln())).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
        }
    }
}
