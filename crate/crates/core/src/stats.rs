//! Empirical distribution tools: KS distances, characteristic functions and
//! the Hill tail-index estimator.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// One-sample Kolmogorov-Smirnov distance `sup |F_n − F|`.
///
/// `cdf` should be continuous; both one-sided gaps are taken at every
/// distinct sample point, so ties in the sample are handled exactly.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "KS distance of an empty sample".into(),
        ));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(ks_sorted(&xs, cdf))
}

/// As [`ks_distance`] for an already sorted sample.
pub fn ks_sorted(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d
            .max((j as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
        i = j;
    }
    d
}

/// Two-sample KS statistic `sup |F_n − G_m|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "two-sample KS needs both samples nonempty".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// DKW radius: with probability `1 − delta`, `sup |F_n − F| ≤` this value.
pub fn dkw_radius(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical characteristic function at one point, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcfPoint {
    pub u: f64,
    pub value: Complex64,
    /// Standard error of `value` as a complex estimate, `sqrt((1 − |φ̂|²)/n)`.
    pub std_err: f64,
}

pub fn empirical_char_fn(samples: &[f64], u_grid: &[f64]) -> Result<Vec<EcfPoint>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData(
            "characteristic function of an empty sample".into(),
        ));
    }
    let n = samples.len() as f64;
    Ok(u_grid
        .iter()
        .map(|&u| {
            let (mut re, mut im) = (0.0, 0.0);
            for &x in samples {
                let (s, c) = (u * x).sin_cos();
                re += c;
                im += s;
            }
            let value = Complex64::new(re / n, im / n);
            let std_err = ((1.0 - value.norm_sqr()).max(0.0) / n).sqrt();
            EcfPoint { u, value, std_err }
        })
        .collect())
}

/// Hill estimate of a tail index with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillEstimate {
    pub alpha: f64,
    pub k: usize,
    /// Asymptotic 95% interval `α̂ (1 ± 1.96/√k)`.
    pub ci: (f64, f64),
    /// Percentile bootstrap 95% interval, when requested.
    pub bootstrap_ci: Option<(f64, f64)>,
}

fn hill_from_sorted_desc(desc: &[f64], k: usize) -> f64 {
    let base = desc[k].ln();
    let mean: f64 = desc[..k].iter().map(|x| x.ln() - base).sum::<f64>() / k as f64;
    1.0 / mean
}

/// Hill estimator on the top `k = ⌊k_frac·n⌋` order statistics.
///
/// Uses only log-spacings, so it is invariant under rescaling the sample.
pub fn hill_estimate(samples: &[f64], k_frac: f64) -> Result<HillEstimate> {
    hill_estimate_with_bootstrap(samples, k_frac, 0, 0)
}

pub fn hill_estimate_with_bootstrap(
    samples: &[f64],
    k_frac: f64,
    resamples: usize,
    seed: u64,
) -> Result<HillEstimate> {
    if !(k_frac > 0.0 && k_frac <= 0.2) {
        return Err(Error::InvalidParameter(format!(
            "k_frac must lie in (0, 0.2], got {k_frac}"
        )));
    }
    if samples.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Domain(
            "Hill estimation needs positive samples".into(),
        ));
    }
    let k = (k_frac * samples.len() as f64).floor() as usize;
    if k < 10 || k >= samples.len() {
        return Err(Error::InsufficientData(format!(
            "only {k} exceedances for {} samples",
            samples.len()
        )));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    if desc[0] == desc[k] {
        return Err(Error::InsufficientData(
            "top order statistics are all tied".into(),
        ));
    }
    let alpha = hill_from_sorted_desc(&desc, k);
    let half = 1.96 / (k as f64).sqrt();
    let bootstrap_ci = if resamples > 0 {
        let mut rng = stream(seed, 0);
        let mut est = Vec::with_capacity(resamples);
        let mut buf = vec![0.0; samples.len()];
        for _ in 0..resamples {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..samples.len())];
            }
            buf.sort_by(|a, b| b.total_cmp(a));
            if buf[0] > buf[k] {
                est.push(hill_from_sorted_desc(&buf, k));
            }
        }
        est.sort_by(f64::total_cmp);
        if est.is_empty() {
            None
        } else {
            let q = |p: f64| est[((p * (est.len() - 1) as f64).round()) as usize];
            Some((q(0.025), q(0.975)))
        }
    } else {
        None
    };
    Ok(HillEstimate {
        alpha,
        k,
        ci: (alpha * (1.0 - half), alpha * (1.0 + half)),
        bootstrap_ci,
    })
}

/// Sample quantile by linear interpolation of the order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let (i, frac) = (h.floor() as usize, h - h.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open_unit, stream};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn ks_known_values() {
        // tied points: F_n jumps to 2/3 at 0.2
        let d = ks_distance(&[0.2, 0.9, 0.2], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - (2.0 / 3.0 - 0.2)).abs() < 1e-15);
        assert_eq!(ks_distance(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap(), 0.5);
        assert!(ks_distance(&[], |x| x).is_err());
    }

    #[test]
    fn uniform_ks() {
        let mut r = stream(11, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| r.random::<f64>()).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.007, "{d}");
        let shifted: Vec<f64> = xs.iter().map(|x| x + 0.1).collect();
        let d = ks_distance(&shifted, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.1).abs() < 0.007, "{d}");
    }

    #[test]
    fn two_sample_identical_is_zero() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
    }

    #[test]
    fn ecf_trivial_cases() {
        let e = empirical_char_fn(&[0.0; 10], &[0.5, 3.0]).unwrap();
        assert!(e
            .iter()
            .all(|p| (p.value - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let e = empirical_char_fn(&[-1.0, 1.0, -2.5, 2.5], &[0.7]).unwrap();
        assert!(e[0].value.im.abs() < 1e-15);
    }

    #[test]
    fn ecf_of_normal() {
        use rand_distr::{Distribution, StandardNormal};
        let mut r = stream(12, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| StandardNormal.sample(&mut r))
            .collect();
        for p in empirical_char_fn(&xs, &[0.5, 1.0, 2.0]).unwrap() {
            let want = (-p.u * p.u / 2.0).exp();
            assert!((p.value - Complex64::new(want, 0.0)).norm() < 3.0 * p.std_err + 1e-4);
        }
    }

    #[test]
    fn hill_on_pareto() {
        let mut r = stream(13, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| open_unit(&mut r).powf(-1.0 / 0.5))
            .collect();
        let h = hill_estimate(&xs, 0.05).unwrap();
        assert!((h.alpha - 0.5).abs() < 0.03, "{h:?}");
        let h1 = hill_estimate(&xs, 0.01).unwrap();
        assert!((h.alpha - h1.alpha).abs() < 0.05);
        let scaled: Vec<f64> = xs.iter().map(|x| 7.0 * x).collect();
        assert!((hill_estimate(&scaled, 0.05).unwrap().alpha - h.alpha).abs() < 1e-12);
        assert!(hill_estimate(&xs[..50], 0.1).is_err());
    }

    #[test]
    fn hill_bootstrap_brackets_estimate() {
        let mut r = stream(14, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| open_unit(&mut r).powf(-1.0 / 1.2))
            .collect();
        let h = hill_estimate_with_bootstrap(&xs, 0.1, 200, 1).unwrap();
        let (lo, hi) = h.bootstrap_ci.unwrap();
        assert!(lo < h.alpha && h.alpha < hi);
    }

    proptest! {
        #[test]
        fn ks_in_unit_interval(xs in proptest::collection::vec(-10.0f64..10.0, 2..200)) {
            let d = ks_distance(&xs, |x| 1.0 / (1.0 + (-x).exp())).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
