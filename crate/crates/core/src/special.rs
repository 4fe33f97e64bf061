//! Special functions used by the samplers and normalizers.
//!
//! Gamma, error and regularized incomplete beta functions come from `statrs`
//! (Lanczos approximation for Gamma). The Hurwitz zeta function, needed for
//! the exact means of power-tailed persistence times, is summed here with an
//! Euler-Maclaurin tail.

use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn erfc(x: f64) -> f64 {
    statrs::function::erf::erfc(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// CDF of the centred Cauchy law with the given scale.
pub fn cauchy_cdf(x: f64, scale: f64) -> f64 {
    0.5 + (x / scale).atan() / PI
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(a, b, x)
    }
}

// B_{2j} / (2j)! for j = 1..=8
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta function `sum_{k>=0} (q + k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta requires s > 1, q > 0");
    let n = (20.0 - q).max(0.0).ceil() as usize + 4;
    let mut head = 0.0;
    for k in (0..n).rev() {
        head += (q + k as f64).powf(-s);
    }
    let x = q + n as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times x^{-s-2j+1}
    let mut rising = s;
    let mut pow = x.powf(-s - 1.0);
    for (j, coef) in BERNOULLI_OVER_FACT.iter().enumerate() {
        if j > 0 {
            let m = 2.0 * j as f64;
            rising *= (s + m - 1.0) * (s + m);
            pow /= x * x;
        }
        tail += coef * rising * pow;
    }
    head + tail
}

/// `sum_{k=0}^{count-1} (x + k)^{-s}` for `x > 0` and any real `s`.
///
/// Short ranges and the first terms below 64 are summed directly; the rest
/// uses Euler-Maclaurin with the integral written in a cancellation-free form.
pub fn shifted_power_sum(s: f64, x: f64, count: u64) -> f64 {
    let mut x = x;
    let mut count = count;
    let mut acc = 0.0;
    if count <= 512 {
        for k in 0..count {
            acc += (x + k as f64).powf(-s);
        }
        return acc;
    }
    while x < 64.0 && count > 0 {
        acc += x.powf(-s);
        x += 1.0;
        count -= 1;
    }
    let k = count as f64;
    let end = x + k;
    let log_ratio = (k / x).ln_1p();
    let integral = if (1.0 - s).abs() < 1e-12 {
        log_ratio
    } else {
        x.powf(1.0 - s) * ((1.0 - s) * log_ratio).exp_m1() / (1.0 - s)
    };
    let mut v = integral + 0.5 * (x.powf(-s) - end.powf(-s));
    let mut rising = s;
    for (j, coef) in BERNOULLI_OVER_FACT.iter().take(5).enumerate() {
        let m = (2 * j + 1) as f64;
        if j > 0 {
            rising *= (s + m - 2.0) * (s + m - 1.0);
        }
        v += coef * rising * (x.powf(-s - m) - end.powf(-s - m));
    }
    acc + v
}
