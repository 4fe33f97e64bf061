//! Reference laws of the limit processes: strictly stable variates, positive
//! stable variates, truncated-jump stable subordinators and Brownian,
//! Cauchy or stable paths on a grid.
//!
//! Stable laws are parametrized by their characteristic exponent
//! `ψ(u) = −σ^α |u|^α (1 − iβ sgn(u) tan(πα/2))`, with `σ^α` given by
//! [`stable_scale`] unless overridden. At `α = 1` only `β = 0` is allowed and
//! `ψ(u) = −σ|u|`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::rng::open_unit;
use crate::scaling::stable_scale;
use crate::special::{cauchy_cdf, gamma, normal_cdf};

/// Expected jump count above which subordinator paths are refused.
pub const MAX_EXPECTED_JUMPS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    alpha: f64,
    beta: f64,
    sigma: f64,
}

impl StableParams {
    /// Scale chosen so that `σ^α = stable_scale(α)`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_scale(alpha, beta, stable_scale(alpha).powf(1.0 / alpha))
    }

    pub fn with_scale(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stability index {alpha} not in (0, 2]"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "skewness {beta} not in [-1, 1]"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale {sigma} must be positive"
            )));
        }
        let beta = if alpha == 2.0 { 0.0 } else { beta };
        if alpha == 1.0 && beta != 0.0 {
            return Err(Error::InvalidParameter(
                "α = 1 requires β = 0 for a strictly stable law".into(),
            ));
        }
        Ok(StableParams { alpha, beta, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Law of `X(t)` for the Lévy process with `X(1)` distributed as `self`.
    pub fn at_time(&self, t: f64) -> Self {
        StableParams {
            sigma: self.sigma * t.powf(1.0 / self.alpha),
            ..*self
        }
    }

    /// `ψ(u)` with `E e^{iuX} = e^{ψ(u)}`.
    pub fn char_exponent(&self, u: f64) -> Complex64 {
        let mag = (self.sigma * u.abs()).powf(self.alpha);
        if self.alpha == 1.0 {
            return Complex64::new(-mag, 0.0);
        }
        let skew = self.beta * u.signum() * (PI * self.alpha / 2.0).tan();
        Complex64::new(-mag, mag * skew)
    }

    pub fn char_fn(&self, u: f64) -> Complex64 {
        self.char_exponent(u).exp()
    }

    /// Chambers-Mallows-Stuck draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = PI * (rng.random::<f64>() - 0.5);
        if self.alpha == 1.0 {
            return self.sigma * v.tan();
        }
        let w: f64 = Exp1.sample(rng);
        let a = self.alpha;
        let zeta = self.beta * (PI * a / 2.0).tan();
        let b = zeta.atan() / a;
        let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * a));
        let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a)
            * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
        self.sigma * x
    }

    /// CDF via Zolotarev's integral; closed forms at `α ∈ {1, 2}`.
    pub fn cdf(&self, x: f64) -> f64 {
        let a = self.alpha;
        if a == 2.0 {
            return normal_cdf(x / (self.sigma * std::f64::consts::SQRT_2));
        }
        if a == 1.0 {
            return cauchy_cdf(x, self.sigma);
        }
        let y = x / self.sigma;
        if y >= 0.0 {
            unit_cdf_positive(a, self.beta, y)
        } else {
            1.0 - unit_cdf_positive(a, -self.beta, -y)
        }
    }
}

// F(y) for y ≥ 0 and unit scale, as a non-oscillatory integral over θ.
fn unit_cdf_positive(a: f64, beta: f64, y: f64) -> f64 {
    let theta0 = (beta * (PI * a / 2.0).tan()).atan() / a;
    if y == 0.0 {
        return 0.5 - theta0 / PI;
    }
    let e = a / (a - 1.0);
    let log_y = e * y.ln();
    let log_c = (a * theta0).cos().ln() / (a - 1.0);
    let integrand = |th: f64| {
        let cos_th = th.cos();
        let log_v = log_c
            + e * (cos_th / (a * (theta0 + th)).sin()).ln()
            + ((a * theta0 + (a - 1.0) * th).cos() / cos_th).ln();
        let g = (log_y + log_v).exp();
        if g.is_nan() {
            0.0
        } else {
            (-g).exp()
        }
    };
    let integral = integrate(integrand, -theta0, FRAC_PI_2, 1e-13, 1e-11).value;
    let f = if a < 1.0 {
        0.5 - theta0 / PI + integral / PI
    } else {
        1.0 - integral / PI
    };
    f.clamp(0.0, 1.0)
}

impl StableParams {
    /// Density by Fourier inversion; loses accuracy far in the tails.
    pub fn pdf(&self, x: f64) -> f64 {
        let a = self.alpha;
        let c = self.sigma.powf(a);
        let skew = if a == 1.0 {
            0.0
        } else {
            c * self.beta * (PI * a / 2.0).tan()
        };
        // f(x) = (1/π) ∫_0^∞ e^{−c u^α} cos(skew u^α − u x) du
        let top = (40.0 / c).powf(1.0 / a);
        integrate(
            |u| {
                let ua = u.powf(a);
                (-c * ua).exp() * (skew * ua - u * x).cos()
            },
            0.0,
            top,
            1e-12,
            1e-10,
        )
        .value
            / PI
    }
}

/// Positive stable draw with `E e^{−λT} = e^{−λ^α}` (Kanter's method).
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let u = PI * open_unit(rng);
    let e: f64 = Exp1.sample(rng);
    let num = (alpha * u).sin().powf(alpha) * ((1.0 - alpha) * u).sin().powf(1.0 - alpha);
    let a = (num / u.sin()).powf(1.0 / (1.0 - alpha));
    (a / e).powf((1.0 - alpha) / alpha)
}

/// Stable subordinator with Lévy measure `scale·α x^{−α−1} dx`, jumps below
/// `epsilon` replaced by their mean drift.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    alpha: f64,
    scale: f64,
    epsilon: f64,
    t_max: f64,
    drift: f64,
    times: Vec<f64>,
    sizes: Vec<f64>,
    // cumulative jump sums: cum[i] = Σ_{j≤i} sizes[j]
    cum: Vec<f64>,
}

/// Truncation threshold `1e−6·t_max^{1/α}`.
pub fn default_epsilon(alpha: f64, t_max: f64) -> f64 {
    1e-6 * t_max.powf(1.0 / alpha)
}

impl SubordinatorPath {
    pub fn sample<R: Rng + ?Sized>(
        alpha: f64,
        t_max: f64,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Self::sample_scaled(alpha, 1.0, t_max, epsilon, rng)
    }

    pub fn sample_scaled<R: Rng + ?Sized>(
        alpha: f64,
        scale: f64,
        t_max: f64,
        epsilon: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subordinator index {alpha} not in (0, 1)"
            )));
        }
        if !(epsilon > 0.0) || !(scale > 0.0) || !(t_max >= 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon, scale must be positive and t_max nonnegative".into(),
            ));
        }
        let mut path = SubordinatorPath {
            alpha,
            scale,
            epsilon,
            t_max: 0.0,
            drift: scale * alpha * epsilon.powf(1.0 - alpha) / (1.0 - alpha),
            times: Vec::new(),
            sizes: Vec::new(),
            cum: Vec::new(),
        };
        path.extend(t_max, rng)?;
        Ok(path)
    }

    /// Jump rate above `epsilon` per unit time.
    pub fn jump_rate(&self) -> f64 {
        self.scale * self.epsilon.powf(-self.alpha)
    }

    /// Continues the path over `(t_max, t_max + dt]`.
    pub fn extend<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Result<()> {
        let mean = self.jump_rate() * dt;
        if mean > MAX_EXPECTED_JUMPS {
            return Err(Error::ResourceLimit(format!(
                "expected {mean:.3e} jumps exceeds the cap of {MAX_EXPECTED_JUMPS:.0e}; raise epsilon"
            )));
        }
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        let start = self.t_max;
        let mut times: Vec<f64> = (0..count)
            .map(|_| start + dt * rng.random::<f64>())
            .collect();
        times.sort_by(f64::total_cmp);
        let mut total = self.cum.last().copied().unwrap_or(0.0);
        for &t in &times {
            let size = self.epsilon * open_unit(rng).powf(-1.0 / self.alpha);
            total += size;
            self.times.push(t);
            self.sizes.push(size);
            self.cum.push(total);
        }
        self.t_max += dt;
        Ok(())
    }

    /// Extends the path until `T(t_max) > level`.
    pub fn extend_past<R: Rng + ?Sized>(&mut self, level: f64, rng: &mut R) -> Result<()> {
        while self.value(self.t_max) <= level {
            let step = self.t_max.max(1.0);
            self.extend(step, rng)?;
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn jump_sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// `Σ_{j≤i} J_j`.
    pub fn cumulative_jumps(&self) -> &[f64] {
        &self.cum
    }

    /// `T(u) = drift·u + Σ_{u_i ≤ u} J_i`.
    pub fn value(&self, u: f64) -> f64 {
        let k = self.times.partition_point(|&t| t <= u);
        self.drift * u + if k == 0 { 0.0 } else { self.cum[k - 1] }
    }

    /// `T(u−)`.
    pub fn value_left(&self, u: f64) -> f64 {
        let k = self.times.partition_point(|&t| t < u);
        self.drift * u + if k == 0 { 0.0 } else { self.cum[k - 1] }
    }

    /// Scale factor `c` with `T(1) = c·P` in law, `P` unit positive stable.
    pub fn marginal_factor(&self) -> f64 {
        (self.scale * gamma(1.0 - self.alpha)).powf(1.0 / self.alpha)
    }
}

/// Brownian motion on a sorted grid (the first point may be 0).
pub fn brownian_path<R: Rng + ?Sized>(grid: &[f64], rng: &mut R) -> Vec<f64> {
    increments_path(grid, rng, |dt, rng| {
        let z: f64 = StandardNormal.sample(rng);
        dt.sqrt() * z
    })
}

/// Symmetric Cauchy process with `𝔠(t)` of scale `(π/2)t`.
pub fn cauchy_path<R: Rng + ?Sized>(grid: &[f64], rng: &mut R) -> Vec<f64> {
    increments_path(grid, rng, |dt, rng| {
        FRAC_PI_2 * dt * (PI * (rng.random::<f64>() - 0.5)).tan()
    })
}

/// Strictly stable Lévy process with `X(1)` distributed as `params`.
pub fn stable_path<R: Rng + ?Sized>(params: &StableParams, grid: &[f64], rng: &mut R) -> Vec<f64> {
    increments_path(grid, rng, |dt, rng| params.at_time(dt).sample(rng))
}

fn increments_path<R: Rng + ?Sized>(
    grid: &[f64],
    rng: &mut R,
    mut step: impl FnMut(f64, &mut R) -> f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let (mut t, mut x) = (0.0, 0.0);
    for &g in grid {
        let dt = g - t;
        if dt > 0.0 {
            x += step(dt, rng);
        }
        out.push(x);
        t = g;
    }
    out
}
