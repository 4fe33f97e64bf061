//! Drift and balance parameters, normalizing functions and regime
//! classification.

use std::f64::consts::PI;
use std::fmt;

use crate::comb::{Comb, PersistenceLaw, TailShape};
use crate::error::{Error, Result};
use crate::report::Report;
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Gaussian,
    GenericStable,
    Cauchy,
    Anomalous,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Gaussian => "gaussian",
            Regime::GenericStable => "generic-stable",
            Regime::Cauchy => "cauchy",
            Regime::Anomalous => "anomalous",
        })
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Regime::Gaussian),
            "generic-stable" => Ok(Regime::GenericStable),
            "cauchy" => Ok(Regime::Cauchy),
            "anomalous" => Ok(Regime::Anomalous),
            _ => Err(Error::InvalidParameter(format!("unknown regime `{s}`"))),
        }
    }
}

/// Partition of `(0, 2]` into `(0,1) ⊔ {1} ⊔ (1,2) ⊔ {2}`.
pub fn classify_regime(alpha: f64) -> Regime {
    if alpha >= 2.0 {
        Regime::Gaussian
    } else if alpha > 1.0 {
        Regime::GenericStable
    } else if alpha == 1.0 {
        Regime::Cauchy
    } else {
        Regime::Anomalous
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParameters {
    pub m: f64,
    pub b: Option<f64>,
    pub d: Option<f64>,
}

// lim (𝒯_u − 𝒯_d)/(𝒯_u + 𝒯_d) from the tail shapes.
fn tail_balance(up: &PersistenceLaw, down: &PersistenceLaw) -> Option<f64> {
    use TailShape::*;
    let dominance = |x: f64, y: f64| if x > y { 1.0 } else { -1.0 };
    match (up.shape(), down.shape()) {
        (
            Power {
                index: iu,
                constant: ku,
            },
            Power {
                index: id,
                constant: kd,
            },
        ) => Some(if iu == id {
            (ku - kd) / (ku + kd)
        } else {
            dominance(id, iu)
        }),
        (Power { .. }, _) => Some(1.0),
        (_, Power { .. }) => Some(-1.0),
        (Geometric { ratio: qu }, Geometric { ratio: qd }) => {
            if qu == qd {
                // 𝒯(n) = C q^n with C fixed by the tail at the end of the prefix.
                let n = 4096;
                let (cu, cd) = (up.tail_at(n), down.tail_at(n));
                Some((cu - cd) / (cu + cd))
            } else {
                Some(dominance(qu, qd))
            }
        }
        (Geometric { .. }, Bounded { .. }) => Some(1.0),
        (Bounded { .. }, Geometric { .. }) => Some(-1.0),
        (Bounded { .. }, Bounded { .. }) => None,
    }
}

/// `(m_S, b_S, d_S)`; extremal drifts are rejected.
pub fn mean_drift(comb: &Comb) -> Result<DriftParameters> {
    let (up, down) = (comb.up(), comb.down());
    let b = tail_balance(up, down);
    let (iu, id) = (up.integrable(), down.integrable());
    let d = match (iu, id) {
        (true, true) => {
            let (mu, md) = (up.mean(), down.mean());
            Some((mu - md) / (mu + md))
        }
        (true, false) => Some(-1.0),
        (false, true) => Some(1.0),
        (false, false) => None,
    };
    let m = if !iu && !id {
        b.expect("two power tails always have a balance")
    } else {
        d.expect("defined when some mean is finite")
    };
    if m.abs() >= 1.0 {
        return Err(Error::UnsupportedRegime(format!(
            "extremal mean drift m = {m}"
        )));
    }
    Ok(DriftParameters { m, b, d })
}

/// Stability index: the smallest tail index, capped at 2.
pub fn stability_index(comb: &Comb) -> f64 {
    [comb.up().tail_index(), comb.down().tail_index()]
        .into_iter()
        .flatten()
        .fold(2.0, f64::min)
}

/// Skewness of the stable limit.
pub fn skewness_beta(m: f64, b: f64, alpha: f64) -> f64 {
    let plus = (1.0 - m).powf(alpha) * (1.0 + b);
    let minus = (1.0 + m).powf(alpha) * (1.0 - b);
    if plus + minus == 0.0 {
        0.0
    } else {
        ((plus - minus) / (plus + minus)).clamp(-1.0, 1.0)
    }
}

/// `σ^α = Γ(3−α)/α · sin(π(α−1)/2)/(α−1)`, continuous through `α = 1`.
pub fn stable_scale(alpha: f64) -> f64 {
    let x = alpha - 1.0;
    let sinc = if x.abs() < 1e-4 {
        let y = PI * x / 2.0;
        PI / 2.0 * (1.0 - y * y / 6.0 + y.powi(4) / 120.0)
    } else {
        (PI * x / 2.0).sin() / x
    };
    gamma(3.0 - alpha) / alpha * sinc
}

/// `Σ²`, `Θ` and the normalizers `a`, `s`, `λ = a∘s`.
///
/// `Σ²(t) = (1−m)² V_u(t/(1−m)) + (1+m)² V_d(t/(1+m)) − C` where `C` is the
/// squared-mean correction `(1−m)² μ_u² + (1+m)² μ_d²` when both means are
/// finite and zero otherwise. With finite variances `Σ²(∞)` is then the
/// variance of `(1−m)τ^u − (1+m)τ^d`.
#[derive(Debug, Clone)]
pub struct NormalizerSet {
    comb: Comb,
    m: f64,
    centring: f64,
}

const REL_TOL: f64 = 1e-10;

impl NormalizerSet {
    pub fn new(comb: &Comb, m: f64) -> Result<Self> {
        if !(m > -1.0 && m < 1.0) {
            return Err(Error::UnsupportedRegime(format!(
                "mean drift {m} is not in (-1, 1)"
            )));
        }
        if comb.is_degenerate() {
            return Err(Error::UnsupportedRegime(
                "both run lengths are almost surely constant; the fluctuations vanish".into(),
            ));
        }
        let (mu, md) = (comb.up().mean(), comb.down().mean());
        let centring = if mu.is_finite() && md.is_finite() {
            (1.0 - m).powi(2) * mu * mu + (1.0 + m).powi(2) * md * md
        } else {
            0.0
        };
        Ok(NormalizerSet {
            comb: comb.clone(),
            m,
            centring,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn sigma2(&self, t: f64) -> f64 {
        let (wu, wd) = (1.0 - self.m, 1.0 + self.m);
        let v = wu * wu * self.comb.up().truncated_second_moment(t / wu)
            + wd * wd * self.comb.down().truncated_second_moment(t / wd);
        (v - self.centring).max(0.0)
    }

    /// `Θ(t) = Θ_u(t) + Θ_d(t)`.
    pub fn theta(&self, t: f64) -> f64 {
        self.comb.up().truncated_mean(t) + self.comb.down().truncated_mean(t)
    }

    /// Sum of both tails, `𝒯_u(t) + 𝒯_d(t)`.
    pub fn tail(&self, t: f64) -> f64 {
        self.comb.up().tail(t) + self.comb.down().tail(t)
    }

    /// `inf{t > 0 : t²/Σ²(t) ≥ u}`.
    pub fn a(&self, u: f64) -> Result<f64> {
        check_scale(u)?;
        let ok = |t: f64| {
            let s = self.sigma2(t);
            s > 0.0 && t * t >= u * s
        };
        bracket_bisect(ok)
    }

    /// `inf{t > 0 : Θ(a(t))·t ≥ u}`.
    pub fn s(&self, u: f64) -> Result<f64> {
        check_scale(u)?;
        let ok = |t: f64| match self.a(t) {
            Ok(a) => self.theta(a) * t >= u,
            Err(_) => false,
        };
        bracket_bisect(ok)
    }

    /// `λ(u) = a(s(u))`.
    pub fn lambda(&self, u: f64) -> Result<f64> {
        self.a(self.s(u)?)
    }

    /// `D(u) = Θ(a(s(u)))`.
    pub fn d_of_u(&self, u: f64) -> Result<f64> {
        Ok(self.theta(self.lambda(u)?))
    }

    /// `Ξ₁(u) = a(u)·𝒯(a(u))`, the slowly varying factor of the Cauchy case.
    pub fn xi1(&self, u: f64) -> Result<f64> {
        let a = self.a(u)?;
        Ok(a * self.tail(a))
    }

    /// Cauchy-case prefactor `D(u)/Ξ₁(s(u))`, reported next to `u/λ(u)`.
    pub fn cauchy_prefactor(&self, u: f64) -> Result<f64> {
        Ok(self.d_of_u(u)? / self.xi1(self.s(u)?)?)
    }
}

fn check_scale(u: f64) -> Result<()> {
    if u.is_finite() && u > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("normalizers need u > 0, got {u}")))
    }
}

// Smallest t at which `ok` switches to true, located by doubling then
// bisection to relative tolerance REL_TOL.
fn bracket_bisect(ok: impl Fn(f64) -> bool) -> Result<f64> {
    let mut hi = 1.0;
    let mut lo = 0.0;
    if ok(hi) {
        // Search downwards for a bracket.
        let mut t = 0.5;
        while ok(t) {
            hi = t;
            t *= 0.5;
            if t < 1e-300 {
                return Ok(hi);
            }
        }
        lo = t;
    } else {
        while !ok(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::ResourceLimit(
                    "normalizer inversion did not bracket".into(),
                ));
            }
        }
    }
    while hi - lo > REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Regime classification with all drift and shape parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub alpha: f64,
    pub m: f64,
    pub b: Option<f64>,
    pub d: Option<f64>,
    pub integrable_up: bool,
    pub integrable_down: bool,
    pub beta: f64,
    pub regime: Regime,
    pub r: f64,
    /// Mean cycle length `E[τ^u + τ^d]`, infinite for heavy tails.
    pub d_t: f64,
}

pub fn regime_report(comb: &Comb) -> Result<RegimeReport> {
    let drift = mean_drift(comb)?;
    let alpha = stability_index(comb);
    let beta = if alpha >= 2.0 {
        0.0
    } else {
        skewness_beta(drift.m, drift.b.unwrap_or(0.0), alpha)
    };
    Ok(RegimeReport {
        alpha,
        m: drift.m,
        b: drift.b,
        d: drift.d,
        integrable_up: comb.up().integrable(),
        integrable_down: comb.down().integrable(),
        beta,
        regime: classify_regime(alpha),
        r: (1.0 + drift.m) / (1.0 - drift.m),
        d_t: comb.up().mean() + comb.down().mean(),
    })
}

impl RegimeReport {
    pub fn write(&self, out: &mut Report) {
        out.section("regime")
            .text("regime", &self.regime.to_string())
            .real("alpha", self.alpha)
            .real("m_S", self.m)
            .opt_real("b_S", self.b)
            .opt_real("d_S", self.d)
            .flag("integrable_u", self.integrable_up)
            .flag("integrable_d", self.integrable_down)
            .real("beta", self.beta)
            .real("r_S", self.r)
            .real("d_T", self.d_t);
    }
}

/// Numerical checks of the tail equivalences behind the normalizers.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceDiagnostics {
    /// Predicted limit of `𝒯_c(t)/𝒯(t)`, when `α < 2`.
    pub limit: Option<f64>,
    /// `(t, 𝒯_c(t)/𝒯(t))` on the grid.
    pub tail_ratios: Vec<(f64, f64)>,
    /// `(t, V_c(t)/Σ²(t))` on the grid, when `α = 2` and both tails are light.
    pub variance_ratios: Vec<(f64, f64)>,
    /// Largest relative deviation from the limit (or from 1) on the grid.
    pub max_deviation: f64,
}

// Σ_j P(Y = j) · P(X > (t + wy j)/wx) for independent run lengths X, Y.
fn convolved_tail(x: &PersistenceLaw, y: &PersistenceLaw, wx: f64, wy: f64, t: f64) -> f64 {
    let exact = (4.0 * t).max(64.0) as u64;
    let mut acc = 0.0;
    let mut j = 1u64;
    while j <= exact {
        let p = y.pmf(j);
        if p > 0.0 {
            acc += p * x.tail((t + wy * j as f64) / wx);
        }
        if y.tail_at(j) == 0.0 {
            return acc;
        }
        j += 1;
    }
    // Geometric blocks beyond, weighted by the mass of Y in each block.
    let mut lo = j;
    loop {
        let hi = ((lo as f64 * 1.01).ceil() as u64).max(lo + 1);
        let mass = y.tail_at(lo - 1) - y.tail_at(hi - 1);
        let mid = 0.5 * (lo + hi - 1) as f64;
        acc += mass * x.tail((t + wy * mid) / wx);
        if y.tail_at(hi - 1) < 1e-16 * acc || hi > 1 << 60 {
            return acc;
        }
        lo = hi;
    }
}

/// Two-sided tail `P(|τ^c| > t)` of `τ^c = (1−m)τ^u − (1+m)τ^d`.
pub fn centred_cycle_tail(comb: &Comb, m: f64, t: f64) -> f64 {
    let (wu, wd) = (1.0 - m, 1.0 + m);
    convolved_tail(comb.up(), comb.down(), wu, wd, t)
        + convolved_tail(comb.down(), comb.up(), wd, wu, t)
}

// E[(τ^c)²; |τ^c| ≤ t] by double summation over the effective supports.
fn centred_truncated_second_moment(comb: &Comb, m: f64, t: f64) -> f64 {
    let support = |l: &PersistenceLaw| {
        let mut n = 1;
        while l.tail_at(n) > 1e-17 && n < 20_000 {
            n += 1;
        }
        n
    };
    let (nu, nd) = (support(comb.up()), support(comb.down()));
    let mut acc = 0.0;
    for i in 1..=nu {
        let pu = comb.up().pmf(i);
        for j in 1..=nd {
            let v = (1.0 - m) * i as f64 - (1.0 + m) * j as f64;
            if v.abs() <= t {
                acc += pu * comb.down().pmf(j) * v * v;
            }
        }
    }
    acc
}

/// Checks `𝒯_c(t)/𝒯(t) → (1−m)^α(1+b)/2 + (1+m)^α(1−b)/2` for `α < 2`, or
/// `V_c(t)/Σ²(t) → 1` with light tails, on the grid `ts`.
pub fn equivalence_checks(comb: &Comb, ts: &[f64]) -> Result<EquivalenceDiagnostics> {
    let rep = regime_report(comb)?;
    let m = rep.m;
    if rep.alpha < 2.0 {
        let b = rep.b.unwrap_or(0.0);
        let alpha = rep.alpha;
        let limit =
            (1.0 - m).powf(alpha) * (1.0 + b) / 2.0 + (1.0 + m).powf(alpha) * (1.0 - b) / 2.0;
        let tail_ratios: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let total = comb.up().tail(t) + comb.down().tail(t);
                (t, centred_cycle_tail(comb, m, t) / total)
            })
            .collect();
        let max_deviation = tail_ratios
            .iter()
            .map(|(_, r)| (r / limit - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(EquivalenceDiagnostics {
            limit: Some(limit),
            tail_ratios,
            variance_ratios: Vec::new(),
            max_deviation,
        })
    } else {
        let light = comb.up().tail_index().is_none() && comb.down().tail_index().is_none();
        if !light {
            return Err(Error::UnsupportedRegime(
                "variance equivalence is checked for light tails only".into(),
            ));
        }
        let norm = NormalizerSet::new(comb, m)?;
        let variance_ratios: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                (
                    t,
                    centred_truncated_second_moment(comb, m, t) / norm.sigma2(t),
                )
            })
            .collect();
        let max_deviation = variance_ratios
            .iter()
            .map(|(_, r)| (r - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(EquivalenceDiagnostics {
            limit: None,
            tail_ratios: Vec::new(),
            variance_ratios,
            max_deviation,
        })
    }
}
