//! The arcsine Lamperti anomalous diffusion: a labelled stable subordinator,
//! the process built on it, its closed-form marginal law, and the discrete
//! occupation-time recursion whose limit is that law.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::comb::Comb;
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::rng::open_unit;
use crate::scaling::{mean_drift, stability_index};
use crate::special::{beta_reg, gamma};
use crate::stable::{sample_positive_stable, SubordinatorPath};
use crate::stats::ks_sorted;

/// Largest `n_max` accepted by [`lamperti_recursion`].
pub const MAX_RECURSION_N: usize = 5000;

/// Series terms allowed per generating function in [`double_gf_limit`].
pub const MAX_GF_TERMS: u64 = 100_000_000;

/// A stable subordinator whose jumps carry i.i.d. `±1` labels.
#[derive(Debug, Clone)]
pub struct LabelledSubordinatorPath {
    base: SubordinatorPath,
    b: f64,
    labels: Vec<i8>,
    // running sums of label·J and of the jumps labelled +1
    cum_signed: Vec<f64>,
    cum_up: Vec<f64>,
}

pub fn labelled_subordinator<R: Rng + ?Sized>(
    alpha: f64,
    b: f64,
    t_max: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<LabelledSubordinatorPath> {
    labelled_subordinator_scaled(alpha, b, 1.0, t_max, epsilon, rng)
}

pub fn labelled_subordinator_scaled<R: Rng + ?Sized>(
    alpha: f64,
    b: f64,
    scale: f64,
    t_max: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<LabelledSubordinatorPath> {
    if !(-1.0..=1.0).contains(&b) {
        return Err(Error::InvalidParameter(format!(
            "label balance {b} not in [-1, 1]"
        )));
    }
    let base = SubordinatorPath::sample_scaled(alpha, scale, t_max, epsilon, rng)?;
    let mut path = LabelledSubordinatorPath {
        base,
        b,
        labels: Vec::new(),
        cum_signed: Vec::new(),
        cum_up: Vec::new(),
    };
    path.label_new_jumps(rng);
    Ok(path)
}

/// Path whose range covers `[0, level]`, with truncation `eps_rel·level`.
///
/// The subordinator horizon is chosen so that `T` is of order `level` there,
/// then extended until it actually passes `level`.
pub fn covering_path<R: Rng + ?Sized>(
    alpha: f64,
    b: f64,
    scale: f64,
    level: f64,
    eps_rel: f64,
    rng: &mut R,
) -> Result<LabelledSubordinatorPath> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "index {alpha} not in (0, 1)"
        )));
    }
    let u_max = level.powf(alpha) / (scale * gamma(1.0 - alpha));
    let mut path = labelled_subordinator_scaled(alpha, b, scale, u_max, eps_rel * level, rng)?;
    path.extend_past(level, rng)?;
    Ok(path)
}

impl LabelledSubordinatorPath {
    fn label_new_jumps<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let p_up = (1.0 + self.b) / 2.0;
        let sizes = self.base.jump_sizes();
        let (mut signed, mut up) = (
            self.cum_signed.last().copied().unwrap_or(0.0),
            self.cum_up.last().copied().unwrap_or(0.0),
        );
        for &size in &sizes[self.labels.len()..] {
            let label: i8 = if rng.random::<f64>() < p_up { 1 } else { -1 };
            signed += f64::from(label) * size;
            if label > 0 {
                up += size;
            }
            self.labels.push(label);
            self.cum_signed.push(signed);
            self.cum_up.push(up);
        }
    }

    /// Extends the base path (and labels) until `T(t_max) > level`.
    pub fn extend_past<R: Rng + ?Sized>(&mut self, level: f64, rng: &mut R) -> Result<()> {
        self.base.extend_past(level, rng)?;
        self.label_new_jumps(rng);
        Ok(())
    }

    pub fn base(&self) -> &SubordinatorPath {
        &self.base
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn balance(&self) -> f64 {
        self.b
    }

    /// Slope of the limit process on time not covered by a kept jump.
    pub fn residual_slope(&self) -> f64 {
        self.b
    }

    /// Real time covered: `T(t_max)`.
    pub fn horizon(&self) -> f64 {
        self.base.value(self.base.t_max())
    }

    fn jumps_upto(&self, u: f64) -> usize {
        self.base.jump_times().partition_point(|&t| t <= u)
    }

    /// Thinned subordinator of the jumps labelled `+1`.
    pub fn t_up(&self, u: f64) -> f64 {
        let k = self.jumps_upto(u);
        (1.0 + self.b) / 2.0 * self.base.drift() * u + if k == 0 { 0.0 } else { self.cum_up[k - 1] }
    }

    /// Thinned subordinator of the jumps labelled `−1`.
    pub fn t_down(&self, u: f64) -> f64 {
        let k = self.jumps_upto(u);
        let all = if k == 0 {
            0.0
        } else {
            self.base.cumulative_jumps()[k - 1]
        };
        let up = if k == 0 { 0.0 } else { self.cum_up[k - 1] };
        (1.0 - self.b) / 2.0 * self.base.drift() * u + (all - up)
    }

    /// The coupled stable process `T^u − T^d`.
    pub fn stable_value(&self, u: f64) -> f64 {
        let k = self.jumps_upto(u);
        self.b * self.base.drift() * u + if k == 0 { 0.0 } else { self.cum_signed[k - 1] }
    }

    // (left, right) end of jump i in real time
    fn excursion(&self, i: usize) -> (f64, f64) {
        let left = self.base.drift() * self.base.jump_times()[i]
            + if i == 0 {
                0.0
            } else {
                self.base.cumulative_jumps()[i - 1]
            };
        (left, left + self.base.jump_sizes()[i])
    }

    // first jump whose right end exceeds t
    fn locate(&self, t: f64) -> usize {
        let (times, cum, drift) = (
            self.base.jump_times(),
            self.base.cumulative_jumps(),
            self.base.drift(),
        );
        let (mut lo, mut hi) = (0, times.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if drift * times[mid] + cum[mid] <= t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return Err(Error::Domain(format!(
                "time {t} outside [0, {}]",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Renewal quantities at real time `t`.
    pub fn renewal_state(&self, t: f64) -> Result<RenewalState> {
        self.check_time(t)?;
        let i = self.locate(t);
        let drift = self.base.drift();
        if i < self.labels.len() {
            let (left, right) = self.excursion(i);
            if left <= t {
                return Ok(RenewalState {
                    g: left,
                    h: right,
                    n: self.base.jump_times()[i],
                    age: t - left,
                    remaining: right - t,
                });
            }
        }
        // truncated range: local time runs at rate 1/drift since the last jump
        let (u0, t0) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.base.jump_times()[i - 1], self.excursion(i - 1).1)
        };
        Ok(RenewalState {
            g: t,
            h: t,
            n: u0 + (t - t0) / drift,
            age: 0.0,
            remaining: 0.0,
        })
    }

    /// Full state of the anomalous diffusion at `t`, by the centre-of-mass form.
    pub fn anomalous_state(&self, t: f64) -> Result<AnomalousState> {
        let r = self.renewal_state(t)?;
        let i = self.locate(t);
        let in_jump = r.h > r.g;
        let (lagging, leading, label) = if in_jump {
            let label = f64::from(self.labels[i]);
            let before = self.b * self.base.drift() * r.n
                + if i == 0 { 0.0 } else { self.cum_signed[i - 1] };
            (before, before + label * (r.h - r.g), label)
        } else {
            let y = self.stable_value(r.n);
            (y, y, self.b)
        };
        let value = if in_jump {
            lagging + (t - r.g) / (r.h - r.g) * (leading - lagging)
        } else {
            lagging
        };
        Ok(AnomalousState {
            t,
            value,
            label,
            renewal: r,
            lagging,
            leading,
        })
    }

    /// `𝒮(t)` by the centre-of-mass form.
    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.anomalous_state(t)?.value)
    }

    /// `𝒮(t) = ∫_0^t 𝒳(s) ds` by direct accumulation over the excursions.
    pub fn integral(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let mut acc = 0.0;
        let mut clock = 0.0;
        for i in 0..self.labels.len() {
            let (left, right) = self.excursion(i);
            if left >= t {
                break;
            }
            acc += self.b * (left - clock);
            acc += f64::from(self.labels[i]) * (right.min(t) - left);
            clock = right;
            if right >= t {
                return Ok(acc);
            }
        }
        Ok(acc + self.b * (t - clock))
    }

    /// CSV `t,S,label,age` on a grid of real times.
    pub fn write_csv<W: Write>(&self, grid: &[f64], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "S", "label", "age"])?;
        for &t in grid {
            let s = self.anomalous_state(t)?;
            out.write_record([
                format!("{t:.17e}"),
                format!("{:.17e}", s.value),
                format!("{}", s.label),
                format!("{:.17e}", s.renewal.age),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `G ≤ t ≤ H`, the local time `N`, age `t − G` and remaining time `H − t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalState {
    pub g: f64,
    pub h: f64,
    pub n: f64,
    pub age: f64,
    pub remaining: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnomalousState {
    pub t: f64,
    pub value: f64,
    /// Current slope: the excursion label, or the residual slope on the range.
    pub label: f64,
    pub renewal: RenewalState,
    pub lagging: f64,
    pub leading: f64,
}

/// `(T^u − T^d)/(T^u + T^d)` at time 1 from two independent positive stables.
pub fn sample_ratio<R: Rng + ?Sized>(alpha: f64, b: f64, rng: &mut R) -> f64 {
    let up = ((1.0 + b) / 2.0).powf(1.0 / alpha) * sample_positive_stable(alpha, rng);
    let down = ((1.0 - b) / 2.0).powf(1.0 / alpha) * sample_positive_stable(alpha, rng);
    (up - down) / (up + down)
}

const CDF_NODES: usize = 256;
const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-13;

/// Marginal law of the anomalous diffusion: density, CDF, sampler.
///
/// On `(−1, 0]` the integration variable is `w = (1+x)^α`, on `[0, 1)` it is
/// `v = (1−x)^α`; both remove the endpoint singularities.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    alpha: f64,
    m: f64,
    r: f64,
    left_cum: Vec<f64>,
    right_cum: Vec<f64>,
}

impl DensityEvaluator {
    pub fn new(alpha: f64, m: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "index {alpha} not in (0, 1)"
            )));
        }
        if !(m > -1.0 && m < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mean drift {m} not in (-1, 1)"
            )));
        }
        let mut eval = DensityEvaluator {
            alpha,
            m,
            r: (1.0 + m) / (1.0 - m),
            left_cum: Vec::new(),
            right_cum: Vec::new(),
        };
        eval.left_cum = eval.cumulate(|w| eval.g_left(w));
        eval.right_cum = eval.cumulate(|v| eval.g_right(v));
        Ok(eval)
    }

    fn cumulate(&self, g: impl Fn(f64) -> f64 + Copy) -> Vec<f64> {
        let h = 1.0 / CDF_NODES as f64;
        let mut out = Vec::with_capacity(CDF_NODES + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for j in 0..CDF_NODES {
            acc += integrate(g, j as f64 * h, (j + 1) as f64 * h, QUAD_ABS, QUAD_REL).value;
            out.push(acc);
        }
        out
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    fn prefactor(&self) -> f64 {
        2.0 * (PI * self.alpha).sin() / (PI * self.alpha)
    }

    // f_1 dx in w = (1+x)^α
    fn g_left(&self, w: f64) -> f64 {
        let a = self.alpha;
        let one_minus = 2.0 - w.powf(1.0 / a);
        let pa = one_minus.powf(a);
        let den = self.r * pa * pa + 2.0 * (PI * a).cos() * w * pa + w * w / self.r;
        self.prefactor() * one_minus.powf(a - 1.0) / den
    }

    // f_1 dx in v = (1−x)^α
    fn g_right(&self, v: f64) -> f64 {
        let a = self.alpha;
        let one_plus = 2.0 - v.powf(1.0 / a);
        let pa = one_plus.powf(a);
        let den = self.r * v * v + 2.0 * (PI * a).cos() * v * pa + pa * pa / self.r;
        self.prefactor() * one_plus.powf(a - 1.0) / den
    }

    /// `f_t(x)` on `(−t, t)`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("time {t} must be positive")));
        }
        if !(x.abs() < t) {
            return Err(Error::Domain(format!(
                "density is supported on (-{t}, {t}), got {x}"
            )));
        }
        let a = self.alpha;
        let y = x / t;
        let (lo, hi) = ((1.0 - y).powf(a), (1.0 + y).powf(a));
        let den = self.r * lo * lo + 2.0 * (PI * a).cos() * hi * lo + hi * hi / self.r;
        Ok(
            2.0 * (PI * a).sin() / (PI * t) * (1.0 - y).powf(a - 1.0) * (1.0 + y).powf(a - 1.0)
                / den,
        )
    }

    fn mass(&self, cum: &[f64], g: impl Fn(f64) -> f64, w: f64) -> f64 {
        let j = ((w * CDF_NODES as f64).floor() as usize).min(CDF_NODES - 1);
        let wj = j as f64 / CDF_NODES as f64;
        cum[j] + integrate(g, wj, w, QUAD_ABS, QUAD_REL).value
    }

    fn left_total(&self) -> f64 {
        self.left_cum[CDF_NODES]
    }

    fn right_total(&self) -> f64 {
        self.right_cum[CDF_NODES]
    }

    /// `∫ f_1`, which is 1 up to quadrature error.
    pub fn normalization(&self) -> f64 {
        self.left_total() + self.right_total()
    }

    /// `∫ x f_1(x) dx`.
    pub fn mean(&self) -> f64 {
        let ia = 1.0 / self.alpha;
        let left = integrate(
            |w| (w.powf(ia) - 1.0) * self.g_left(w),
            0.0,
            1.0,
            QUAD_ABS,
            QUAD_REL,
        )
        .value;
        let right = integrate(
            |v| (1.0 - v.powf(ia)) * self.g_right(v),
            0.0,
            1.0,
            QUAD_ABS,
            QUAD_REL,
        )
        .value;
        left + right
    }

    /// `E e^{izD}` for `D` distributed as `f_1`.
    pub fn char_fn(&self, z: f64) -> Complex64 {
        let ia = 1.0 / self.alpha;
        let part = |sign: f64, g: &dyn Fn(f64) -> f64| {
            let re = integrate(
                |w| (z * sign * (1.0 - w.powf(ia))).cos() * g(w),
                0.0,
                1.0,
                1e-13,
                1e-12,
            )
            .value;
            let im = integrate(
                |w| (z * sign * (1.0 - w.powf(ia))).sin() * g(w),
                0.0,
                1.0,
                1e-13,
                1e-12,
            )
            .value;
            Complex64::new(re, im)
        };
        part(-1.0, &|w| self.g_left(w)) + part(1.0, &|v| self.g_right(v))
    }

    /// `F_t(x)`, clamped to 0 and 1 outside `(−t, t)`.
    pub fn cdf(&self, t: f64, x: f64) -> f64 {
        let y = x / t;
        if y <= -1.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let a = self.alpha;
        if y <= 0.0 {
            self.mass(&self.left_cum, |w| self.g_left(w), (1.0 + y).powf(a))
        } else {
            let right = self.mass(&self.right_cum, |v| self.g_right(v), (1.0 - y).powf(a));
            (self.normalization() - right).clamp(0.0, 1.0)
        }
    }

    /// `F_t^{-1}(p)`, accurate to about `1e−10` in probability.
    pub fn quantile(&self, t: f64, p: f64) -> f64 {
        let ia = 1.0 / self.alpha;
        if p <= self.left_total() {
            let w = self.invert(&self.left_cum, &|w| self.g_left(w), p);
            t * (w.powf(ia) - 1.0)
        } else {
            let target = (self.normalization() - p).max(0.0);
            let v = self.invert(&self.right_cum, &|v| self.g_right(v), target);
            t * (1.0 - v.powf(ia))
        }
    }

    // Solves ∫_0^w g = target by Newton steps safeguarded by bisection.
    fn invert(&self, cum: &[f64], g: &dyn Fn(f64) -> f64, target: f64) -> f64 {
        let j = cum.partition_point(|&c| c <= target).clamp(1, CDF_NODES) - 1;
        let h = 1.0 / CDF_NODES as f64;
        let (mut lo, mut hi) = (j as f64 * h, (j + 1) as f64 * h);
        let base = cum[j];
        let mut w = 0.5 * (lo + hi);
        for _ in 0..100 {
            let resid = base + integrate(g, j as f64 * h, w, QUAD_ABS, QUAD_REL).value - target;
            if resid.abs() < 1e-13 {
                break;
            }
            if resid > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let newton = w - resid / g(w);
            w = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        w
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        self.quantile(t, open_unit(rng))
    }
}

/// `∫_0^∞ e^{−st} ∫ e^{iyx} f_t(x) dx dt` in closed form.
///
/// With `p = (1+m)/2`, `q = (1−m)/2` this is
/// `[p(s−iy)^{α−1} + q(s+iy)^{α−1}] / [p(s−iy)^α + q(s+iy)^α]`.
pub fn flt_f(alpha: f64, m: f64, s: f64, y: f64) -> Result<Complex64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!(
            "Laplace variable {s} must be positive"
        )));
    }
    let (p, q) = ((1.0 + m) / 2.0, (1.0 - m) / 2.0);
    let minus = Complex64::new(s, -y);
    let plus = Complex64::new(s, y);
    let num = p * minus.powf(alpha - 1.0) + q * plus.powf(alpha - 1.0);
    let den = p * minus.powf(alpha) + q * plus.powf(alpha);
    Ok(num / den)
}

/// CDF of `𝒜(t)/t`, the generalized arcsine law `Beta(1−α, α)`.
pub fn age_fraction_cdf(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        beta_reg(1.0 - alpha, alpha, x)
    }
}

/// CDF of `𝒜/(𝒜 + ℋ)`: `r^α` on `(0, 1)`.
pub fn age_ratio_cdf(alpha: f64, r: f64) -> f64 {
    r.clamp(0.0, 1.0).powf(alpha)
}

/// `P(ℋ ≤ h | 𝒜 = a) = 1 − (a/(a+h))^α`.
pub fn kernel_cdf(alpha: f64, a: f64, h: f64) -> f64 {
    if h <= 0.0 {
        0.0
    } else {
        1.0 - (a / (a + h)).powf(alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDiagnostics {
    pub count: usize,
    pub ks: f64,
}

/// Conditional law of `ℋ` given `𝒜 ∈ [a_lo, a_hi]`, tested through the
/// scale-free ratio `W = ℋ/𝒜`, whose conditional CDF is `1 − (1+w)^{−α}`.
pub fn markov_kernel_check(
    alpha: f64,
    states: &[RenewalState],
    a_bin: (f64, f64),
) -> Result<KernelDiagnostics> {
    let mut ws: Vec<f64> = states
        .iter()
        .filter(|s| s.age >= a_bin.0 && s.age <= a_bin.1 && s.age > 0.0)
        .map(|s| s.remaining / s.age)
        .collect();
    if ws.len() < 200 {
        return Err(Error::InsufficientData(format!(
            "{} samples in the age bin, at least 200 needed",
            ws.len()
        )));
    }
    ws.sort_by(f64::total_cmp);
    let ks = ks_sorted(&ws, |w| kernel_cdf(alpha, 1.0, w));
    Ok(KernelDiagnostics {
        count: ws.len(),
        ks,
    })
}

/// `p_{n,k} = P(N_n = k)` where `N_n` counts the up letters among
/// `X_1..X_{n+1}` of a walk whose first run (from `X_1`) goes down.
#[derive(Debug, Clone)]
pub struct LampertiTable {
    rows: Vec<Vec<f64>>,
}

impl LampertiTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    /// Row `n`, indexed by `k = 0..=n`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn p(&self, n: usize, k: usize) -> f64 {
        self.rows[n].get(k).copied().unwrap_or(0.0)
    }

    /// `sup_v |P(N_n ≤ nv) − F(v)|`, both one-sided limits at every atom.
    pub fn ks_fraction(&self, n: usize, cdf: impl Fn(f64) -> f64) -> f64 {
        let mut below = 0.0;
        let mut d: f64 = 0.0;
        for (k, &p) in self.rows[n].iter().enumerate() {
            let f = cdf(k as f64 / n as f64);
            d = d.max((f - below).abs());
            below += p;
            d = d.max((below - f).abs());
        }
        d
    }
}

/// Dynamic programme for the occupation-time recursion.
///
/// The down-run convolution `r_{j,k} = Σ_l d_l p_{j−l,k}` is cached so each
/// row costs `O(n²)`.
pub fn lamperti_recursion(comb: &Comb, n_max: usize) -> Result<LampertiTable> {
    if n_max > MAX_RECURSION_N {
        return Err(Error::ResourceLimit(format!(
            "n_max {n_max} exceeds the limit of {MAX_RECURSION_N}"
        )));
    }
    let (up, down) = (comb.up(), comb.down());
    let u: Vec<f64> = (0..=n_max as u64).map(|m| up.pmf(m)).collect();
    let d: Vec<f64> = (0..=n_max as u64).map(|l| down.pmf(l)).collect();
    let tail_u: Vec<f64> = (0..=n_max as u64).map(|n| up.tail_at(n)).collect();
    let mut p: Vec<Vec<f64>> = vec![vec![1.0]];
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        // r_{n−1,k}, k < n−1
        let j = n - 1;
        let mut rj = vec![0.0; j];
        for l in 1..=j {
            for (acc, &pv) in rj.iter_mut().zip(&p[j - l]) {
                *acc += d[l] * pv;
            }
        }
        r.push(rj);
        let mut row = vec![0.0; n + 1];
        for m in 1..n {
            for (acc, &rv) in row[m..].iter_mut().zip(&r[n - m]) {
                *acc += u[m] * rv;
            }
        }
        for l in 1..=n {
            row[n - l + 1] += d[l] * tail_u[n - l];
        }
        row[0] += down.tail_at(n as u64);
        p.push(row);
    }
    Ok(LampertiTable { rows: p })
}

/// `(1−x)P(x, e^{−λ(1−x)})` and its limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfLimit {
    pub value: f64,
    pub target: f64,
    pub terms: u64,
}

// Σ_{n≥0} 𝒯(n) z^n to a remainder below 1e−14.
fn tail_gf(law: &crate::comb::PersistenceLaw, z: f64, terms: u64) -> f64 {
    let mut sum = 0.0;
    let mut zn = 1.0;
    for n in 0..terms {
        sum += law.tail_at(n) * zn;
        zn *= z;
    }
    sum
}

/// Double generating function of the recursion at `y = e^{−λ(1−x)}`, scaled
/// by `1 − x`, next to its `x → 1` limit `((1+λ)^{α−1} + r)/((1+λ)^α + r)`
/// with `r = (1−m)/(1+m)`.
pub fn double_gf_limit(comb: &Comb, x: f64, lambda: f64) -> Result<GfLimit> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("x = {x} not in (0, 1)")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("λ = {lambda} must be positive")));
    }
    let alpha = stability_index(comb);
    if alpha >= 1.0 {
        return Err(Error::UnsupportedRegime(format!(
            "generating-function limit needs index below 1, got {alpha}"
        )));
    }
    let m = mean_drift(comb)?.m;
    let y = (-lambda * (1.0 - x)).exp();
    let xy = x * y;
    // x^N/(1−x) < 1e−14 bounds the dropped mass of every series
    let needed = ((1e-14 * (1.0 - x)).ln() / x.ln()).ceil();
    if needed > MAX_GF_TERMS as f64 {
        return Err(Error::ResourceLimit(format!(
            "x = {x} needs about {needed:.3e} series terms, budget is {MAX_GF_TERMS}"
        )));
    }
    let terms = needed as u64 + 1;
    let td_x = tail_gf(comb.down(), x, terms);
    let tu_xy = tail_gf(comb.up(), xy, terms);
    // 1 − F(z) = (1 − z) T(z) keeps the denominator free of cancellation
    let fd_x = 1.0 - (1.0 - x) * td_x;
    let den = (1.0 - x) * td_x + (1.0 - xy) * tu_xy - (1.0 - x) * (1.0 - xy) * td_x * tu_xy;
    let value = (1.0 - x) * (fd_x * tu_xy * y + td_x) / den;
    let r = (1.0 - m) / (1.0 + m);
    let target = ((1.0 + lambda).powf(alpha - 1.0) + r) / ((1.0 + lambda).powf(alpha) + r);
    Ok(GfLimit {
        value,
        target,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::CombSpec;
    use crate::rng::stream;
    use crate::stats::ks_distance;

    fn symmetric_half() -> Comb {
        Comb::new(CombSpec::power(0.5, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn arcsine_reduction() {
        let f = DensityEvaluator::new(0.5, 0.0).unwrap();
        assert!((f.density(1.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        for x in [-0.99f64, -0.3, 0.5, 0.999] {
            let want = 1.0 / (PI * (1.0 - x * x).sqrt());
            assert!((f.density(1.0, x).unwrap() / want - 1.0).abs() < 1e-12);
            let cdf = 2.0 / PI * ((1.0 + x) / 2.0).sqrt().asin();
            assert!((f.cdf(1.0, x) - cdf).abs() < 1e-12, "{x}");
        }
        assert!(f.density(1.0, 1.0).is_err());
        assert_eq!(f.cdf(1.0, -1.0), 0.0);
        assert_eq!(f.cdf(1.0, 1.0), 1.0);
        assert!((f.cdf(1.0, 0.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn density_symmetry_and_scaling() {
        let f = DensityEvaluator::new(0.3, 0.0).unwrap();
        let g = DensityEvaluator::new(0.7, 0.5).unwrap();
        for x in [0.1, 0.6, 0.95] {
            assert!((f.density(1.0, x).unwrap() - f.density(1.0, -x).unwrap()).abs() < 1e-12);
            let lhs = g.density(3.0, 3.0 * x).unwrap();
            let rhs = g.density(1.0, x).unwrap() / 3.0;
            assert!((lhs / rhs - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn normalization_and_mean() {
        for a in [0.3, 0.5, 0.7] {
            for m in [-0.5, 0.0, 0.5] {
                let f = DensityEvaluator::new(a, m).unwrap();
                assert!((f.normalization() - 1.0).abs() < 1e-8, "{a} {m}");
                assert!((f.mean() - m).abs() < 1e-6, "{a} {m}: {}", f.mean());
            }
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let f = DensityEvaluator::new(0.3, 0.4).unwrap();
        for p in [1e-3, 0.01, 0.3, 0.5, 0.77, 0.99] {
            let x = f.quantile(2.0, p);
            assert!((f.cdf(2.0, x) - p).abs() < 1e-10, "{p}");
        }
    }

    #[test]
    fn sample_ratio_matches_density() {
        let f = DensityEvaluator::new(0.5, 0.4).unwrap();
        let mut rng = stream(20, 0);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| sample_ratio(0.5, 0.4, &mut rng))
            .collect();
        assert!(xs.iter().all(|x| x.abs() < 1.0));
        assert!(ks_distance(&xs, |x| f.cdf(1.0, x)).unwrap() < 0.015);
    }

    #[test]
    fn flt_closed_form_properties() {
        let z = flt_f(0.4, 0.3, 2.0, 0.0).unwrap();
        assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let a = flt_f(0.4, 0.3, 1.0, 0.7).unwrap();
        let b = flt_f(0.4, 0.3, 1.0, -0.7).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
        assert!(flt_f(0.4, 0.3, 0.0, 1.0).is_err());
    }

    // ∫_0^∞ e^{−st} φ(yt) dt with φ the characteristic function of f_1
    fn numeric_flt(f: &DensityEvaluator, s: f64, y: f64) -> Complex64 {
        let top = 40.0 / s;
        let re = integrate(
            |t| (-s * t).exp() * f.char_fn(y * t).re,
            0.0,
            top,
            1e-10,
            1e-9,
        )
        .value;
        let im = integrate(
            |t| (-s * t).exp() * f.char_fn(y * t).im,
            0.0,
            top,
            1e-10,
            1e-9,
        )
        .value;
        Complex64::new(re, im)
    }

    #[test]
    fn flt_matches_numeric_transform() {
        for &(a, m, s, y) in &[
            (0.5, 0.0, 1.0, 1.0),
            (0.6, 0.5, 1.0, 1.5),
            (0.3, -0.4, 2.0, 0.8),
        ] {
            let f = DensityEvaluator::new(a, m).unwrap();
            let num = numeric_flt(&f, s, y);
            let closed = flt_f(a, m, s, y).unwrap();
            assert!((num - closed).norm() < 1e-4, "{a} {m}: {num} vs {closed}");
        }
    }

    #[test]
    fn labelled_path_thinning_and_labels() {
        let mut rng = stream(21, 0);
        let p = labelled_subordinator(0.5, 0.0, 1.0, 1e-6, &mut rng).unwrap();
        assert_eq!(p.labels().len(), p.base().jump_times().len());
        for u in [0.3, 1.0] {
            let total = p.t_up(u) + p.t_down(u);
            assert!((total - p.base().value(u)).abs() <= 1e-12 * total);
        }
        let n = p.labels().len() as f64;
        let mean = p.labels().iter().map(|&l| f64::from(l)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        let all_up = labelled_subordinator(0.5, 1.0, 1.0, 1e-4, &mut rng).unwrap();
        let t = all_up.horizon() * 0.6;
        assert!((all_up.value(t).unwrap() - t).abs() < 1e-12 * t);
    }

    #[test]
    fn renewal_state_on_hand_path() {
        let mut rng = stream(22, 0);
        let p = labelled_subordinator(0.5, 0.2, 1.0, 1e-3, &mut rng).unwrap();
        let (left, right) = p.excursion(2);
        let mid = 0.5 * (left + right);
        let st = p.renewal_state(mid).unwrap();
        assert_eq!((st.g, st.h), (left, right));
        assert!((st.age - (mid - left)).abs() < 1e-15);
        let at_end = p.renewal_state(right).unwrap();
        assert_eq!((at_end.age, at_end.remaining), (0.0, 0.0));
        assert!(p.renewal_state(p.horizon() * 1.01).is_err());
        let s = p.anomalous_state(right).unwrap();
        assert!((s.value - s.leading).abs() < 1e-12);
    }

    #[test]
    fn two_computations_agree() {
        let mut rng = stream(23, 0);
        for b in [-0.4, 0.0, 0.7] {
            let p = covering_path(0.6, b, 1.0, 5.0, 1e-6, &mut rng).unwrap();
            let h = p.horizon();
            for t in [0.0, 0.37, 1.0, 2.5, h] {
                let a = p.value(t).unwrap();
                let c = p.integral(t).unwrap();
                assert!((a - c).abs() <= 1e-9 * t.max(1.0), "{t}: {a} {c}");
            }
        }
    }

    #[test]
    fn anomalous_path_is_lipschitz() {
        let mut rng = stream(24, 0);
        let p = covering_path(0.5, 0.3, 1.0, 1.0, 1e-6, &mut rng).unwrap();
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| p.value(t).unwrap()).collect();
        assert_eq!(vals[0], 0.0);
        for (w, g) in vals.windows(2).zip(grid.windows(2)) {
            assert!((w[1] - w[0]).abs() <= (g[1] - g[0]) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn kernel_cdf_edges() {
        assert_eq!(kernel_cdf(0.5, 0.1, 0.0), 0.0);
        let tail = 1.0 - kernel_cdf(0.5, 0.1, 1e12);
        assert!(tail < 1e-6);
        assert!(markov_kernel_check(0.5, &[], (0.0, 1.0)).is_err());
    }

    // Exhaustive sum over letter sequences X_2..X_{n+1} given X_0 = u, X_1 = d.
    fn brute_force(comb: &Comb, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for bits in 0u32..(1 << n) {
            let letters: Vec<bool> = std::iter::once(false)
                .chain((0..n).map(|i| bits >> i & 1 == 1))
                .collect();
            let mut prob = 1.0;
            let mut age = 1u64;
            for w in letters.windows(2) {
                let law = if w[0] { comb.up() } else { comb.down() };
                let h = law.family().hazard(age);
                if w[1] == w[0] {
                    prob *= 1.0 - h;
                    age += 1;
                } else {
                    prob *= h;
                    age = 1;
                }
            }
            out[letters.iter().filter(|&&u| u).count()] += prob;
        }
        out
    }

    #[test]
    fn recursion_matches_enumeration() {
        for comb in [
            Comb::new(CombSpec::constant(0.3, 0.6)).unwrap(),
            Comb::new(CombSpec::power(0.5, 49.0 / 9.0, 1.0)).unwrap(),
            Comb::new(CombSpec::power(1.5, 2.0, 1.0)).unwrap(),
        ] {
            let table = lamperti_recursion(&comb, 16).unwrap();
            for n in 0..=16 {
                let want = brute_force(&comb, n);
                for (k, &w) in want.iter().enumerate() {
                    let got = table.p(n, k);
                    assert!(
                        (got - w).abs() <= 1e-15 + 1e-13 * w,
                        "n={n} k={k}: {got} {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn recursion_rows_sum_to_one() {
        let table = lamperti_recursion(&symmetric_half(), 200).unwrap();
        for n in 0..=200 {
            let s: f64 = table.row(n).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{n}: {s}");
        }
        assert!(lamperti_recursion(&symmetric_half(), MAX_RECURSION_N + 1).is_err());
    }

    #[test]
    fn gf_target_values() {
        let comb = symmetric_half();
        let g = double_gf_limit(&comb, 0.9, 1.0).unwrap();
        let want = (2f64.powf(-0.5) + 1.0) / (2f64.sqrt() + 1.0);
        assert!((g.target - want).abs() < 1e-15);
        let tiny = double_gf_limit(&comb, 0.9, 1e-12).unwrap();
        assert!((tiny.target - 1.0).abs() < 1e-11);
        assert!(double_gf_limit(&comb, 1.0 - 1e-10, 1.0).is_err());
    }

    #[test]
    fn gf_series_matches_table() {
        // Σ_{n,k} p_{n,k} x^n y^k from the table at small x
        let comb = Comb::new(CombSpec::power(0.5, 2.0, 1.0)).unwrap();
        let table = lamperti_recursion(&comb, 400).unwrap();
        let (x, lambda) = (0.9f64, 0.7f64);
        let y = (-lambda * (1.0 - x)).exp();
        let mut direct = 0.0;
        for n in 0..=400 {
            let row: f64 = table
                .row(n)
                .iter()
                .enumerate()
                .map(|(k, p)| p * y.powi(k as i32))
                .sum();
            direct += row * x.powi(n as i32);
        }
        let g = double_gf_limit(&comb, x, lambda).unwrap();
        assert!(
            (g.value - (1.0 - x) * direct).abs() < 1e-12,
            "{} {}",
            g.value,
            (1.0 - x) * direct
        );
    }
}
