//! End-to-end checks of the scaling limits: simulate replicas of the walk,
//! rescale their marginals and compare with the reference law.

use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use crate::comb::{Comb, CombSpec};
use crate::config::{check_positive, from_toml_str};
use crate::error::{Error, Result};
use crate::lamperti::DensityEvaluator;
use crate::report::Report;
use crate::rng::replicate;
use crate::scaling::{classify_regime, regime_report, NormalizerSet, Regime, RegimeReport};
use crate::stable::StableParams;
use crate::stats::{hill_estimate, ks_sorted, quantile, HillEstimate};
use crate::walk::{positions_at, simulate_prw, Trajectory};

/// Fewest replicas a scenario may request.
pub const MIN_REPLICAS: usize = 1000;

fn default_tolerance() -> f64 {
    0.03
}

fn default_lipschitz_paths() -> usize {
    20
}

/// Reference-law override, used for negative controls.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceOverride {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationScenario {
    pub name: String,
    pub regime: String,
    pub u: f64,
    pub replicas: usize,
    pub times: Vec<f64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Used when no seed is given on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Simulated horizon; defaults to `⌊u·max(times)⌋`.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub reference: ReferenceOverride,
    /// Paths whose Lipschitz modulus is checked in the anomalous regime.
    #[serde(default = "default_lipschitz_paths")]
    pub lipschitz_paths: usize,
    pub comb: CombSpec,
}

impl VerificationScenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: VerificationScenario = from_toml_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn expected_regime(&self) -> Result<Regime> {
        self.regime.parse().map_err(|_| {
            Error::config(
                "regime",
                format!(
                    "expected gaussian, generic-stable, cauchy or anomalous, got `{}`",
                    self.regime
                ),
            )
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
            .unwrap_or_else(|| self.step_times().last().copied().unwrap_or(0))
    }

    fn step_times(&self) -> Vec<u64> {
        self.times
            .iter()
            .map(|&t| (self.u * t).floor() as u64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.expected_regime()?;
        check_positive("u", self.u)?;
        if self.replicas < MIN_REPLICAS {
            return Err(Error::config(
                "replicas",
                format!(
                    "at least {MIN_REPLICAS} replicas required, got {}",
                    self.replicas
                ),
            ));
        }
        if self.times.is_empty() {
            return Err(Error::config("times", "at least one time point required"));
        }
        for (i, &t) in self.times.iter().enumerate() {
            check_positive(&format!("times[{i}]"), t)?;
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "times",
                "time points must be strictly increasing",
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config(
                "tolerance",
                format!("expected a value in (0, 1), got {}", self.tolerance),
            ));
        }
        let needed = (self.u * self.times[self.times.len() - 1]).floor() as u64;
        if self.horizon() < needed {
            return Err(Error::config(
                "horizon",
                format!(
                    "horizon {} is shorter than u·max(times) = {needed}",
                    self.horizon()
                ),
            ));
        }
        if let Some(a) = self.reference.alpha {
            if !(a > 0.0 && a <= 2.0) {
                return Err(Error::config(
                    "reference.alpha",
                    format!("expected a value in (0, 2], got {a}"),
                ));
            }
        }
        if let Some(b) = self.reference.beta {
            if !(-1.0..=1.0).contains(&b) {
                return Err(Error::config(
                    "reference.beta",
                    format!("expected a value in [-1, 1], got {b}"),
                ));
            }
        }
        self.comb.validate().map_err(|e| match e {
            Error::Config { path, message } => Error::config(format!("comb.{path}"), message),
            other => other,
        })
    }
}

/// Law the rescaled marginals are compared with.
#[derive(Debug, Clone)]
pub enum ReferenceLaw {
    /// Strictly stable (normal at `α = 2`, Cauchy at `α = 1`) at unit time.
    Stable(StableParams),
    /// Arcsine Lamperti law.
    Lamperti(DensityEvaluator),
}

impl ReferenceLaw {
    pub fn cdf(&self, t: f64, x: f64) -> f64 {
        match self {
            ReferenceLaw::Stable(p) => p.at_time(t).cdf(x),
            ReferenceLaw::Lamperti(f) => f.cdf(t, x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReferenceLaw::Stable(p) if p.alpha() == 2.0 => "normal",
            ReferenceLaw::Stable(p) if p.alpha() == 1.0 => "cauchy",
            ReferenceLaw::Stable(_) => "stable",
            ReferenceLaw::Lamperti(_) => "arcsine-lamperti",
        }
    }

    fn write(&self, out: &mut Report) {
        out.text("law", self.name());
        match self {
            ReferenceLaw::Stable(p) => {
                out.real("alpha", p.alpha())
                    .real("beta", p.beta())
                    .real("sigma", p.sigma());
            }
            ReferenceLaw::Lamperti(f) => {
                out.real("alpha", f.alpha()).real("m_S", f.m());
            }
        }
    }
}

/// Affine map `x ↦ (S − centre·n)·factor` from positions to the limit scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    pub centre: f64,
    pub factor: f64,
}

impl Rescaling {
    pub fn apply(&self, s: f64, n: u64) -> f64 {
        (s - self.centre * n as f64) * self.factor
    }
}

/// Centring and normalization used for a comb in its own regime.
pub fn limit_rescaling(comb: &Comb, regime: &RegimeReport, u: f64) -> Result<Rescaling> {
    match regime.regime {
        Regime::Anomalous => Ok(Rescaling {
            centre: 0.0,
            factor: 1.0 / u,
        }),
        Regime::Cauchy => {
            let norms = NormalizerSet::new(comb, regime.m)?;
            // with a finite mean cycle the drift is d_S and D(u) is d_T
            let (centre, d) = match (regime.d_t.is_finite(), regime.d) {
                (true, Some(d)) => (d, regime.d_t),
                _ => (regime.m, norms.d_of_u(u)?),
            };
            let xi = norms.xi1(norms.s(u)?)?;
            Ok(Rescaling {
                centre,
                factor: d / xi / u,
            })
        }
        Regime::Gaussian | Regime::GenericStable => {
            let norms = NormalizerSet::new(comb, regime.m)?;
            Ok(Rescaling {
                centre: regime.m,
                factor: 1.0 / norms.lambda(u)?,
            })
        }
    }
}

/// Reference law of the regime, with optional overrides of `α` and `β`.
pub fn reference_law(regime: &RegimeReport, over: &ReferenceOverride) -> Result<ReferenceLaw> {
    let alpha = over.alpha.unwrap_or(regime.alpha);
    if regime.regime == Regime::Anomalous {
        return Ok(ReferenceLaw::Lamperti(DensityEvaluator::new(
            alpha.min(1.0 - 1e-9),
            regime.m,
        )?));
    }
    let beta = if alpha == 1.0 {
        0.0
    } else {
        over.beta.unwrap_or(regime.beta)
    };
    Ok(ReferenceLaw::Stable(StableParams::new(alpha, beta)?))
}

/// One named comparison against a tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub key: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub name: String,
    pub seed: u64,
    pub criteria: Vec<Criterion>,
    pub report: Report,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

fn criterion(key: String, value: f64, tolerance: f64) -> Criterion {
    Criterion {
        key,
        value,
        tolerance,
        pass: value < tolerance,
    }
}

/// Simulates the scenario and checks every marginal (and the increment
/// between the first two times) against the reference law.
pub fn verify_regime(scenario: &VerificationScenario, seed: u64) -> Result<VerificationReport> {
    scenario.validate()?;
    let comb = Comb::new(scenario.comb.clone())?;
    let regime = regime_report(&comb)?;
    let expected = scenario.expected_regime()?;
    if regime.regime != expected {
        return Err(Error::config(
            "regime",
            format!(
                "scenario expects {expected} but the comb is in the {} regime",
                regime.regime
            ),
        ));
    }
    let rescaling = limit_rescaling(&comb, &regime, scenario.u)?;
    let reference = reference_law(&regime, &scenario.reference)?;
    let steps = scenario.step_times();

    // S_n lives on a lattice of spacing 2; spreading each value uniformly over
    // its cell removes the atom-size term from the KS distance
    let positions: Vec<Vec<f64>> = replicate(seed, scenario.replicas, |_, rng| {
        positions_at(&comb, &steps, rng)
            .into_iter()
            .map(|s| s as f64 + 2.0 * rng.random::<f64>() - 1.0)
            .collect()
    });

    let mut criteria = Vec::new();
    let mut report = Report::new();
    report
        .section("scenario")
        .text("name", &scenario.name)
        .int("seed", seed)
        .int("replicas", scenario.replicas as u64)
        .real("u", scenario.u)
        .reals("times", &scenario.times)
        .real("tolerance", scenario.tolerance);
    regime.write(&mut report);
    report
        .section("normalization")
        .text("lattice_smoothing", "uniform(-1, 1)")
        .real("centre", rescaling.centre)
        .real("scale", 1.0 / rescaling.factor);
    report.section("reference");
    reference.write(&mut report);

    report.section("marginals");
    for (j, (&t, &n)) in scenario.times.iter().zip(&steps).enumerate() {
        let mut xs: Vec<f64> = positions.iter().map(|p| rescaling.apply(p[j], n)).collect();
        xs.sort_by(f64::total_cmp);
        let ks = ks_sorted(&xs, |x| reference.cdf(t, x));
        let c = criterion(format!("ks_t{j}"), ks, scenario.tolerance);
        report
            .real(&format!("t{j}"), t)
            .real(&c.key, ks)
            .flag(&format!("pass_t{j}"), c.pass);
        criteria.push(c);
    }

    if steps.len() >= 2 && regime.regime != Regime::Anomalous {
        // stationary independent increments: the first gap has the law at t1 − t0
        let (t0, t1) = (scenario.times[0], scenario.times[1]);
        let mut xs: Vec<f64> = positions
            .iter()
            .map(|p| rescaling.apply(p[1] - p[0], steps[1] - steps[0]))
            .collect();
        xs.sort_by(f64::total_cmp);
        let ks = ks_sorted(&xs, |x| reference.cdf(t1 - t0, x));
        let c = criterion("ks_increment".into(), ks, scenario.tolerance);
        report
            .section("increments")
            .real(&c.key, ks)
            .flag("pass_increment", c.pass);
        criteria.push(c);
    }

    if regime.regime == Regime::Anomalous && scenario.lipschitz_paths > 0 {
        let grid: Vec<f64> = (0..=1000)
            .map(|i| scenario.times[scenario.times.len() - 1] * i as f64 / 1000.0)
            .collect();
        let horizon = scenario.horizon();
        let moduli = replicate(
            seed ^ 0x9e37_79b9_7f4a_7c15,
            scenario.lipschitz_paths,
            |_, rng| {
                let traj = simulate_prw(&comb, horizon, rng);
                traj.rescale(scenario.u, 0.0, scenario.u, &grid)
                    .map(|p| p.lipschitz_modulus())
            },
        );
        let worst = moduli
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        // |S_{ut} − S_{us}|/u ≤ |t − s| holds exactly, so any excess is an error
        let c = Criterion {
            key: "lipschitz_modulus".into(),
            value: worst,
            tolerance: 1.0,
            pass: worst <= 1.0 + 1e-12,
        };
        report
            .section("paths")
            .int("paths", scenario.lipschitz_paths as u64)
            .real(&c.key, worst)
            .flag("pass_lipschitz", c.pass);
        criteria.push(c);
    }

    let passed = criteria.iter().all(|c| c.pass);
    report.section("verdict").flag("pass", passed);
    Ok(VerificationReport {
        name: scenario.name.clone(),
        seed,
        criteria,
        report,
    })
}

/// Monte Carlo mean of `|S_n/n − m_S|`.
pub fn drift_l1(comb: &Comb, n: u64, replicas: usize, seed: u64) -> Result<f64> {
    if n < 1000 {
        return Err(Error::InvalidParameter(format!("n = {n} is below 1000")));
    }
    let m = crate::scaling::mean_drift(comb)?.m;
    let devs = replicate(seed, replicas, |_, rng| {
        let s = positions_at(comb, &[n], rng)[0];
        (s as f64 / n as f64 - m).abs()
    });
    Ok(devs.iter().sum::<f64>() / replicas as f64)
}

/// What a single trajectory reveals about its comb.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEstimate {
    pub steps: u64,
    pub runs: usize,
    /// Empirical drift `S_n/n`.
    pub drift: f64,
    /// Truncation level used in the truncated-mean ratio.
    pub truncation: f64,
    pub m_hat: f64,
    pub hill: Option<HillEstimate>,
    pub regime: Option<Regime>,
    /// Why tail estimation was declined, if it was.
    pub notice: Option<String>,
}

/// Estimates `m_S` by the truncated-mean ratio `(Θ̂_u − Θ̂_d)/(Θ̂_u + Θ̂_d)` at
/// the pooled run-length quantile of order `1 − 1/√N` (N complete runs), and
/// the tail index by Hill on the pooled run lengths.
pub fn estimate_trajectory(traj: &Trajectory, k_frac: f64) -> Result<TrajectoryEstimate> {
    let runs = traj.complete_runs();
    if runs.is_empty() {
        return Err(Error::InsufficientData(
            "trajectory has no complete run".into(),
        ));
    }
    let mut pooled: Vec<f64> = runs.iter().map(|r| r.length as f64).collect();
    pooled.sort_by(f64::total_cmp);
    let level = quantile(&pooled, 1.0 - 1.0 / (runs.len() as f64).sqrt());
    let truncated_mean = |dir: crate::comb::Direction| {
        let (mut sum, mut count) = (0.0, 0usize);
        for r in runs.iter().filter(|r| r.direction == dir) {
            sum += (r.length as f64).min(level);
            count += 1;
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    };
    let (up, down) = (
        truncated_mean(crate::comb::Direction::Up),
        truncated_mean(crate::comb::Direction::Down),
    );
    let m_hat = if up + down > 0.0 {
        (up - down) / (up + down)
    } else {
        0.0
    };
    let (hill, notice) = match hill_estimate(&pooled, k_frac) {
        Ok(h) => (Some(h), None),
        Err(e) => (None, Some(format!("tail-index estimation declined: {e}"))),
    };
    let regime = hill.as_ref().map(|h| classify_regime(h.alpha.min(2.0)));
    let n = traj.horizon();
    Ok(TrajectoryEstimate {
        steps: n,
        runs: runs.len(),
        drift: if n == 0 {
            0.0
        } else {
            traj.position(n) as f64 / n as f64
        },
        truncation: level,
        m_hat,
        hill,
        regime,
        notice,
    })
}

impl TrajectoryEstimate {
    pub fn write(&self, out: &mut Report) {
        out.section("estimate")
            .int("steps", self.steps)
            .int("complete_runs", self.runs as u64)
            .real("drift", self.drift)
            .real("truncation", self.truncation)
            .real("m_hat", self.m_hat);
        match &self.hill {
            Some(h) => {
                out.real("alpha_hat", h.alpha)
                    .int("hill_k", h.k as u64)
                    .reals("alpha_ci", &[h.ci.0, h.ci.1]);
            }
            None => {
                out.text("alpha_hat", "undefined");
            }
        }
        match self.regime {
            Some(r) => out.text("regime", &r.to_string()),
            None => out.text("regime", "undefined"),
        };
        if let Some(n) = &self.notice {
            out.text("notice", n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    const GAUSSIAN: &str = r#"
name = "small"
regime = "gaussian"
u = 1000.0
replicas = 1000
times = [0.5, 1.0]
tolerance = 0.06

[comb.up]
kind = "constant"
p = 0.3

[comb.down]
kind = "constant"
p = 0.5
"#;

    #[test]
    fn parses_and_validates() {
        let s = VerificationScenario::parse(GAUSSIAN).unwrap();
        assert_eq!(s.horizon(), 1000);
        let bad = GAUSSIAN.replace("replicas = 1000", "replicas = 10");
        match VerificationScenario::parse(&bad) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "replicas"),
            other => panic!("{other:?}"),
        }
        let bad = GAUSSIAN.replace("p = 0.5", "p = 1.5");
        match VerificationScenario::parse(&bad) {
            Err(Error::Config { path, .. }) => assert!(path.starts_with("comb.down"), "{path}"),
            other => panic!("{other:?}"),
        }
        let bad = GAUSSIAN.replace("\"gaussian\"", "\"brownian\"");
        assert!(matches!(
            VerificationScenario::parse(&bad),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn small_gaussian_run_is_deterministic() {
        let s = VerificationScenario::parse(GAUSSIAN).unwrap();
        let a = verify_regime(&s, 5).unwrap();
        let b = verify_regime(&s, 5).unwrap();
        assert_eq!(a.report, b.report);
        assert!(a.passed(), "{}", a.report.as_str());
        assert_eq!(a.criteria.len(), 3);
    }

    #[test]
    fn regime_mismatch_is_rejected() {
        let s =
            VerificationScenario::parse(&GAUSSIAN.replace("\"gaussian\"", "\"cauchy\"")).unwrap();
        assert!(matches!(verify_regime(&s, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn wrong_reference_fails() {
        let text = format!("{GAUSSIAN}\n[reference]\nalpha = 1.2\n");
        let s = VerificationScenario::parse(&text).unwrap();
        let r = verify_regime(&s, 5).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn zigzag_drift_is_tiny() {
        // m_S is undefined for the zig-zag comb; its positions stay in {−1, 0}
        let comb = Comb::new(CombSpec::zigzag()).unwrap();
        let mut rng = stream(3, 0);
        let s = positions_at(&comb, &[10_001], &mut rng)[0];
        assert!((s as f64 / 10_001.0).abs() <= 1.0 / 10_001.0);
    }

    #[test]
    fn constant_comb_drift() {
        let comb = Comb::new(CombSpec::constant(0.2, 0.4)).unwrap();
        assert!(drift_l1(&comb, 100_000, 200, 4).unwrap() < 0.02);
        assert!(drift_l1(&comb, 10, 10, 4).is_err());
    }

    #[test]
    fn estimates_from_trajectories() {
        let comb = Comb::new(CombSpec::constant(0.2, 0.4)).unwrap();
        let traj = simulate_prw(&comb, 1_000_000, &mut stream(6, 0));
        let e = estimate_trajectory(&traj, 0.05).unwrap();
        assert!((e.m_hat - 1.0 / 3.0).abs() < 0.02, "{e:?}");

        let zig = simulate_prw(
            &Comb::new(CombSpec::zigzag()).unwrap(),
            10_000,
            &mut stream(6, 1),
        );
        let e = estimate_trajectory(&zig, 0.05).unwrap();
        assert!(e.m_hat.abs() < 1e-12);
        assert!(e.hill.is_none() && e.notice.is_some());

        // complete runs must fit in the horizon, which biases the top order
        // statistics on short trajectories
        let heavy = simulate_prw(
            &Comb::new(CombSpec::power(0.5, 1.0, 1.0)).unwrap(),
            10_000_000_000,
            &mut stream(6, 2),
        );
        let e = estimate_trajectory(&heavy, 0.05).unwrap();
        let h = e.hill.unwrap();
        assert!((h.alpha - 0.5).abs() < 0.07, "{h:?}");
        assert_eq!(e.regime, Some(Regime::Anomalous));
    }
}
