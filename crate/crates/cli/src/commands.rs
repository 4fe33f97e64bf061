use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use prwlab::comb::load_comb;
use prwlab::lamperti::{covering_path, flt_f, lamperti_recursion, sample_ratio, DensityEvaluator};
use prwlab::report::{fmt_real, Report};
use prwlab::rng::{replicate, stream};
use prwlab::stable::{sample_positive_stable, StableParams};
use prwlab::stats::empirical_char_fn;
use prwlab::verify::{estimate_trajectory, verify_regime, VerificationScenario};
use prwlab::walk::simulate_grafted;
use prwlab::{simulate_prw, Comb, CombSpec, Trajectory};

use crate::bundled;
use crate::{
    DensityArgs, EstimateArgs, Failure, LimitLaw, SampleLimitArgs, SimulateArgs, VerifyArgs,
};

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check_input(path: &Path) -> Result<(), Failure> {
    if !path.is_file() {
        return Err(usage(format!(
            "input file {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        return Err(usage(format!("output {} is a directory", path.display())));
    }
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(usage(format!("directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn check_outputs<'a>(paths: impl IntoIterator<Item = &'a Option<PathBuf>>) -> Result<(), Failure> {
    paths
        .into_iter()
        .flatten()
        .try_for_each(|p| check_output(p))
}

/// File sink, or stdout when no path is given.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_report(report: &Report, path: Option<&Path>) -> Result<(), Failure> {
    let mut out = sink(path)?;
    out.write_all(report.as_str().as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Result<(), Failure> {
    check_input(&a.comb)?;
    check_outputs([&a.out, &a.runs_out, &a.report])?;
    let (spec, graft) = load_comb(&a.comb)?;
    let comb = Comb::new(spec)?;
    let mut rng = stream(seed, 0);
    let traj = match &graft {
        Some(g) if !g.entries.is_empty() => simulate_grafted(&comb, g, a.horizon, &mut rng)?,
        _ => simulate_prw(&comb, a.horizon, &mut rng),
    };

    if let Some(p) = &a.out {
        let mut w = sink(Some(p))?;
        writeln!(w, "# seed = {seed}")?;
        traj.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &a.runs_out {
        let mut w = sink(Some(p))?;
        writeln!(w, "# seed = {seed}")?;
        traj.write_runs_csv(&mut w)?;
        w.flush()?;
    }

    let n = traj.horizon();
    let s_n = traj.position(n);
    let mut report = Report::new();
    report
        .section("simulate")
        .text("comb", &a.comb.display().to_string())
        .int("seed", seed)
        .int("n", n)
        .int("S_n", s_n)
        .int("runs", traj.runs().len() as u64)
        .real("drift", if n == 0 { 0.0 } else { s_n as f64 / n as f64 });
    emit_report(&report, a.report.as_deref())
}

fn density_grid(a: &DensityArgs) -> Result<Vec<f64>, Failure> {
    match &a.x {
        Some(xs) if xs.is_empty() => Err(usage("--x needs at least one value")),
        Some(xs) => Ok(xs.clone()),
        None if a.points == 0 => Err(usage("--points must be at least 1")),
        None => {
            let n = a.points as f64;
            Ok((1..=a.points)
                .map(|i| a.t * (-1.0 + 2.0 * i as f64 / (n + 1.0)))
                .collect())
        }
    }
}

pub fn density(a: &DensityArgs) -> Result<(), Failure> {
    if !(a.t > 0.0 && a.t.is_finite()) {
        return Err(usage(format!("--t must be positive, got {}", a.t)));
    }
    check_outputs([&a.out])?;
    let f = DensityEvaluator::new(a.alpha, a.m)
        .map_err(|e| usage(format!("{e} (usage: --alpha in (0,1), --m in (-1,1))")))?;
    let grid = density_grid(a)?;
    let mut out = sink(a.out.as_deref())?;
    writeln!(out, "# alpha = {}, m = {}, t = {}", a.alpha, a.m, a.t)?;
    writeln!(out, "x,f,F")?;
    for x in grid {
        if !x.is_finite() {
            return Err(usage(format!("abscissa {x} is not finite")));
        }
        // the density is infinite at ±t and zero beyond
        let dens = if x.abs() < a.t {
            f.density(a.t, x)?
        } else if x.abs() == a.t {
            f64::INFINITY
        } else {
            0.0
        };
        writeln!(
            out,
            "{},{},{}",
            fmt_real(x),
            fmt_real(dens),
            fmt_real(f.cdf(a.t, x))
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn sample_limit(a: &SampleLimitArgs, seed: u64) -> Result<(), Failure> {
    check_outputs([&a.out])?;
    if !(a.t > 0.0 && a.t.is_finite()) {
        return Err(usage(format!("--t must be positive, got {}", a.t)));
    }
    if !(-1.0..=1.0).contains(&a.b) {
        return Err(usage(format!("--b must lie in [-1, 1], got {}", a.b)));
    }
    if !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(usage(format!("--eps must lie in (0, 1), got {}", a.eps)));
    }
    let needs_subordinator = matches!(
        a.law,
        LimitLaw::Anomalous | LimitLaw::Ratio | LimitLaw::Path
    );
    if needs_subordinator && !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!(
            "--alpha must lie in (0, 1) for this law, got {}",
            a.alpha
        )));
    }
    if a.law == LimitLaw::Path {
        if a.points < 2 {
            return Err(usage("--points must be at least 2"));
        }
        let mut rng = stream(seed, 0);
        let path = covering_path(a.alpha, a.b, 1.0, a.t, a.eps, &mut rng)?;
        let grid: Vec<f64> = (0..a.points)
            .map(|i| a.t * i as f64 / (a.points - 1) as f64)
            .collect();
        let mut out = sink(a.out.as_deref())?;
        writeln!(
            out,
            "# seed = {seed}, law = path, alpha = {}, b = {}",
            a.alpha, a.b
        )?;
        path.write_csv(&grid, &mut out)?;
        out.flush()?;
        return Ok(());
    }

    let draws: Vec<f64> = match a.law {
        LimitLaw::Anomalous => replicate(seed, a.count, |_, rng| {
            covering_path(a.alpha, a.b, 1.0, a.t, a.eps, rng).and_then(|p| p.value(a.t))
        })
        .into_iter()
        .collect::<prwlab::Result<_>>()?,
        LimitLaw::Ratio => replicate(seed, a.count, |_, rng| sample_ratio(a.alpha, a.b, rng)),
        LimitLaw::Stable => {
            let p = StableParams::new(a.alpha, a.beta)?.at_time(a.t);
            replicate(seed, a.count, |_, rng| p.sample(rng))
        }
        LimitLaw::Path => unreachable!(),
    };
    let mut out = sink(a.out.as_deref())?;
    let law = match a.law {
        LimitLaw::Anomalous => format!("anomalous, alpha = {}, b = {}, t = {}", a.alpha, a.b, a.t),
        LimitLaw::Ratio => format!("ratio, alpha = {}, b = {}", a.alpha, a.b),
        _ => format!(
            "stable, alpha = {}, beta = {}, t = {}",
            a.alpha, a.beta, a.t
        ),
    };
    writeln!(out, "# seed = {seed}, law = {law}")?;
    writeln!(out, "index,value")?;
    for (i, v) in draws.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, fmt_real(*v))?;
    }
    out.flush()?;
    Ok(())
}

fn load_scenario(name: &str) -> Result<VerificationScenario, Failure> {
    let path = Path::new(name);
    if path.is_file() {
        return Ok(VerificationScenario::load(path)?);
    }
    match bundled::lookup(name) {
        Some(text) => Ok(VerificationScenario::parse(text)?),
        None => Err(usage(format!(
            "`{name}` is neither a file nor a bundled scenario (see `prwlab verify --list`)"
        ))),
    }
}

pub fn verify(
    a: &VerifyArgs,
    seed: Option<u64>,
    env_seed: impl Fn() -> Result<u64, Failure>,
) -> Result<(), Failure> {
    if a.list {
        for (name, _) in bundled::SCENARIOS {
            println!("{name}");
        }
        return Ok(());
    }
    let name = a
        .scenario
        .as_deref()
        .expect("clap requires a scenario without --list");
    check_outputs([&a.report])?;
    let scenario = load_scenario(name)?;
    let seed = match (seed, scenario.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?,
    };
    let started = Instant::now();
    let result = verify_regime(&scenario, seed)?;
    emit_report(&result.report, a.report.as_deref())?;
    for c in &result.criteria {
        eprintln!(
            "{} {} = {:.4} (tolerance {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.key,
            c.value,
            c.tolerance
        );
    }
    eprintln!(
        "{}: seed {seed}, {:.1} s",
        result.name,
        started.elapsed().as_secs_f64()
    );
    if result.passed() {
        Ok(())
    } else {
        Err(Failure::Criteria)
    }
}

pub fn estimate(a: &EstimateArgs, seed: u64) -> Result<(), Failure> {
    check_input(&a.input)?;
    check_outputs([&a.report])?;
    let text = std::fs::read_to_string(&a.input)?;
    let traj = Trajectory::read_any_csv(&text)?;
    let est = estimate_trajectory(&traj, a.k_frac)?;
    let mut report = Report::new();
    report
        .section("input")
        .text("file", &a.input.display().to_string())
        .int("seed", seed);
    est.write(&mut report);
    if a.bootstrap > 0 && est.hill.is_some() {
        let lengths: Vec<f64> = traj
            .complete_runs()
            .iter()
            .map(|r| r.length as f64)
            .collect();
        let h = prwlab::stats::hill_estimate_with_bootstrap(&lengths, a.k_frac, a.bootstrap, seed)?;
        if let Some((lo, hi)) = h.bootstrap_ci {
            report
                .section("bootstrap")
                .int("resamples", a.bootstrap as u64)
                .reals("alpha_ci", &[lo, hi]);
        }
    }
    emit_report(&report, a.report.as_deref())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

// Every check has a closed-form or exact reference.
fn checks(seed: u64) -> Result<Vec<Check>, Failure> {
    let mut out = Vec::new();

    let f = DensityEvaluator::new(0.5, 0.0)?;
    let worst = (1..100)
        .map(|i| {
            let x = -1.0 + i as f64 / 50.0;
            let want = 1.0 / (PI * (1.0 - x * x).sqrt());
            (f.density(1.0, x).unwrap() - want).abs() / want
        })
        .fold(0.0, f64::max);
    out.push(Check {
        name: "arcsine density",
        pass: worst < 1e-12,
        detail: format!("max rel err {worst:.1e}"),
    });

    let mass = (flt_f(0.6, 0.3, 2.0, 0.0)? * 2.0 - 1.0).norm();
    out.push(Check {
        name: "transform total mass",
        pass: mass < 1e-12,
        detail: format!("|s F(s, 0) - 1| = {mass:.1e}"),
    });

    let comb = Comb::new(CombSpec::power(0.5, 1.0, 1.0))?;
    let table = lamperti_recursion(&comb, 400)?;
    let mass = (0..=400)
        .map(|n| (table.row(n).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let ks = table.ks_fraction(400, |v| 2.0 / PI * v.clamp(0.0, 1.0).sqrt().asin());
    out.push(Check {
        name: "occupation recursion",
        pass: mass < 1e-12 && ks < 0.08,
        detail: format!("max |row mass - 1| {mass:.1e}, ks vs arcsine {ks:.4}"),
    });

    let p = StableParams::new(1.5, 0.5)?;
    let xs = replicate(seed, 100_000, |_, rng| p.sample(rng));
    let scale = (PI.sqrt() / 2.0) / 1.5 * (PI / 4.0).sin() / 0.5;
    let mut z: f64 = 0.0;
    for e in empirical_char_fn(&xs, &[-1.0, -0.5, 0.5, 1.0])? {
        // exp(−A(1 − iβ sgn(u) tan(3π/4))) with A = σ^α|u|^α
        let amp = scale * e.u.abs().powf(1.5);
        let phase = amp * 0.5 * e.u.signum() * (0.75 * PI).tan();
        let (re, im) = ((-amp).exp() * phase.cos(), (-amp).exp() * phase.sin());
        z = z.max((e.value.re - re).hypot(e.value.im - im) / e.std_err);
    }
    out.push(Check {
        name: "stable sampler",
        pass: z < 4.0,
        detail: format!("max ecf deviation {z:.2} SE"),
    });

    let mut rng = stream(seed, 1);
    let ys: Vec<f64> = (0..100_000)
        .map(|_| sample_positive_stable(0.5, &mut rng))
        .collect();
    let lt = ys.iter().map(|y| (-y).exp()).sum::<f64>() / ys.len() as f64;
    let err = (lt - (-1f64).exp()).abs();
    out.push(Check {
        name: "positive stable sampler",
        pass: err < 0.01,
        detail: format!("|E exp(-X) - exp(-1)| = {err:.4}"),
    });

    let smoke = VerificationScenario::parse(
        r#"
name = "selftest"
regime = "gaussian"
u = 10000.0
replicas = 4000
times = [0.5, 1.0]
tolerance = 0.05

[comb.up]
kind = "constant"
p = 0.3

[comb.down]
kind = "constant"
p = 0.5
"#,
    )?;
    let r = verify_regime(&smoke, seed)?;
    let worst = r.criteria.iter().map(|c| c.value).fold(0.0, f64::max);
    out.push(Check {
        name: "gaussian walk",
        pass: r.passed(),
        detail: format!("max ks {worst:.4}"),
    });
    Ok(out)
}

pub fn selftest(seed: u64) -> Result<(), Failure> {
    let all = checks(seed)?;
    for c in &all {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("seed = {seed}");
    if all.iter().all(|c| c.pass) {
        Ok(())
    } else {
        Err(Failure::Criteria)
    }
}
