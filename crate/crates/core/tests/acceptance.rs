//! Acceptance suite. Every test prints one PASS/FAIL line straight to stdout
//! (bypassing the harness capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use prwlab::lamperti::{
    covering_path, double_gf_limit, lamperti_recursion, markov_kernel_check, sample_ratio,
    DensityEvaluator,
};
use prwlab::rng::{replicate, stream};
use prwlab::scaling::NormalizerSet;
use prwlab::stable::{sample_positive_stable, StableParams};
use prwlab::stats::{empirical_char_fn, ks_distance, ks_two_sample};
use prwlab::verify::{verify_regime, ReferenceOverride, VerificationReport, VerificationScenario};
use prwlab::{simulate_prw, Comb, CombSpec};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const ZETA_3_2: f64 = 2.612_375_348_685_488;

fn line(id: &str, title: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id:>3} {verdict} {title}: {detail} ({:.1} s)",
        started.elapsed().as_secs_f64()
    );
}

fn scenario(
    name: &str,
    regime: &str,
    comb: CombSpec,
    u: f64,
    replicas: usize,
    times: &[f64],
    tol: f64,
) -> VerificationScenario {
    VerificationScenario {
        name: name.into(),
        regime: regime.into(),
        u,
        replicas,
        times: times.to_vec(),
        tolerance: tol,
        seed: None,
        horizon: None,
        reference: ReferenceOverride::default(),
        lipschitz_paths: 20,
        comb,
    }
}

fn summary(r: &VerificationReport) -> String {
    r.criteria
        .iter()
        .map(|c| format!("{}={:.4}", c.key, c.value))
        .collect::<Vec<_>>()
        .join(" ")
}

// Tanh-sinh rule on [0, 1]; handles bounded integrands with algebraic
// endpoint behaviour.
fn tanh_sinh(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    let mut acc = 0.0;
    let n = (4.5 / h) as i64;
    for k in -n..=n {
        let s = k as f64 * h;
        let e = (PI * s.sinh()).exp();
        // v = 1/(1 + e^{-π sinh s}), dv/ds = (π/2) cosh s / cosh²(π/2 sinh s)
        let v = e / (1.0 + e);
        let c = (0.5 * PI * s.sinh()).cosh();
        let w = 0.5 * PI * s.cosh() / (2.0 * c * c);
        if v > 0.0 && v < 1.0 && w > 0.0 {
            acc += w * g(v);
        }
    }
    acc * h
}

// ∫_{-1}^{1} φ(x) f_1(x) dx with 1 − x = v^{1/α} on the right half and
// 1 + x = v^{1/α} on the left, which bounds the integrand at ±1. Nodes are
// moved to an exactly representable distance δ from the endpoint; below
// δ = 2^-50 the integrand is extrapolated linearly in v.
fn moment(f: &DensityEvaluator, phi: impl Fn(f64) -> f64, h: f64) -> f64 {
    let a = f.alpha();
    let floor = 2f64.powi(-50);
    let phi = &phi;
    let half = |side: f64| {
        let at = move |delta: f64| {
            let x = side * (1.0 - delta);
            let v = delta.powf(a);
            (
                v,
                phi(x) * f.density(1.0, x).unwrap() * v.powf(1.0 / a - 1.0) / a,
            )
        };
        let (v1, g1) = at(floor);
        let (v2, g2) = at(4.0 * floor);
        move |v: f64| {
            let x = side * (1.0 - v.powf(1.0 / a));
            if x * side < 0.0 {
                return 0.0;
            }
            let delta = 1.0 - side * x;
            if delta < floor {
                g1 + (v - v1) * (g2 - g1) / (v2 - v1)
            } else {
                at(delta).1
            }
        }
    };
    tanh_sinh(half(1.0), h) + tanh_sinh(half(-1.0), h)
}

#[test]
fn criterion_01_arcsine_reduction() {
    let t0 = Instant::now();
    let f = DensityEvaluator::new(0.5, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..1001 {
        let x = -1.0 + (i as f64 + 0.5) * 2.0 / 1001.0;
        let want = 1.0 / (PI * (1.0 - x * x).sqrt());
        worst = worst.max((f.density(1.0, x).unwrap() - want).abs() / want);
    }
    let pass = worst < 1e-12;
    line(
        "1",
        "arcsine reduction",
        pass,
        &format!("max rel err {worst:.2e}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_02_normalization_and_mean() {
    let t0 = Instant::now();
    let (mut worst_mass, mut worst_mean): (f64, f64) = (0.0, 0.0);
    for alpha in [0.3, 0.5, 0.7] {
        for m in [-0.5, 0.0, 0.5] {
            let f = DensityEvaluator::new(alpha, m).unwrap();
            let mass = moment(&f, |_| 1.0, 1.0 / 64.0);
            let mean = moment(&f, |x| x, 1.0 / 64.0);
            // the rule has converged: halving the step changes nothing visible
            let coarse = moment(&f, |_| 1.0, 1.0 / 32.0);
            assert!(
                (coarse - mass).abs() < 1e-10,
                "α={alpha} m={m}: {coarse} {mass}"
            );
            worst_mass = worst_mass.max((mass - 1.0).abs());
            worst_mean = worst_mean.max((mean - m).abs());
        }
    }
    let pass = worst_mass < 1e-8 && worst_mean < 1e-6;
    line(
        "2",
        "density normalization and mean",
        pass,
        &format!("max |mass-1| {worst_mass:.2e}, max |mean-m| {worst_mean:.2e}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_03_anomalous_marginal() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    // b_S = (c_u^a − c_d^a)/(c_u^a + c_d^a): 0 and 0.4 at a = 1/2
    for (b, c_up) in [(0.0, 1.0), (0.4, 49.0 / 9.0)] {
        let s = scenario(
            "anomalous",
            "anomalous",
            CombSpec::power(0.5, c_up, 1.0),
            1e5,
            10_000,
            &[1.0],
            0.03,
        );
        let r = verify_regime(&s, 301).unwrap();
        pass &= r.passed();
        detail.push(format!("b={b}: {}", summary(&r)));
    }
    line(
        "3",
        "anomalous marginal at t=1",
        pass,
        &detail.join("; "),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_04_ratio_triangulation() {
    let t0 = Instant::now();
    let f = DensityEvaluator::new(0.5, 0.4).unwrap();
    let xs = replicate(401, 100_000, |_, rng| sample_ratio(0.5, 0.4, rng));
    let ks = ks_distance(&xs, |x| f.cdf(1.0, x)).unwrap();
    let pass = ks < 0.01;
    line(
        "4",
        "ratio sampler vs density cdf",
        pass,
        &format!("ks={ks:.4}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_05_gaussian() {
    let t0 = Instant::now();
    let s = scenario(
        "gaussian",
        "gaussian",
        CombSpec::constant(0.3, 0.5),
        1e4,
        10_000,
        &[0.5, 1.0],
        0.02,
    );
    let r = verify_regime(&s, 0).unwrap();
    // unit-time reference is N(0, 1)
    assert!(r.report.as_str().contains("law = \"normal\""));
    let pass = r
        .criteria
        .iter()
        .filter(|c| c.key.starts_with("ks_t"))
        .all(|c| c.pass);
    line("5", "gaussian regime", pass, &summary(&r), t0);
    assert!(pass);
}

#[test]
fn criterion_06_generic_stable() {
    let t0 = Instant::now();
    // σ^α = Γ(3−α)/α · sin(π(α−1)/2)/(α−1) with Γ(3/2) = √π/2
    let sigma_a = (SQRT_PI / 2.0) / 1.5 * (PI / 4.0).sin() / 0.5;
    let reference = StableParams::new(1.5, 0.0).unwrap();
    assert!((reference.sigma().powf(1.5) - sigma_a).abs() < 1e-12);
    let s = scenario(
        "generic",
        "generic-stable",
        CombSpec::power(1.5, 1.0, 1.0),
        1e5,
        10_000,
        &[0.5, 1.0],
        0.03,
    );
    let r = verify_regime(&s, 601).unwrap();
    let pass = r.passed();
    line("6", "generic stable regime, a=1.5", pass, &summary(&r), t0);
    assert!(pass);
}

#[test]
fn criterion_07_cauchy() {
    let t0 = Instant::now();
    // a = 1 with run-length constant c = 0.02: the rescaled walk is bounded by
    // pre(u)·t, and a small c keeps that support far out at u = 1e5
    let s = scenario(
        "cauchy",
        "cauchy",
        CombSpec::power(1.0, 0.02, 0.02),
        1e5,
        10_000,
        &[0.5, 1.0],
        0.03,
    );
    let r = verify_regime(&s, 701).unwrap();
    let report = r.report.as_str();
    assert!(report.contains("law = \"cauchy\""));
    let sigma = StableParams::new(1.0, 0.0).unwrap().sigma();
    assert!((sigma - PI / 2.0).abs() < 1e-12);
    let pass = r.passed();
    line("7", "cauchy regime, a=1", pass, &summary(&r), t0);
    assert!(pass);
}

// α_k = 1 − ((c+k−1)/(c+k))^a, or a constant p.
#[derive(Clone, Copy)]
enum Hazard {
    Constant(f64),
    Power(f64, f64),
}

impl Hazard {
    fn at(self, k: u64) -> f64 {
        match self {
            Hazard::Constant(p) => p,
            Hazard::Power(a, c) => 1.0 - ((c + k as f64 - 1.0) / (c + k as f64)).powf(a),
        }
    }

    fn spec(self) -> prwlab::HazardFamily {
        match self {
            Hazard::Constant(p) => prwlab::HazardFamily::Constant { p },
            Hazard::Power(a, c) => prwlab::HazardFamily::Power { a, c },
        }
    }
}

// Exhaustive sum over letter strings X_1..X_{n+1} with X_1 = d.
fn enumerate(up: Hazard, down: Hazard, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for bits in 0u32..(1 << n) {
        let (mut prob, mut age, mut cur_up, mut ups) = (1.0, 1u64, false, 0usize);
        for i in 0..n {
            let next_up = bits >> i & 1 == 1;
            let h = if cur_up { up.at(age) } else { down.at(age) };
            if next_up == cur_up {
                prob *= 1.0 - h;
                age += 1;
            } else {
                prob *= h;
                age = 1;
            }
            cur_up = next_up;
            ups += usize::from(next_up);
        }
        out[ups] += prob;
    }
    out
}

#[test]
fn criterion_08_occupation_recursion() {
    let t0 = Instant::now();
    let cases = [
        (Hazard::Constant(0.3), Hazard::Constant(0.6)),
        (Hazard::Power(0.5, 49.0 / 9.0), Hazard::Power(0.5, 1.0)),
        (Hazard::Power(1.5, 2.0), Hazard::Power(0.7, 1.0)),
    ];
    let mut worst: f64 = 0.0;
    for (up, down) in cases {
        let comb = Comb::new(CombSpec {
            up: up.spec(),
            down: down.spec(),
        })
        .unwrap();
        let table = lamperti_recursion(&comb, 16).unwrap();
        for n in 0..=16 {
            for (k, want) in enumerate(up, down, n).into_iter().enumerate() {
                worst = worst.max((table.p(n, k) - want).abs() / want.max(1e-300));
            }
        }
    }
    let exact = worst < 1e-12;

    // symmetric a = 1/2: the limit of N_n/n is the arcsine law (2/π) asin √v
    let comb = Comb::new(CombSpec::power(0.5, 1.0, 1.0)).unwrap();
    let table = lamperti_recursion(&comb, 2000).unwrap();
    let ks = table.ks_fraction(2000, |v| 2.0 / PI * v.clamp(0.0, 1.0).sqrt().asin());
    let pass = exact && ks < 0.05;
    line(
        "8",
        "occupation-time recursion",
        pass,
        &format!("max rel err vs enumeration {worst:.2e}, ks(n=2000)={ks:.4}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_09_generating_function_limit() {
    let t0 = Instant::now();
    let comb = Comb::new(CombSpec::power(0.5, 1.0, 1.0)).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for lambda in [0.5f64, 1.0, 2.0] {
        let target = ((1.0 + lambda).powf(-0.5) + 1.0) / ((1.0 + lambda).sqrt() + 1.0);
        let errs: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&x| {
                let g = double_gf_limit(&comb, x, lambda).unwrap();
                assert!((g.target - target).abs() < 1e-14);
                (g.value - target).abs()
            })
            .collect();
        pass &= errs.windows(2).all(|w| w[1] < w[0]) && errs[2] < 0.02;
        detail.push(format!(
            "λ={lambda}: {:.4} {:.4} {:.4}",
            errs[0], errs[1], errs[2]
        ));
    }
    line(
        "9",
        "generating-function limit",
        pass,
        &detail.join("; "),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_10_limit_process_invariants() {
    let t0 = Instant::now();
    let (alpha, b) = (0.5, 0.3);

    // 1-Lipschitz: limit-process paths on a fine grid, and rescaled walks
    let grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let moduli = replicate(1001, 200, |_, rng| {
        let p = covering_path(alpha, b, 1.0, 1.0, 1e-5, rng).unwrap();
        let vals: Vec<f64> = grid.iter().map(|&t| p.value(t).unwrap()).collect();
        vals.windows(2)
            .map(|w| (w[1] - w[0]).abs() * 2000.0)
            .fold(0.0, f64::max)
    });
    let comb = Comb::new(CombSpec::power(0.5, 1.0, 1.0)).unwrap();
    let walk_moduli = replicate(1002, 50, |_, rng| {
        simulate_prw(&comb, 100_000, rng)
            .rescale(1e5, 0.0, 1e5, &grid)
            .unwrap()
            .lipschitz_modulus()
    });
    let lip = moduli
        .iter()
        .chain(&walk_moduli)
        .copied()
        .fold(0.0, f64::max);
    let lip_ok = lip <= 1.0 + 1e-9;

    // index-1 self-similarity: 𝒮(2)/2 has the law of 𝒮(1)
    let at1 = replicate(1003, 20_000, |_, rng| {
        covering_path(alpha, b, 1.0, 1.0, 1e-4, rng)
            .unwrap()
            .value(1.0)
            .unwrap()
    });
    let at2 = replicate(1004, 20_000, |_, rng| {
        covering_path(alpha, b, 1.0, 2.0, 1e-4, rng)
            .unwrap()
            .value(2.0)
            .unwrap()
            / 2.0
    });
    let ks_self = ks_two_sample(&at1, &at2).unwrap();

    // truncation robustness: ε against ε/10
    let coarse = replicate(1005, 40_000, |_, rng| {
        covering_path(alpha, b, 1.0, 1.0, 1e-4, rng)
            .unwrap()
            .value(1.0)
            .unwrap()
    });
    let fine = replicate(1006, 40_000, |_, rng| {
        covering_path(alpha, b, 1.0, 1.0, 1e-5, rng)
            .unwrap()
            .value(1.0)
            .unwrap()
    });
    let ks_eps = ks_two_sample(&coarse, &fine).unwrap();

    // remaining time given the age
    let states = replicate(1007, 40_000, |_, rng| {
        covering_path(alpha, b, 1.0, 1.0, 1e-5, rng)
            .unwrap()
            .renewal_state(1.0)
            .unwrap()
    });
    let kernel = markov_kernel_check(alpha, &states, (0.05, 0.5)).unwrap();

    let pass = lip_ok && ks_self < 0.02 && ks_eps < 0.02 && kernel.ks < 0.05;
    line(
        "10",
        "limit-process invariants",
        pass,
        &format!(
            "lipschitz {lip:.6}, ks self-similar {ks_self:.4}, ks eps {ks_eps:.4}, ks kernel {:.4} ({} in bin)",
            kernel.ks, kernel.count
        ),
        t0,
    );
    assert!(pass);
}

// exp(−σ^α|u|^α(1 − iβ sgn(u) tan(πα/2))), σ^α from closed-form Γ values
fn stable_cf(alpha: f64, beta: f64, u: f64) -> Complex64 {
    let scale = match alpha {
        0.5 => (3.0 * SQRT_PI / 4.0) / 0.5 * (-PI / 4.0).sin() / -0.5,
        1.0 => PI / 2.0,
        1.5 => (SQRT_PI / 2.0) / 1.5 * (PI / 4.0).sin() / 0.5,
        2.0 => 0.5,
        _ => unreachable!(),
    };
    let skew = if alpha == 1.0 {
        0.0
    } else {
        beta * u.signum() * (PI * alpha / 2.0).tan()
    };
    (-scale * u.abs().powf(alpha) * Complex64::new(1.0, -skew)).exp()
}

#[test]
fn criterion_11_stable_samplers() {
    let t0 = Instant::now();
    let grid = [-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0];
    let mut worst_z: f64 = 0.0;
    for (i, (alpha, beta)) in [(0.5, 0.7), (1.0, 0.0), (1.5, -0.6), (2.0, 0.0)]
        .into_iter()
        .enumerate()
    {
        let p = StableParams::new(alpha, beta).unwrap();
        let xs = replicate(1100 + i as u64, 1_000_000, |_, rng| p.sample(rng));
        for e in empirical_char_fn(&xs, &grid).unwrap() {
            let se = e.std_err.max(1e-6);
            worst_z = worst_z.max((e.value - stable_cf(alpha, beta, e.u)).norm() / se);
        }
    }
    // positive stable: E exp(−λX) = exp(−λ^α)
    let mut worst_lt: f64 = 0.0;
    for (i, alpha) in [0.3, 0.5, 0.7].into_iter().enumerate() {
        let mut rng = stream(1110 + i as u64, 0);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_positive_stable(alpha, &mut rng))
            .collect();
        for lambda in [0.5f64, 1.0, 2.0] {
            let mc = xs.iter().map(|x| (-lambda * x).exp()).sum::<f64>() / xs.len() as f64;
            worst_lt = worst_lt.max((mc - (-lambda.powf(alpha)).exp()).abs());
        }
    }
    let pass = worst_z < 3.0 && worst_lt < 0.005;
    line(
        "11",
        "stable samplers",
        pass,
        &format!("max ecf deviation {worst_z:.2} SE, max Laplace error {worst_lt:.5}"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_12_normalizer_asymptotics() {
    let t0 = Instant::now();
    let u = 1e7;
    let (alpha, stated) = (0.5, 1.5);
    let comb = Comb::new(CombSpec::power(alpha, 1.0, 1.0)).unwrap();
    let ratio = NormalizerSet::new(&comb, 0.0).unwrap().lambda(u).unwrap() / u;
    let a_ok = (ratio / stated - 1.0).abs() < 0.05;

    // d_T = 2 Σ_{n≥0} (1/(1+n))^{3/2} = 2ζ(3/2)
    let comb = Comb::new(CombSpec::power(1.5, 1.0, 1.0)).unwrap();
    let s_ratio = NormalizerSet::new(&comb, 0.0).unwrap().s(u).unwrap() * 2.0 * ZETA_3_2 / u;
    let b_ok = (s_ratio - 1.0).abs() < 0.01;

    let pass = a_ok && b_ok;
    line(
        "12",
        "normalizer asymptotics",
        pass,
        &format!(
            "lambda(u)/u = {ratio:.5} vs stated {stated} [{}]; s(u) d_T/u = {s_ratio:.5} [{}]",
            if a_ok { "ok" } else { "off" },
            if b_ok { "ok" } else { "off" }
        ),
        t0,
    );
    assert!(a_ok, "lambda(u)/u = {ratio} is not within 5% of {stated}");
    assert!(b_ok, "s(u) d_T/u = {s_ratio}");
}

#[test]
fn criterion_13_thread_count_determinism() {
    let t0 = Instant::now();
    let scenarios = [
        scenario(
            "det-gauss",
            "gaussian",
            CombSpec::constant(0.3, 0.5),
            1e3,
            2_000,
            &[0.5, 1.0],
            0.05,
        ),
        scenario(
            "det-anomalous",
            "anomalous",
            CombSpec::power(0.5, 2.0, 1.0),
            1e4,
            1_000,
            &[0.5, 1.0],
            0.06,
        ),
        scenario(
            "det-generic",
            "generic-stable",
            CombSpec::power(1.5, 2.0, 1.0),
            1e4,
            1_000,
            &[0.5, 1.0],
            0.06,
        ),
    ];
    let run = |threads: usize| -> Vec<String> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                scenarios
                    .iter()
                    .map(|s| verify_regime(s, 1301).unwrap().report.as_str().to_owned())
                    .collect()
            })
    };
    let one = run(1);
    let four = run(4);
    let again = run(4);
    let pass = one == four && four == again;
    line(
        "13",
        "byte-identical reports across thread counts",
        pass,
        &format!("{} scenarios", one.len()),
        t0,
    );
    assert!(pass);
}
