//! Trajectories of the persistent random walk.
//!
//! The walk starts right after an up-to-down turn, so its first run goes
//! down. Runs are drawn whole from the persistence laws; a per-step
//! Bernoulli mode is kept for cross-checks.

use std::io::{Read, Write};

use rand::Rng;

use crate::comb::{Comb, Direction, GraftLeaf, GraftSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub direction: Direction,
    pub length: u64,
}

/// A finite walk path stored as its list of runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    runs: Vec<Run>,
    // ends[i] = time at which run i ends; starts of run i is ends[i-1]
    ends: Vec<u64>,
    // positions at run ends
    levels: Vec<i64>,
    horizon: u64,
    last_clipped: bool,
}

/// The walk observed at the end of every complete down-up cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    /// `M_0 = 0, M_1, …`
    pub m: Vec<i64>,
    /// `T_0 = 0, T_1, …`
    pub t: Vec<u64>,
}

impl Skeleton {
    /// `Y_k = τ_k^u − τ_k^d` for `k ≥ 1`.
    pub fn increments(&self) -> Vec<i64> {
        self.m.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

impl Trajectory {
    /// Builds a trajectory from runs; the last run may be marked as clipped.
    pub fn from_runs(runs: Vec<Run>, last_clipped: bool) -> Result<Self> {
        let mut ends = Vec::with_capacity(runs.len());
        let mut levels = Vec::with_capacity(runs.len());
        let (mut t, mut s) = (0u64, 0i64);
        for (i, r) in runs.iter().enumerate() {
            if r.length == 0 {
                return Err(Error::InvalidParameter(format!("run {i} has zero length")));
            }
            if i > 0 && runs[i - 1].direction == r.direction {
                return Err(Error::InvalidParameter(format!(
                    "runs {} and {i} do not alternate",
                    i - 1
                )));
            }
            t += r.length;
            s += r.direction.sign() * r.length as i64;
            ends.push(t);
            levels.push(s);
        }
        Ok(Trajectory {
            runs,
            ends,
            levels,
            horizon: t,
            last_clipped,
        })
    }

    /// Rebuilds runs from a ±1 increment sequence.
    pub fn from_increments(xs: &[i8]) -> Result<Self> {
        let mut runs: Vec<Run> = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            let dir = match x {
                1 => Direction::Up,
                -1 => Direction::Down,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "increment {} is {x}, not ±1",
                        i + 1
                    )))
                }
            };
            match runs.last_mut() {
                Some(r) if r.direction == dir => r.length += 1,
                _ => runs.push(Run {
                    direction: dir,
                    length: 1,
                }),
            }
        }
        // The final run may continue past the recorded data.
        Trajectory::from_runs(runs, true)
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Whether the last run was cut short by the horizon.
    pub fn last_clipped(&self) -> bool {
        self.last_clipped
    }

    /// Runs whose full length was observed.
    pub fn complete_runs(&self) -> &[Run] {
        if self.last_clipped {
            &self.runs[..self.runs.len().saturating_sub(1)]
        } else {
            &self.runs
        }
    }

    // Index of the run containing step n (1-based step, n ≥ 1).
    fn run_of_step(&self, n: u64) -> usize {
        self.ends.partition_point(|&e| e < n)
    }

    /// `S_n` for `0 ≤ n ≤ horizon`.
    pub fn position(&self, n: u64) -> i64 {
        assert!(
            n <= self.horizon,
            "time {n} beyond horizon {}",
            self.horizon
        );
        if n == 0 {
            return 0;
        }
        let i = self.run_of_step(n);
        let (start, base) = if i == 0 {
            (0, 0)
        } else {
            (self.ends[i - 1], self.levels[i - 1])
        };
        base + self.runs[i].direction.sign() * (n - start) as i64
    }

    /// `S` linearly interpolated at real time `t ∈ [0, horizon]`.
    pub fn position_at(&self, t: f64) -> f64 {
        let n = t.floor() as u64;
        if n >= self.horizon {
            return self.position(self.horizon) as f64;
        }
        let frac = t - n as f64;
        let a = self.position(n) as f64;
        a + frac * (self.increment(n + 1) as f64)
    }

    /// `X_n = S_n − S_{n−1}` for `1 ≤ n ≤ horizon`.
    pub fn increment(&self, n: u64) -> i64 {
        assert!(n >= 1 && n <= self.horizon);
        self.runs[self.run_of_step(n)].direction.sign()
    }

    /// Age `A_n`: steps taken since the last direction change, `n ≥ 1`.
    pub fn age(&self, n: u64) -> Result<u64> {
        if n == 0 || n > self.horizon {
            return Err(Error::Domain(format!(
                "age needs 1 ≤ n ≤ {}, got {n}",
                self.horizon
            )));
        }
        let i = self.run_of_step(n);
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        Ok(n - start)
    }

    pub fn skeleton(&self) -> Skeleton {
        let mut m = vec![0];
        let mut t = vec![0];
        let complete = self.complete_runs().len();
        // Runs alternate d, u, d, u, ...; a cycle closes at every up-run end.
        let mut i = 1;
        while i < complete {
            m.push(self.levels[i]);
            t.push(self.ends[i]);
            i += 2;
        }
        Skeleton { m, t }
    }

    /// `N(t) = max{n : T_n ≤ t}` for the skeleton times.
    pub fn counting(&self, t: f64) -> Result<u64> {
        if t > self.horizon as f64 {
            return Err(Error::Domain(format!(
                "t = {t} beyond horizon {}",
                self.horizon
            )));
        }
        let sk = self.skeleton();
        Ok((sk.t.partition_point(|&x| x as f64 <= t) - 1) as u64)
    }

    /// `(S_{ut} − m u t)/λ_u` on `time_grid`.
    pub fn rescale(
        &self,
        u: f64,
        m: f64,
        lambda_u: f64,
        time_grid: &[f64],
    ) -> Result<RescaledPath> {
        if !(lambda_u > 0.0) || !(u > 0.0) {
            return Err(Error::InvalidParameter(
                "u and λ(u) must be positive".into(),
            ));
        }
        let tmax = time_grid.iter().copied().fold(0.0, f64::max);
        if u * tmax > self.horizon as f64 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "grid reaches u·t = {} beyond horizon {}",
                u * tmax,
                self.horizon
            )));
        }
        if time_grid.iter().any(|&t| t < 0.0) {
            return Err(Error::Domain("negative grid time".into()));
        }
        let values = time_grid
            .iter()
            .map(|&t| {
                let ut = (u * t).min(self.horizon as f64);
                (self.position_at(ut) - m * u * t) / lambda_u
            })
            .collect();
        Ok(RescaledPath {
            u,
            lambda_u,
            m,
            time_grid: time_grid.to_vec(),
            values,
        })
    }

    /// Writes `n,S_n,X_n,A_n` for `n = 1..=horizon`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "S_n", "X_n", "A_n"])?;
        let (mut n, mut s) = (0u64, 0i64);
        for r in &self.runs {
            for age in 1..=r.length {
                n += 1;
                s += r.direction.sign();
                out.write_record([
                    n.to_string(),
                    s.to_string(),
                    r.direction.sign().to_string(),
                    age.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `index,direction,length`.
    pub fn write_runs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "direction", "length"])?;
        for (i, r) in self.runs.iter().enumerate() {
            out.write_record([
                (i + 1).to_string(),
                r.direction.to_string(),
                r.length.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the `index,direction,length` format; the last run counts as clipped.
    pub fn read_runs_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let headers = rdr.headers()?.clone();
        let want = ["index", "direction", "length"];
        if headers.len() != 3 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(Error::InvalidParameter(format!(
                "expected header index,direction,length, got {headers:?}"
            )));
        }
        let mut runs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::InvalidParameter(format!("row {}: {what}", i + 1));
            if rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad("index is not an integer"))?
                != i + 1
            {
                return Err(bad("indices must count up from 1"));
            }
            let mut letters = rec[1].trim().chars();
            let direction = match (
                letters.next().and_then(Direction::from_letter),
                letters.next(),
            ) {
                (Some(d), None) => d,
                _ => return Err(bad("direction must be u or d")),
            };
            let length = rec[2]
                .trim()
                .parse::<u64>()
                .map_err(|_| bad("length is not an integer"))?;
            runs.push(Run { direction, length });
        }
        let clipped = !runs.is_empty();
        Trajectory::from_runs(runs, clipped)
    }

    /// Reads either CSV format, chosen by the header row. Lines starting
    /// with `#` are comments.
    pub fn read_any_csv(text: &str) -> Result<Self> {
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
        if header.starts_with("index,") {
            Self::read_runs_csv(text.as_bytes())
        } else {
            Self::read_csv(text.as_bytes())
        }
    }

    /// Reads the `n,S_n,X_n,A_n` format back, checking its consistency.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let headers = rdr.headers()?.clone();
        let want = ["n", "S_n", "X_n", "A_n"];
        if headers.len() != 4 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(Error::InvalidParameter(format!(
                "expected header n,S_n,X_n,A_n, got {headers:?}"
            )));
        }
        let mut xs = Vec::new();
        let mut s = 0i64;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |j: usize| -> Result<i64> {
                rec[j].trim().parse::<i64>().map_err(|e| {
                    Error::InvalidParameter(format!("row {}: column {}: {e}", i + 1, want[j]))
                })
            };
            let (n, sn, x) = (field(0)?, field(1)?, field(2)?);
            if n != i as i64 + 1 {
                return Err(Error::InvalidParameter(format!(
                    "row {}: expected n = {}",
                    i + 1,
                    i + 1
                )));
            }
            if x != 1 && x != -1 {
                return Err(Error::InvalidParameter(format!(
                    "row {}: X_n must be ±1",
                    i + 1
                )));
            }
            s += x;
            if sn != s {
                return Err(Error::InvalidParameter(format!(
                    "row {}: S_n inconsistent with X",
                    i + 1
                )));
            }
            xs.push(x as i8);
        }
        Trajectory::from_increments(&xs)
    }
}

/// A rescaled, centred path sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledPath {
    pub u: f64,
    pub lambda_u: f64,
    pub m: f64,
    pub time_grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl RescaledPath {
    /// Largest difference quotient between consecutive grid points.
    pub fn lipschitz_modulus(&self) -> f64 {
        self.time_grid
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(t, _)| t[1] > t[0])
            .map(|(t, v)| (v[1] - v[0]).abs() / (t[1] - t[0]))
            .fold(0.0, f64::max)
    }

    /// The bound `u (1 + |m|) / λ(u)` that every rescaled path obeys.
    pub fn lipschitz_bound(&self) -> f64 {
        self.u * (1.0 + self.m.abs()) / self.lambda_u
    }
}

/// Draws runs until `horizon` steps are covered, clipping the last one.
pub fn simulate_prw<R: Rng + ?Sized>(comb: &Comb, horizon: u64, rng: &mut R) -> Trajectory {
    simulate_with(horizon, |dir, _, rng| comb.law(dir).sample(rng), rng)
}

/// Same law as [`simulate_prw`], switching by a Bernoulli trial at every step.
pub fn simulate_stepwise<R: Rng + ?Sized>(comb: &Comb, horizon: u64, rng: &mut R) -> Trajectory {
    simulate_with(
        horizon,
        |dir, remaining, rng| comb.law(dir).sample_stepwise(rng, remaining + 1),
        rng,
    )
}

fn simulate_with<R: Rng + ?Sized>(
    horizon: u64,
    mut draw: impl FnMut(Direction, u64, &mut R) -> u64,
    rng: &mut R,
) -> Trajectory {
    let mut runs = Vec::new();
    let mut t = 0u64;
    let mut dir = Direction::Down;
    let mut clipped = false;
    while t < horizon {
        let remaining = horizon - t;
        let len = draw(dir, remaining, rng);
        let len = if len > remaining {
            clipped = true;
            remaining
        } else {
            len
        };
        runs.push(Run {
            direction: dir,
            length: len,
        });
        t += len;
        dir = dir.flip();
    }
    Trajectory::from_runs(runs, clipped).expect("simulated runs alternate and are positive")
}

/// `S_n` at the sorted integer times, drawing exactly the runs that
/// [`simulate_prw`] would draw for horizon `max(times)`.
pub fn positions_at<R: Rng + ?Sized>(comb: &Comb, times: &[u64], rng: &mut R) -> Vec<i64> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let mut out = Vec::with_capacity(times.len());
    let Some(&horizon) = times.last() else {
        return out;
    };
    let (mut t, mut s) = (0u64, 0i64);
    let mut dir = Direction::Down;
    let mut next = 0;
    while next < times.len() && times[next] == 0 {
        out.push(0);
        next += 1;
    }
    while t < horizon {
        let len = comb.law(dir).sample(rng);
        let end = t.saturating_add(len);
        while next < times.len() && times[next] <= end {
            out.push(s + dir.sign() * (times[next] - t) as i64);
            next += 1;
        }
        s += dir.sign() * len.min(horizon - t) as i64;
        t = end;
        dir = dir.flip();
    }
    out
}

/// Per-step simulation of a comb carrying finite grafts.
///
/// At age `k` of a run in direction `ℓ` the switch probability is taken
/// from the longest graft leaf `ℓ^k ℓ̄ v` whose suffix `v` matches the past;
/// otherwise the comb hazard applies. Before time 0 the walk is only known
/// to have been going up.
pub fn simulate_grafted<R: Rng + ?Sized>(
    comb: &Comb,
    graft: &GraftSpec,
    horizon: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    let leaves = graft.leaves()?;
    let mut runs: Vec<Run> = Vec::new();
    let mut dir = Direction::Down;
    let mut age = 0u64;
    let mut clipped = false;
    for step in 0..horizon {
        age += 1;
        let q = switch_probability(comb, &leaves, &runs, dir, age);
        let switch = rng.random::<f64>() < q;
        if switch || step + 1 == horizon {
            clipped = !switch;
            runs.push(Run {
                direction: dir,
                length: age,
            });
            dir = dir.flip();
            age = 0;
        }
    }
    Trajectory::from_runs(runs, clipped)
}

fn switch_probability(
    comb: &Comb,
    leaves: &[GraftLeaf],
    past: &[Run],
    dir: Direction,
    age: u64,
) -> f64 {
    let mut best: Option<&GraftLeaf> = None;
    for leaf in leaves.iter().filter(|l| l.direction == dir && l.age == age) {
        if history_matches(past, &leaf.rest) && best.is_none_or(|b| leaf.rest.len() > b.rest.len())
        {
            best = Some(leaf);
        }
    }
    match best {
        Some(leaf) => leaf.switch,
        None => comb.law(dir).hazard(age),
    }
}

// Does the history before the current run, minus its most recent step,
// start with `rest` (most recent first)?
fn history_matches(past: &[Run], rest: &[Direction]) -> bool {
    let mut letters = past
        .iter()
        .rev()
        .flat_map(|r| std::iter::repeat_n(r.direction, r.length as usize))
        .skip(1)
        .chain(std::iter::once(Direction::Up))
        .skip(usize::from(past.is_empty()));
    rest.iter().all(|d| letters.next() == Some(*d))
}
