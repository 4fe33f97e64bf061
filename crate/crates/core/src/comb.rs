//! The double-infinite comb: hazard families, persistence-time laws and
//! finite grafts.
//!
//! A run in direction `ℓ` that has lasted `k` steps switches with
//! probability `α_k^ℓ`. The persistence time therefore has tail
//! `𝒯(n) = ∏_{k≤n} (1 − α_k)`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{check_positive, check_probability};
use crate::error::{Error, Result};
use crate::rng::open_unit;
use crate::special::{hurwitz_zeta, shifted_power_sum};

/// Longest explicit hazard table accepted.
pub const MAX_TABLE: usize = 1 << 20;
/// Prefix length below which moments are tabulated directly.
const PREFIX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "u")]
    Up,
    #[serde(rename = "d")]
    Down,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::Up => 'u',
            Direction::Down => 'd',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'u' => Some(Direction::Up),
            'd' => Some(Direction::Down),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// How a hazard table continues past its last explicit entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", try_from = "RawTail")]
pub enum TailRule {
    /// `α_k = p` beyond the table.
    Constant { p: f64 },
    /// Power hazard evaluated at the absolute index `k`.
    Power { a: f64, c: f64 },
}

/// Hazard sequence `k ↦ α_k` for one direction.
///
/// `Power { a, c }` is the hazard with exact tail `𝒯(n) = (c / (c + n))^a`,
/// i.e. `α_k = 1 − ((c + k − 1)/(c + k))^a ≈ a/k`. Its tail index is `a`
/// and its tail constant is `c^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawFamily")]
pub enum HazardFamily {
    Constant { p: f64 },
    Power { a: f64, c: f64 },
    Table { values: Vec<f64>, tail: TailRule },
}

// Flat mirrors of the tagged enums. Deserializing through them keeps field
// level key paths in type errors, which internally tagged enums lose.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum FamilyKind {
    Constant,
    Power,
    Table,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    kind: FamilyKind,
    p: Option<f64>,
    a: Option<f64>,
    c: Option<f64>,
    values: Option<Vec<f64>>,
    tail: Option<TailRule>,
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum TailKind {
    Constant,
    Power,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTail {
    rule: TailKind,
    p: Option<f64>,
    a: Option<f64>,
    c: Option<f64>,
}

fn required<T>(v: Option<T>, key: &str, kind: &str) -> std::result::Result<T, String> {
    v.ok_or_else(|| format!("missing key `{key}` for {kind}"))
}

fn unexpected(present: bool, key: &str, kind: &str) -> std::result::Result<(), String> {
    if present {
        Err(format!("key `{key}` does not apply to {kind}"))
    } else {
        Ok(())
    }
}

impl TryFrom<RawTail> for TailRule {
    type Error = String;

    fn try_from(r: RawTail) -> std::result::Result<Self, String> {
        match r.rule {
            TailKind::Constant => {
                unexpected(r.a.is_some(), "a", "rule constant")?;
                unexpected(r.c.is_some(), "c", "rule constant")?;
                Ok(TailRule::Constant {
                    p: required(r.p, "p", "rule constant")?,
                })
            }
            TailKind::Power => {
                unexpected(r.p.is_some(), "p", "rule power")?;
                Ok(TailRule::Power {
                    a: required(r.a, "a", "rule power")?,
                    c: r.c.unwrap_or(1.0),
                })
            }
        }
    }
}

impl TryFrom<RawFamily> for HazardFamily {
    type Error = String;

    fn try_from(r: RawFamily) -> std::result::Result<Self, String> {
        match r.kind {
            FamilyKind::Constant => {
                unexpected(r.a.is_some() || r.c.is_some(), "a/c", "kind constant")?;
                unexpected(
                    r.values.is_some() || r.tail.is_some(),
                    "values/tail",
                    "kind constant",
                )?;
                Ok(HazardFamily::Constant {
                    p: required(r.p, "p", "kind constant")?,
                })
            }
            FamilyKind::Power => {
                unexpected(r.p.is_some(), "p", "kind power")?;
                unexpected(
                    r.values.is_some() || r.tail.is_some(),
                    "values/tail",
                    "kind power",
                )?;
                Ok(HazardFamily::Power {
                    a: required(r.a, "a", "kind power")?,
                    c: r.c.unwrap_or(1.0),
                })
            }
            FamilyKind::Table => {
                unexpected(
                    r.p.is_some() || r.a.is_some() || r.c.is_some(),
                    "p/a/c",
                    "kind table",
                )?;
                Ok(HazardFamily::Table {
                    values: required(r.values, "values", "kind table")?,
                    tail: required(r.tail, "tail", "kind table")?,
                })
            }
        }
    }
}

#[inline]
fn power_hazard(a: f64, c: f64, k: u64) -> f64 {
    -(a * (-1.0 / (c + k as f64)).ln_1p()).exp_m1()
}

impl HazardFamily {
    /// Checks parameter ranges; `path` prefixes the reported key path.
    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            HazardFamily::Constant { p } => check_probability(&format!("{path}.p"), *p),
            HazardFamily::Power { a, c } => {
                check_positive(&format!("{path}.a"), *a)?;
                check_positive(&format!("{path}.c"), *c)
            }
            HazardFamily::Table { values, tail } => {
                if values.is_empty() {
                    return Err(Error::config(
                        format!("{path}.values"),
                        "hazard table is empty",
                    ));
                }
                if values.len() > MAX_TABLE {
                    return Err(Error::config(
                        format!("{path}.values"),
                        format!("hazard table longer than {MAX_TABLE}"),
                    ));
                }
                for (i, v) in values.iter().enumerate() {
                    check_probability(&format!("{path}.values[{i}]"), *v)?;
                }
                match tail {
                    TailRule::Constant { p } => check_probability(&format!("{path}.tail.p"), *p),
                    TailRule::Power { a, c } => {
                        check_positive(&format!("{path}.tail.a"), *a)?;
                        check_positive(&format!("{path}.tail.c"), *c)
                    }
                }
            }
        }
    }

    /// `α_k` for `k ≥ 1`.
    pub fn hazard(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match self {
            HazardFamily::Constant { p } => *p,
            HazardFamily::Power { a, c } => power_hazard(*a, *c, k),
            HazardFamily::Table { values, tail } => {
                if (k as usize) <= values.len() {
                    values[k as usize - 1]
                } else {
                    match tail {
                        TailRule::Constant { p } => *p,
                        TailRule::Power { a, c } => power_hazard(*a, *c, k),
                    }
                }
            }
        }
    }

    /// Runs end almost surely: some `α_k = 1` or `Σ α_k = ∞`.
    pub fn runs_end_almost_surely(&self) -> bool {
        match self {
            HazardFamily::Constant { p } => *p > 0.0,
            HazardFamily::Power { a, c } => *a > 0.0 && *c > 0.0,
            HazardFamily::Table { values, tail } => {
                values.iter().any(|&v| v >= 1.0)
                    || match tail {
                        TailRule::Constant { p } => *p > 0.0,
                        TailRule::Power { a, c } => *a > 0.0 && *c > 0.0,
                    }
            }
        }
    }
}

/// Large-`n` behaviour of a persistence tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailShape {
    /// `𝒯(n) = 0` from `n = max` on.
    Bounded { max: u64 },
    /// `𝒯(n) ∝ ratio^n`.
    Geometric { ratio: f64 },
    /// `𝒯(n) ~ constant · n^{−index}`.
    Power { index: f64, constant: f64 },
}

#[derive(Debug, Clone, Copy)]
enum Extension {
    Geometric { q: f64 },
    Power { a: f64, c: f64 },
}

/// Law of the persistence time in one direction.
///
/// Tails, truncated means and truncated second moments are tabulated on an
/// integer prefix and continued in closed form beyond it, so every
/// evaluation is O(1) and the object is immutable once built.
#[derive(Clone)]
pub struct PersistenceLaw {
    direction: Direction,
    family: HazardFamily,
    ext: Extension,
    // Length of the explicit hazard table; the extension applies beyond it.
    table_len: usize,
    // tails[n] = 𝒯(n), theta[n] = Θ(n), second[n] = V(n) for n ≤ prefix
    tails: Vec<f64>,
    theta: Vec<f64>,
    second: Vec<f64>,
}

impl fmt::Debug for PersistenceLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PersistenceLaw")
            .field("direction", &self.direction)
            .field("family", &self.family)
            .finish()
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl PersistenceLaw {
    pub fn new(direction: Direction, family: HazardFamily) -> Result<Self> {
        let path = match direction {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        family.validate(path)?;
        if !family.runs_end_almost_surely() {
            return Err(Error::Assumption(format!(
                "{path}: runs would be infinite with positive probability"
            )));
        }
        let (table_len, ext) = match &family {
            HazardFamily::Constant { p } => (0, Extension::Geometric { q: 1.0 - p }),
            HazardFamily::Power { a, c } => (0, Extension::Power { a: *a, c: *c }),
            HazardFamily::Table { values, tail } => (
                values.len(),
                match tail {
                    TailRule::Constant { p } => Extension::Geometric { q: 1.0 - p },
                    TailRule::Power { a, c } => Extension::Power { a: *a, c: *c },
                },
            ),
        };
        let mut law = PersistenceLaw {
            direction,
            family,
            ext,
            table_len,
            tails: Vec::new(),
            theta: Vec::new(),
            second: Vec::new(),
        };
        let prefix = table_len.max(PREFIX);
        let mut tails = Vec::with_capacity(prefix + 1);
        tails.push(1.0);
        for n in 1..=prefix {
            let t = if n <= table_len {
                tails[n - 1] * (1.0 - law.family.hazard(n as u64))
            } else {
                law.extension_tail(tails[table_len], n as u64)
            };
            tails.push(t);
        }
        let mut theta = Vec::with_capacity(prefix + 1);
        let mut second = Vec::with_capacity(prefix + 1);
        let (mut th, mut v) = (Neumaier::default(), Neumaier::default());
        theta.push(0.0);
        second.push(0.0);
        for n in 1..=prefix {
            th.add(tails[n - 1]);
            let pmf = tails[n - 1] * law.family.hazard(n as u64);
            v.add((n * n) as f64 * pmf);
            theta.push(th.value());
            second.push(v.value());
        }
        law.tails = tails;
        law.theta = theta;
        law.second = second;
        Ok(law)
    }

    fn extension_tail(&self, at_table_end: f64, n: u64) -> f64 {
        let l = self.table_len as f64;
        let steps = n as f64 - l;
        match self.ext {
            Extension::Geometric { q } => at_table_end * q.powf(steps),
            Extension::Power { a, c } => at_table_end * ((c + l) / (c + n as f64)).powf(a),
        }
    }

    fn prefix(&self) -> u64 {
        (self.tails.len() - 1) as u64
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn family(&self) -> &HazardFamily {
        &self.family
    }

    pub fn hazard(&self, k: u64) -> f64 {
        self.family.hazard(k)
    }

    /// `𝒯(n) = P(τ > n)`.
    pub fn tail_at(&self, n: u64) -> f64 {
        if n <= self.prefix() {
            self.tails[n as usize]
        } else {
            self.extension_tail(self.tails[self.table_len], n)
        }
    }

    /// `𝒯(t)` at real `t ≥ 0`, a right-continuous step function.
    pub fn tail(&self, t: f64) -> f64 {
        self.tail_at(floor_index(t))
    }

    /// `P(τ = n)`.
    pub fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.tail_at(n - 1) * self.hazard(n)
        }
    }

    // Σ_{n=from}^{to-1} 𝒯(n) and Σ n 𝒯(n) in the extension region.
    fn extension_sums(&self, from: u64, to: u64) -> (f64, f64) {
        if to <= from {
            return (0.0, 0.0);
        }
        let count = to - from;
        let tl = self.tails[self.table_len];
        if tl == 0.0 {
            return (0.0, 0.0);
        }
        let l = self.table_len as f64;
        match self.ext {
            Extension::Geometric { q } => {
                if count <= 4096 {
                    let (mut s0, mut s1) = (Neumaier::default(), Neumaier::default());
                    for n in from..to {
                        let t = self.tail_at(n);
                        s0.add(t);
                        s1.add(n as f64 * t);
                    }
                    return (s0.value(), s1.value());
                }
                let start = tl * q.powf(from as f64 - l);
                let p = 1.0 - q;
                let k = count as f64;
                let qk = q.powf(k);
                let g0 = (1.0 - qk) / p;
                // Σ_{j<K} j q^j
                let g1 = q * (1.0 - q.powf(k - 1.0) * (1.0 + (k - 1.0) * p)) / (p * p);
                (start * g0, start * (from as f64 * g0 + g1))
            }
            Extension::Power { a, c } => {
                let scale = tl * (c + l).powf(a);
                let x = c + from as f64;
                let s_a = shifted_power_sum(a, x, count);
                let s_a1 = shifted_power_sum(a - 1.0, x, count);
                (scale * s_a, scale * (s_a1 - c * s_a))
            }
        }
    }

    /// `Θ(t) = Σ_{n<⌊t⌋} 𝒯(n) = E[τ ∧ ⌊t⌋]`.
    pub fn truncated_mean(&self, t: f64) -> f64 {
        self.truncated_mean_at(floor_index(t))
    }

    pub fn truncated_mean_at(&self, n: u64) -> f64 {
        let p = self.prefix();
        if n <= p {
            self.theta[n as usize]
        } else {
            self.theta[p as usize] + self.extension_sums(p, n).0
        }
    }

    /// `V(t) = Σ_{n≤⌊t⌋} n² P(τ = n)`.
    pub fn truncated_second_moment(&self, t: f64) -> f64 {
        self.truncated_second_moment_at(floor_index(t))
    }

    pub fn truncated_second_moment_at(&self, n: u64) -> f64 {
        let p = self.prefix();
        if n <= p {
            return self.second[n as usize];
        }
        // Summation by parts from the end of the prefix.
        let (s0, s1) = self.extension_sums(p + 1, n);
        let pf = p as f64 + 1.0;
        let nf = n as f64;
        self.second[p as usize] + pf * pf * self.tail_at(p) - nf * nf * self.tail_at(n)
            + 2.0 * s1
            + s0
    }

    /// `E[τ; τ ≤ t] = Θ(t) − ⌊t⌋ 𝒯(⌊t⌋)`.
    pub fn truncated_first_moment(&self, t: f64) -> f64 {
        let n = floor_index(t);
        self.truncated_mean_at(n) - n as f64 * self.tail_at(n)
    }

    pub fn shape(&self) -> TailShape {
        let l = self.table_len;
        if let Some(max) = self.tails[..=l].iter().position(|&t| t == 0.0) {
            return TailShape::Bounded { max: max as u64 };
        }
        match self.ext {
            Extension::Geometric { q: 0.0 } => TailShape::Bounded { max: l as u64 + 1 },
            Extension::Geometric { q } => TailShape::Geometric { ratio: q },
            Extension::Power { a, c } => TailShape::Power {
                index: a,
                constant: self.tails[l] * (c + l as f64).powf(a),
            },
        }
    }

    pub fn tail_index(&self) -> Option<f64> {
        match self.shape() {
            TailShape::Power { index, .. } => Some(index),
            _ => None,
        }
    }

    pub fn integrable(&self) -> bool {
        self.tail_index().is_none_or(|a| a > 1.0)
    }

    /// Run length is almost surely a single value.
    pub fn is_degenerate(&self) -> bool {
        match self.shape() {
            TailShape::Bounded { max } => self.tail_at(max - 1) == 1.0,
            _ => false,
        }
    }

    /// `E[τ]`, infinite when the tail index is at most one.
    pub fn mean(&self) -> f64 {
        let p = self.prefix();
        let head = self.theta[p as usize];
        let tp = self.tail_at(p);
        match self.shape() {
            TailShape::Bounded { .. } => head,
            TailShape::Geometric { ratio } => head + tp / (1.0 - ratio),
            TailShape::Power { index, constant } => {
                if index <= 1.0 {
                    f64::INFINITY
                } else if let Extension::Power { c, .. } = self.ext {
                    head + constant * hurwitz_zeta(index, c + p as f64)
                } else {
                    unreachable!()
                }
            }
        }
    }

    /// Draws a persistence time by inverting the tail.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = open_unit(rng);
        self.quantile_open(u)
    }

    /// Smallest `n` with `𝒯(n) < u`, for `u ∈ (0, 1]`.
    pub fn quantile_open(&self, u: f64) -> u64 {
        let l = self.table_len;
        if l > 0 {
            let idx = self.tails[..=l].partition_point(|&t| t >= u);
            if idx <= l {
                return idx as u64;
            }
        }
        let tl = self.tails[l];
        let lf = l as f64;
        let steps = match self.ext {
            Extension::Geometric { q } => {
                if q == 0.0 {
                    1.0
                } else {
                    ((u / tl).ln() / q.ln()).floor() + 1.0
                }
            }
            Extension::Power { a, c } => {
                let r = (tl / u).ln() / a;
                ((c + lf) * r.exp_m1()).floor() + 1.0
            }
        };
        (l as u64).saturating_add((steps.max(1.0)) as u64)
    }

    /// Sequential Bernoulli stopping, giving up at `cap` steps.
    pub fn sample_stepwise<R: Rng + ?Sized>(&self, rng: &mut R, cap: u64) -> u64 {
        let mut k = 1;
        while k < cap {
            if rng.random::<f64>() < self.hazard(k) {
                return k;
            }
            k += 1;
        }
        cap
    }
}

fn floor_index(t: f64) -> u64 {
    if t.is_nan() || t <= 0.0 {
        0
    } else {
        t.floor() as u64
    }
}

/// Hazard sequences for both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSpec {
    pub up: HazardFamily,
    pub down: HazardFamily,
}

impl CombSpec {
    pub fn constant(p_up: f64, p_down: f64) -> Self {
        CombSpec {
            up: HazardFamily::Constant { p: p_up },
            down: HazardFamily::Constant { p: p_down },
        }
    }

    /// Power tails of common index `a` with constants `c_up^a`, `c_down^a`.
    pub fn power(a: f64, c_up: f64, c_down: f64) -> Self {
        CombSpec {
            up: HazardFamily::Power { a, c: c_up },
            down: HazardFamily::Power { a, c: c_down },
        }
    }

    /// Runs of length one in both directions.
    pub fn zigzag() -> Self {
        CombSpec::constant(1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.up.validate("up")?;
        self.down.validate("down")
    }

    pub fn family(&self, dir: Direction) -> &HazardFamily {
        match dir {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
        }
    }
}

/// A validated comb with both persistence laws built.
#[derive(Debug, Clone)]
pub struct Comb {
    spec: CombSpec,
    up: PersistenceLaw,
    down: PersistenceLaw,
}

impl Comb {
    pub fn new(spec: CombSpec) -> Result<Self> {
        let up = PersistenceLaw::new(Direction::Up, spec.up.clone())?;
        let down = PersistenceLaw::new(Direction::Down, spec.down.clone())?;
        Ok(Comb { spec, up, down })
    }

    pub fn spec(&self) -> &CombSpec {
        &self.spec
    }

    pub fn law(&self, dir: Direction) -> &PersistenceLaw {
        match dir {
            Direction::Up => &self.up,
            Direction::Down => &self.down,
        }
    }

    pub fn up(&self) -> &PersistenceLaw {
        &self.up
    }

    pub fn down(&self) -> &PersistenceLaw {
        &self.down
    }

    /// Both run lengths are almost surely constant (the walk is periodic).
    pub fn is_degenerate(&self) -> bool {
        self.up.is_degenerate() && self.down.is_degenerate()
    }
}

/// Finite grafts attached to comb leaves.
///
/// Keys are context words read from the most recent step backwards. A word
/// `ℓ^n ℓ̄ v` refines the comb leaf of a run in direction `ℓ` of age `n`; its
/// value is the probability of switching direction at the next step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraftSpec {
    #[serde(default)]
    pub entries: BTreeMap<String, f64>,
}

/// A parsed graft leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct GraftLeaf {
    pub direction: Direction,
    pub age: u64,
    /// History beyond the first step of the previous run, most recent first.
    pub rest: Vec<Direction>,
    pub switch: f64,
}

impl GraftSpec {
    pub fn depth(&self) -> usize {
        self.entries.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> Result<Vec<GraftLeaf>> {
        self.entries
            .iter()
            .map(|(word, &q)| {
                let path = format!("graft.entries.{word}");
                check_probability(&path, q)?;
                let letters: Option<Vec<Direction>> =
                    word.chars().map(Direction::from_letter).collect();
                let letters = letters
                    .ok_or_else(|| Error::config(&path, "context words use only 'u' and 'd'"))?;
                let first = *letters
                    .first()
                    .ok_or_else(|| Error::config(&path, "empty context word"))?;
                let age = letters.iter().take_while(|&&d| d == first).count();
                if age == letters.len() {
                    return Err(Error::config(
                        &path,
                        "context must contain a direction change to refine a comb leaf",
                    ));
                }
                Ok(GraftLeaf {
                    direction: first,
                    age: age as u64,
                    rest: letters[age + 1..].to_vec(),
                    switch: q,
                })
            })
            .collect()
    }
}

/// Lower and upper comb envelopes of a grafted walk.
///
/// The lower comb switches up-runs as often and down-runs as rarely as any
/// graft leaf allows; the upper comb does the opposite. Ages without graft
/// leaves keep the base hazard.
pub fn envelope_transitions(comb: &CombSpec, graft: &GraftSpec) -> Result<(CombSpec, CombSpec)> {
    let leaves = graft.leaves()?;
    let build = |dir: Direction, take_max: bool| -> HazardFamily {
        let mut by_age: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for leaf in leaves.iter().filter(|l| l.direction == dir) {
            by_age.entry(leaf.age).or_default().push(leaf.switch);
        }
        let base = comb.family(dir);
        let Some((&deepest, _)) = by_age.iter().next_back() else {
            return base.clone();
        };
        let (len, tail) = match base {
            HazardFamily::Constant { p } => (deepest as usize, TailRule::Constant { p: *p }),
            HazardFamily::Power { a, c } => (deepest as usize, TailRule::Power { a: *a, c: *c }),
            HazardFamily::Table { values, tail } => {
                (values.len().max(deepest as usize), tail.clone())
            }
        };
        let values = (1..=len as u64)
            .map(|k| match by_age.get(&k) {
                Some(qs) if take_max => qs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Some(qs) => qs.iter().copied().fold(f64::INFINITY, f64::min),
                None => base.hazard(k),
            })
            .collect();
        HazardFamily::Table { values, tail }
    };
    let lower = CombSpec {
        up: build(Direction::Up, true),
        down: build(Direction::Down, false),
    };
    let upper = CombSpec {
        up: build(Direction::Up, false),
        down: build(Direction::Down, true),
    };
    Ok((lower, upper))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CombFile {
    up: HazardFamily,
    down: HazardFamily,
    #[serde(default)]
    graft: Option<GraftSpec>,
}

/// Parses a comb configuration, with an optional `[graft]` table.
pub fn parse_comb(text: &str) -> Result<(CombSpec, Option<GraftSpec>)> {
    let file: CombFile = crate::config::from_toml_str(text)?;
    let spec = CombSpec {
        up: file.up,
        down: file.down,
    };
    spec.validate()?;
    if let Some(g) = &file.graft {
        g.leaves()?;
    }
    Ok((spec, file.graft))
}

pub fn load_comb(path: &std::path::Path) -> Result<(CombSpec, Option<GraftSpec>)> {
    parse_comb(&std::fs::read_to_string(path)?)
}
