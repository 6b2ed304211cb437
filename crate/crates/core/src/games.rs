//! Bipartite nonlocal games: exact classical values, see-saw lower bounds on
//! entangled values and the multi-Bob averaged game.
//!
//! Entangled values are lower bounds only. A strategy is a pure joint state
//! on `A ⊗ B_1 ⊗ … ⊗ B_n` with one POVM family for Alice and one per Bob.
//! In the multi-Bob game Alice's question alphabet is the disjoint union of
//! the games' question alphabets, so her measurement for a question never
//! depends on anything but the question itself.

use std::fmt;
use std::ops::Add;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qcore::linalg::{eigh, embed_operator, hermitian_fn, partial_trace_raw, CMatrix, CVector, C64, ZERO};
use crate::qcore::random::{derive_seed, ginibre, random_unit_vector, rng, SeededRng};

/// Bound on `nA^nX * nB^nY` for the brute-force classical value.
pub const CLASSICAL_GUARD: u128 = 10_000_000;
/// Bound on `dA * dB` for a single see-saw.
pub const SEESAW_GUARD: usize = 36;
/// Bound on `dA * prod dB_i` for the multi-Bob see-saw.
pub const MULTI_BOB_GUARD: usize = 64;
/// Largest accepted deviation of a POVM from `sum E = I`, `E >= 0`.
pub const POVM_TOL: f64 = 1e-8;

/// A question probability, exact when the input gave a rational.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Weight {
    Exact(Ratio<i64>),
    Float(f64),
}

impl Weight {
    pub fn value(&self) -> f64 {
        match *self {
            Weight::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Weight::Float(f) => f,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Weight::Exact(_))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Exact(r) => write!(f, "{r}"),
            Weight::Float(x) => write!(f, "{x}"),
        }
    }
}

impl std::str::FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(r) = s.parse::<Ratio<i64>>() {
            return Ok(Weight::Exact(r));
        }
        s.parse::<f64>()
            .map(Weight::Float)
            .map_err(|_| Error::Parse(format!("`{s}` is neither a rational nor a number")))
    }
}

/// Written as `"p/q"` strings when exact, plain numbers otherwise.
impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Exact(r) => s.serialize_str(&r.to_string()),
            Weight::Float(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => Ok(Weight::Exact(Ratio::from_integer(i))),
            Raw::Float(f) => Ok(Weight::Float(f)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A game `(X, Y, A, B, pi, v)` with alphabets `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    name: String,
    n_x: usize,
    n_y: usize,
    n_a: usize,
    n_b: usize,
    pi: Vec<Weight>,
    v: Vec<bool>,
}

impl Game {
    /// `pi` is row-major over `(x, y)`, `v` row-major over `(x, y, a, b)`.
    pub fn new(
        name: impl Into<String>,
        [n_x, n_y, n_a, n_b]: [usize; 4],
        pi: Vec<Weight>,
        v: Vec<bool>,
    ) -> Result<Self> {
        if n_x == 0 || n_y == 0 || n_a == 0 || n_b == 0 {
            return Err(Error::InvalidGame("alphabets must be nonempty".into()));
        }
        if pi.len() != n_x * n_y {
            return Err(Error::InvalidGame(format!("pi has {} entries, expected {}", pi.len(), n_x * n_y)));
        }
        if v.len() != n_x * n_y * n_a * n_b {
            return Err(Error::InvalidGame(format!(
                "v has {} entries, expected {}",
                v.len(),
                n_x * n_y * n_a * n_b
            )));
        }
        if let Some(w) = pi.iter().find(|w| !(w.value() >= 0.0)) {
            return Err(Error::InvalidGame(format!("negative question probability {w}")));
        }
        if pi.iter().all(Weight::is_exact) {
            let total = pi.iter().fold(Ratio::from_integer(0i128), |acc, w| match w {
                Weight::Exact(r) => acc + Ratio::new(*r.numer() as i128, *r.denom() as i128),
                Weight::Float(_) => acc,
            });
            if total != Ratio::from_integer(1) {
                return Err(Error::InvalidGame(format!("pi sums to {total}, not 1")));
            }
        } else {
            let total: f64 = pi.iter().map(Weight::value).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidGame(format!("pi sums to {total}, not 1")));
            }
        }
        Ok(Self { name: name.into(), n_x, n_y, n_a, n_b, pi, v })
    }

    /// CHSH: uniform questions, win iff `a xor b = x and y`.
    pub fn chsh() -> Self {
        let quarter = Weight::Exact(Ratio::new(1, 4));
        let mut v = Vec::with_capacity(16);
        for x in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        v.push((a ^ b) == (x & y));
                    }
                }
            }
        }
        Self::new("chsh", [2, 2, 2, 2], vec![quarter; 4], v).expect("chsh is valid")
    }

    /// Uniform questions and a constant predicate.
    pub fn constant(name: impl Into<String>, sizes: [usize; 4], win: bool) -> Result<Self> {
        let q = (sizes[0] * sizes[1]) as i64;
        let total = sizes.iter().product();
        Self::new(name, sizes, vec![Weight::Exact(Ratio::new(1, q.max(1))); sizes[0] * sizes[1]], vec![win; total])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `[nX, nY, nA, nB]`.
    pub fn sizes(&self) -> [usize; 4] {
        [self.n_x, self.n_y, self.n_a, self.n_b]
    }

    pub fn weight(&self, x: usize, y: usize) -> Weight {
        self.pi[x * self.n_y + y]
    }

    pub fn pi(&self, x: usize, y: usize) -> f64 {
        self.pi[x * self.n_y + y].value()
    }

    pub fn wins(&self, x: usize, y: usize, a: usize, b: usize) -> bool {
        self.v[((x * self.n_y + y) * self.n_a + a) * self.n_b + b]
    }

    /// True when every question probability was given as a rational.
    pub fn is_exact(&self) -> bool {
        self.pi.iter().all(Weight::is_exact)
    }

    /// Same game with questions and answers relabelled by the given
    /// permutations (`new_label = perm[old_label]`).
    pub fn relabeled(&self, px: &[usize], py: &[usize], pa: &[usize], pb: &[usize]) -> Result<Self> {
        let ok = |p: &[usize], n: usize| {
            let mut seen = vec![false; n];
            p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
        };
        if !(ok(px, self.n_x) && ok(py, self.n_y) && ok(pa, self.n_a) && ok(pb, self.n_b)) {
            return Err(Error::InvalidGame("relabelling is not a permutation".into()));
        }
        let mut pi = self.pi.clone();
        let mut v = self.v.clone();
        for x in 0..self.n_x {
            for y in 0..self.n_y {
                pi[px[x] * self.n_y + py[y]] = self.weight(x, y);
                for a in 0..self.n_a {
                    for b in 0..self.n_b {
                        v[((px[x] * self.n_y + py[y]) * self.n_a + pa[a]) * self.n_b + pb[b]] = self.wins(x, y, a, b);
                    }
                }
            }
        }
        Self::new(self.name.clone(), self.sizes(), pi, v)
    }

    fn guard(&self) -> Result<()> {
        let count = (self.n_a as u128)
            .checked_pow(self.n_x as u32)
            .and_then(|p| p.checked_mul((self.n_b as u128).checked_pow(self.n_y as u32)?));
        match count {
            Some(c) if c <= CLASSICAL_GUARD => Ok(()),
            _ => Err(Error::GuardExceeded(format!(
                "{}^{} * {}^{} deterministic strategies exceeds {CLASSICAL_GUARD}",
                self.n_a, self.n_x, self.n_b, self.n_y
            ))),
        }
    }
}

/// Optimal deterministic strategy and its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalValue {
    pub value: f64,
    /// Exact value as `p/q` when all question probabilities are rational.
    pub exact: Option<String>,
    /// Alice's answer for each question.
    pub alice: Vec<usize>,
    /// Bob's answer for each question.
    pub bob: Vec<usize>,
}

trait Score: Copy + PartialOrd + Add<Output = Self> + Default + Send + Sync {}
impl Score for f64 {}
impl Score for i128 {}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Integer weights over a common denominator, or `None` on overflow.
fn integer_weights(g: &Game) -> Option<(Vec<i128>, i128)> {
    let mut lcm: i128 = 1;
    for w in &g.pi {
        let Weight::Exact(r) = w else { return None };
        let d = *r.denom() as i128;
        lcm = (lcm / gcd(lcm, d)).checked_mul(d)?;
    }
    let w = g
        .pi
        .iter()
        .map(|w| match w {
            Weight::Exact(r) => (*r.numer() as i128).checked_mul(lcm / *r.denom() as i128),
            Weight::Float(_) => None,
        })
        .collect::<Option<Vec<_>>>()?;
    // the per-strategy sums stay below lcm since weights sum to lcm
    Some((w, lcm))
}

fn alice_answers(g: &Game, mut s: u64) -> Vec<usize> {
    let mut a = vec![0; g.n_x];
    for x in (0..g.n_x).rev() {
        a[x] = (s % g.n_a as u64) as usize;
        s /= g.n_a as u64;
    }
    a
}

/// Bob's best response to `a`, lowest answer on ties.
fn best_response<T: Score>(g: &Game, w: &[T], a: &[usize]) -> (T, Vec<usize>) {
    let mut total = T::default();
    let mut bob = vec![0; g.n_y];
    for y in 0..g.n_y {
        let mut best = T::default();
        for b in 0..g.n_b {
            let mut s = T::default();
            for x in 0..g.n_x {
                if g.wins(x, y, a[x], b) {
                    s = s + w[x * g.n_y + y];
                }
            }
            if b == 0 || s > best {
                best = s;
                bob[y] = b;
            }
        }
        total = total + best;
    }
    (total, bob)
}

fn brute_force<T: Score>(g: &Game, w: &[T]) -> (T, Vec<usize>, Vec<usize>) {
    let count = (g.n_a as u64).pow(g.n_x as u32);
    let (best, s) = (0..count)
        .into_par_iter()
        .map(|s| (best_response(g, w, &alice_answers(g, s)).0, s))
        .reduce(
            || (T::default(), u64::MAX),
            |p, q| {
                // larger value wins, then the lower strategy index
                if q.1 == u64::MAX || (p.1 != u64::MAX && (p.0 > q.0 || (p.0 == q.0 && p.1 < q.1))) {
                    p
                } else {
                    q
                }
            },
        );
    let alice = alice_answers(g, s);
    let bob = best_response(g, w, &alice).1;
    (best, alice, bob)
}

/// Exact classical value by enumerating Alice's deterministic strategies
/// and taking Bob's best response to each.
pub fn classical_value(g: &Game) -> Result<ClassicalValue> {
    g.guard()?;
    if let Some((w, lcm)) = integer_weights(g) {
        let (best, alice, bob) = brute_force(g, &w);
        let d = gcd(best, lcm).max(1);
        let (p, q) = (best / d, lcm / d);
        let exact = if p == 0 { "0".to_string() } else if q == 1 { p.to_string() } else { format!("{p}/{q}") };
        return Ok(ClassicalValue { value: p as f64 / q as f64, exact: Some(exact), alice, bob });
    }
    let w: Vec<f64> = g.pi.iter().map(Weight::value).collect();
    let (value, alice, bob) = brute_force(g, &w);
    Ok(ClassicalValue { value, exact: None, alice, bob })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeesawOptions {
    /// Restart 0 starts from the classical optimum, the rest at random.
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Stop when a sweep improves the value by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self { restarts: 8, max_sweeps: 200, tol: 1e-7, seed: 0 }
    }
}

/// Pure joint state with Alice's and each Bob's measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumStrategy {
    /// `[dA, dB_1, …, dB_n]`.
    pub dims: Vec<usize>,
    pub state: CVector,
    /// Indexed by Alice's global question, then answer.
    pub alice: Vec<Vec<CMatrix>>,
    /// Indexed by Bob, question, answer.
    pub bobs: Vec<Vec<Vec<CMatrix>>>,
}

impl QuantumStrategy {
    /// Largest deviation of any family from `sum E = I` and `E >= 0`.
    pub fn povm_deviation(&self) -> f64 {
        self.alice.iter().chain(self.bobs.iter().flatten()).map(|f| povm_deviation(f)).fold(0.0, f64::max)
    }
}

/// Result of a see-saw run over one or more games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameValueReport {
    pub games: Vec<String>,
    /// Average classical value over the games.
    pub classical: f64,
    pub classical_exact: Option<String>,
    /// Best value found; a lower bound on the entangled value.
    pub entangled_lower: f64,
    pub gap: f64,
    /// Bound on the gap from the monogamy theorem, for multi-Bob runs.
    pub monogamy_bound: Option<f64>,
    /// Value after each sweep of the best restart.
    pub trace: Vec<f64>,
    pub restart_values: Vec<f64>,
    pub best_restart: usize,
    pub max_povm_drift: f64,
    pub seed: u64,
    pub strategy: QuantumStrategy,
}

/// `n^{-1/4} d (log2 d)^{1/4}`.
pub fn monogamy_game_bound(n: usize, d: usize) -> Result<f64> {
    if n == 0 || d < 2 {
        return Err(Error::OutOfRange(format!("monogamy bound needs n >= 1 and d >= 2, got n = {n}, d = {d}")));
    }
    Ok((n as f64).powf(-0.25) * d as f64 * (d as f64).log2().powf(0.25))
}

/// See-saw lower bound on the entangled value of one game.
pub fn entangled_value_lower(g: &Game, d_a: usize, d_b: usize, opts: &SeesawOptions) -> Result<GameValueReport> {
    if d_a * d_b > SEESAW_GUARD || d_a == 0 || d_b == 0 {
        return Err(Error::GuardExceeded(format!("dA * dB = {} exceeds {SEESAW_GUARD}", d_a * d_b)));
    }
    run(std::slice::from_ref(g), vec![d_a, d_b], opts, false)
}

/// Average classical value and a see-saw lower bound on the average
/// entangled value when Alice plays game `i` against Bob `i`, `i` uniform.
pub fn multi_bob_values(games: &[Game], d_a: usize, d_bs: &[usize], opts: &SeesawOptions) -> Result<GameValueReport> {
    if games.is_empty() || games.len() != d_bs.len() {
        return Err(Error::InvalidGame(format!("{} games for {} Bob dimensions", games.len(), d_bs.len())));
    }
    let mut dims = vec![d_a];
    dims.extend_from_slice(d_bs);
    let total: usize = dims.iter().product();
    if total > MULTI_BOB_GUARD || dims.contains(&0) {
        return Err(Error::GuardExceeded(format!("dA * prod dB = {total} exceeds {MULTI_BOB_GUARD}")));
    }
    run(games, dims, opts, true)
}

/// Average winning probability of a strategy.
pub fn strategy_value(games: &[Game], s: &QuantumStrategy) -> Result<f64> {
    let p = Problem::new(games, s.dims.clone())?;
    p.check_shape(s)?;
    Ok(p.value(s))
}

struct Problem<'a> {
    games: &'a [Game],
    dims: Vec<usize>,
    /// First global Alice question of each game.
    offsets: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(games: &'a [Game], dims: Vec<usize>) -> Result<Self> {
        if dims.len() != games.len() + 1 {
            return Err(Error::DimensionMismatch(format!("{} dims for {} games", dims.len(), games.len())));
        }
        let mut offsets = Vec::with_capacity(games.len());
        let mut acc = 0;
        for g in games {
            offsets.push(acc);
            acc += g.n_x;
        }
        Ok(Self { games, dims, offsets })
    }

    fn check_shape(&self, s: &QuantumStrategy) -> Result<()> {
        let dim: usize = self.dims.iter().product();
        let ok = s.dims == self.dims
            && s.state.len() == dim
            && s.alice.len() == self.games.iter().map(|g| g.n_x).sum::<usize>()
            && s.bobs.len() == self.games.len()
            && self.games.iter().zip(&s.bobs).all(|(g, b)| b.len() == g.n_y);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("strategy does not match the games".into()))
        }
    }

    fn weight(&self) -> f64 {
        1.0 / self.games.len() as f64
    }

    /// Game operator `(1/n) sum_i sum pi v E ⊗ F_i` on the joint space.
    fn operator(&self, s: &QuantumStrategy) -> CMatrix {
        let dim: usize = self.dims.iter().product();
        let mut w = CMatrix::zeros(dim, dim);
        for (i, g) in self.games.iter().enumerate() {
            let (da, db) = (self.dims[0], self.dims[i + 1]);
            let mut local = CMatrix::zeros(da * db, da * db);
            for x in 0..g.n_x {
                for y in 0..g.n_y {
                    let p = g.pi(x, y) * self.weight();
                    if p == 0.0 {
                        continue;
                    }
                    for a in 0..g.n_a {
                        for b in 0..g.n_b {
                            if g.wins(x, y, a, b) {
                                local += s.alice[self.offsets[i] + x][a].kronecker(&s.bobs[i][y][b]).scale(p);
                            }
                        }
                    }
                }
            }
            w += embed_operator(&local, &self.dims, &[0, i + 1]);
        }
        w
    }

    fn value(&self, s: &QuantumStrategy) -> f64 {
        let w = self.operator(s);
        (s.state.adjoint() * w * &s.state)[(0, 0)].re
    }

    fn reduced(&self, state: &CVector, i: usize) -> CMatrix {
        partial_trace_raw(&(state * state.adjoint()), &self.dims, &[0, i + 1])
    }

    fn state_step(&self, s: &mut QuantumStrategy) {
        let (_, vectors) = eigh(&self.operator(s));
        s.state = vectors.column(0).into_owned();
    }

    fn alice_step(&self, s: &mut QuantumStrategy, work: &mut Workspace) {
        let da = self.dims[0];
        for (i, g) in self.games.iter().enumerate() {
            let rho = self.reduced(&s.state, i);
            let db = self.dims[i + 1];
            for x in 0..g.n_x {
                let mut targets = vec![CMatrix::zeros(da, da); g.n_a];
                for y in 0..g.n_y {
                    let p = g.pi(x, y) * self.weight();
                    if p == 0.0 {
                        continue;
                    }
                    for (b, f) in s.bobs[i][y].iter().enumerate() {
                        let c = contract_second(&rho, da, db, f);
                        for (a, t) in targets.iter_mut().enumerate() {
                            if g.wins(x, y, a, b) {
                                *t += c.scale(p);
                            }
                        }
                    }
                }
                let q = self.offsets[i] + x;
                if let Some(better) = improve_povm(&s.alice[q], &targets, work) {
                    s.alice[q] = better;
                }
            }
        }
    }

    fn bob_step(&self, s: &mut QuantumStrategy, i: usize, work: &mut Workspace) {
        let g = &self.games[i];
        let (da, db) = (self.dims[0], self.dims[i + 1]);
        let rho = self.reduced(&s.state, i);
        for y in 0..g.n_y {
            let mut targets = vec![CMatrix::zeros(db, db); g.n_b];
            for x in 0..g.n_x {
                let p = g.pi(x, y) * self.weight();
                if p == 0.0 {
                    continue;
                }
                for (a, e) in s.alice[self.offsets[i] + x].iter().enumerate() {
                    let c = contract_first(&rho, da, db, e);
                    for (b, t) in targets.iter_mut().enumerate() {
                        if g.wins(x, y, a, b) {
                            *t += c.scale(p);
                        }
                    }
                }
            }
            if let Some(better) = improve_povm(&s.bobs[i][y], &targets, work) {
                s.bobs[i][y] = better;
            }
        }
    }

    fn classical_seed(&self, classical: &[ClassicalValue]) -> QuantumStrategy {
        let deterministic = |d: usize, n: usize, answer: usize| {
            (0..n).map(|a| if a == answer { CMatrix::identity(d, d) } else { CMatrix::zeros(d, d) }).collect()
        };
        let mut alice = Vec::new();
        let mut bobs = Vec::new();
        for (i, (g, c)) in self.games.iter().zip(classical).enumerate() {
            alice.extend(c.alice.iter().map(|&a| deterministic(self.dims[0], g.n_a, a)));
            bobs.push(c.bob.iter().map(|&b| deterministic(self.dims[i + 1], g.n_b, b)).collect());
        }
        let dim: usize = self.dims.iter().product();
        let mut state = CVector::zeros(dim);
        state[0] = C64::new(1.0, 0.0);
        QuantumStrategy { dims: self.dims.clone(), state, alice, bobs }
    }

    fn random_start(&self, r: &mut SeededRng) -> QuantumStrategy {
        let mut alice = Vec::new();
        let mut bobs = Vec::new();
        for (i, g) in self.games.iter().enumerate() {
            for _ in 0..g.n_x {
                alice.push(random_povm(self.dims[0], g.n_a, r));
            }
            bobs.push((0..g.n_y).map(|_| random_povm(self.dims[i + 1], g.n_b, r)).collect());
        }
        let dim: usize = self.dims.iter().product();
        QuantumStrategy { dims: self.dims.clone(), state: random_unit_vector(dim, r), alice, bobs }
    }
}

/// `tr_B[M (I ⊗ F)]` for `M` on `A ⊗ B`.
fn contract_second(m: &CMatrix, da: usize, db: usize, f: &CMatrix) -> CMatrix {
    CMatrix::from_fn(da, da, |a, a2| {
        let mut s = ZERO;
        for b in 0..db {
            for b2 in 0..db {
                s += m[(a * db + b, a2 * db + b2)] * f[(b2, b)];
            }
        }
        s
    })
}

/// `tr_A[M (E ⊗ I)]` for `M` on `A ⊗ B`.
fn contract_first(m: &CMatrix, da: usize, db: usize, e: &CMatrix) -> CMatrix {
    CMatrix::from_fn(db, db, |b, b2| {
        let mut s = ZERO;
        for a in 0..da {
            for a2 in 0..da {
                s += m[(a * db + b, a2 * db + b2)] * e[(a2, a)];
            }
        }
        s
    })
}

fn povm_deviation(family: &[CMatrix]) -> f64 {
    let d = family[0].nrows();
    let mut sum = CMatrix::zeros(d, d);
    let mut dev: f64 = 0.0;
    for e in family {
        sum += e;
        let (values, _) = eigh(e);
        dev = dev.max(-values.last().copied().unwrap_or(0.0));
        dev = dev.max(crate::qcore::linalg::hermitian_deviation(e));
    }
    let id = CMatrix::identity(d, d);
    dev.max(crate::qcore::linalg::max_abs_diff(&sum, &id))
}

fn objective(family: &[CMatrix], targets: &[CMatrix]) -> f64 {
    family.iter().zip(targets).map(|(e, t)| (e * t).trace().re).sum()
}

/// `E_a = S^{-1/2} M_a^† M_a S^{-1/2}` with `S = sum M_a^† M_a`.
fn povm_from_params(m: &[CMatrix]) -> Option<Vec<CMatrix>> {
    let d = m[0].nrows();
    let grams: Vec<CMatrix> = m.iter().map(|x| x.adjoint() * x).collect();
    let s = grams.iter().fold(CMatrix::zeros(d, d), |acc, g| acc + g);
    let (values, vectors) = eigh(&s);
    if values.last().copied().unwrap_or(0.0) < 1e-12 {
        return None;
    }
    let inv_sqrt = hermitian_fn(&values, &vectors, |v| 1.0 / v.sqrt());
    Some(
        grams
            .iter()
            .map(|g| crate::qcore::linalg::symmetrize(&(&inv_sqrt * g * &inv_sqrt)))
            .collect(),
    )
}

fn random_povm(d: usize, n: usize, r: &mut SeededRng) -> Vec<CMatrix> {
    loop {
        let m: Vec<CMatrix> = (0..n).map(|_| ginibre(d, d, r)).collect();
        if let Some(p) = povm_from_params(&m) {
            return p;
        }
    }
}

#[derive(Default)]
struct Workspace {
    max_drift: f64,
}

/// Better POVM for `max sum_a tr(E_a T_a)`, or `None` if no improvement was
/// found. Two-outcome families use the exact optimum (projector onto the
/// positive part of `T_0 - T_1`); larger families take backtracking ascent
/// steps in the square-root parametrization.
fn improve_povm(current: &[CMatrix], targets: &[CMatrix], work: &mut Workspace) -> Option<Vec<CMatrix>> {
    let base = objective(current, targets);
    let candidate = if current.len() == 2 {
        let (values, vectors) = eigh(&(&targets[0] - &targets[1]));
        let p = hermitian_fn(&values, &vectors, |v| if v > 0.0 { 1.0 } else { 0.0 });
        let d = p.nrows();
        vec![p.clone(), CMatrix::identity(d, d) - p]
    } else {
        ascend(current, targets)?
    };
    if objective(&candidate, targets) <= base {
        return None;
    }
    work.max_drift = work.max_drift.max(povm_deviation(&candidate));
    Some(candidate)
}

fn ascend(current: &[CMatrix], targets: &[CMatrix]) -> Option<Vec<CMatrix>> {
    const H: f64 = 1e-6;
    let d = current[0].nrows();
    let sqrt_of = |e: &CMatrix| {
        let (values, vectors) = eigh(e);
        hermitian_fn(&values, &vectors, |v| v.max(0.0).sqrt())
    };
    let mut params: Vec<CMatrix> = current.iter().map(sqrt_of).collect();
    let eval = |m: &[CMatrix]| povm_from_params(m).map_or(f64::NEG_INFINITY, |p| objective(&p, targets));
    let mut value = eval(&params);
    let mut step = 1.0;
    let mut moved = false;
    for _ in 0..30 {
        let mut grad: Vec<CMatrix> = vec![CMatrix::zeros(d, d); params.len()];
        for k in 0..params.len() {
            for idx in 0..d * d {
                for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut plus = params.clone();
                    plus[k][idx] += dir * H;
                    let mut minus = params.clone();
                    minus[k][idx] -= dir * H;
                    let g = (eval(&plus) - eval(&minus)) / (2.0 * H);
                    grad[k][idx] += dir * g;
                }
            }
        }
        if grad.iter().map(|g| g.norm_squared()).sum::<f64>() < 1e-24 {
            break;
        }
        let mut accepted = false;
        while step > 1e-12 {
            let trial: Vec<CMatrix> = params.iter().zip(&grad).map(|(m, g)| m + g.scale(step)).collect();
            let v = eval(&trial);
            if v > value {
                let gain = v - value;
                params = trial;
                value = v;
                step = (step * 2.0).min(1e3);
                accepted = true;
                moved = true;
                if gain < 1e-12 {
                    return povm_from_params(&params);
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if moved {
        povm_from_params(&params)
    } else {
        None
    }
}

struct Run {
    value: f64,
    trace: Vec<f64>,
    drift: f64,
    strategy: QuantumStrategy,
}

fn seesaw(p: &Problem<'_>, mut s: QuantumStrategy, opts: &SeesawOptions) -> Run {
    let mut work = Workspace::default();
    let mut trace = Vec::new();
    let mut value = f64::NEG_INFINITY;
    for _ in 0..opts.max_sweeps {
        p.state_step(&mut s);
        p.alice_step(&mut s, &mut work);
        for i in 0..p.games.len() {
            p.bob_step(&mut s, i, &mut work);
        }
        let v = p.value(&s);
        trace.push(v);
        let gain = v - value;
        value = v;
        if gain < opts.tol {
            break;
        }
    }
    // the last measurement steps may leave room in the state
    p.state_step(&mut s);
    let v = p.value(&s);
    if v > value {
        value = v;
        trace.push(v);
    }
    Run { value, trace, drift: work.max_drift, strategy: s }
}

fn run(games: &[Game], dims: Vec<usize>, opts: &SeesawOptions, multi: bool) -> Result<GameValueReport> {
    let problem = Problem::new(games, dims)?;
    let classical = games.iter().map(classical_value).collect::<Result<Vec<_>>>()?;
    let n = games.len() as f64;
    let avg = classical.iter().map(|c| c.value).sum::<f64>() / n;
    let exact = exact_average(&classical);

    let restarts = opts.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                problem.classical_seed(&classical)
            } else {
                problem.random_start(&mut rng(derive_seed(opts.seed, r as u64)))
            };
            seesaw(&problem, start, opts)
        })
        .collect();
    let best = (0..runs.len()).fold(0, |b, r| if runs[r].value > runs[b].value { r } else { b });
    let drift = runs.iter().map(|r| r.drift).fold(0.0, f64::max);
    if drift > POVM_TOL {
        return Err(Error::InvalidState(format!("POVM drifted by {drift:.3e}")));
    }
    let restart_values = runs.iter().map(|r| r.value).collect();
    let Run { value, trace, strategy, .. } = runs.into_iter().nth(best).expect("at least one restart");
    let monogamy_bound = if multi { Some(monogamy_game_bound(games.len(), problem.dims[0])?) } else { None };
    Ok(GameValueReport {
        games: games.iter().map(|g| g.name.clone()).collect(),
        classical: avg,
        classical_exact: exact,
        entangled_lower: value,
        gap: value - avg,
        monogamy_bound,
        trace,
        restart_values,
        best_restart: best,
        max_povm_drift: drift,
        seed: opts.seed,
        strategy,
    })
}

fn exact_average(classical: &[ClassicalValue]) -> Option<String> {
    let mut total = Ratio::from_integer(0i128);
    for c in classical {
        let s = c.exact.as_deref()?;
        total += s.parse::<Ratio<i128>>().ok()?;
    }
    let avg = total / Ratio::from_integer(classical.len() as i128);
    Some(avg.to_string())
}
