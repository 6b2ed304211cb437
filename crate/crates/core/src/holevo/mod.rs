//! Holevo information of channels: ensemble evaluation, seeded ensemble
//! optimization, flag-sector decomposition and potential-capacity handling.
//!
//! Every optimized value is the exact Holevo quantity of an explicit
//! ensemble, hence a lower bound on the channel's Holevo information.

mod optimizer;
mod problem;

use serde::{Deserialize, Serialize};

pub use optimizer::RestartTrace;

use crate::channels::{heralded_with_k, KrausChannel};
use crate::entropy::von_neumann_entropy;
use crate::error::{Error, Result};
use crate::qcore::linalg::{CVector, C64};
use crate::qcore::DensityOperator;
use optimizer::{best, optimize, PureEnsemble, Settings};
use problem::Problem;

/// Largest channel input dimension accepted by the optimizer.
pub const MAX_INPUT_DIM: usize = 64;

/// Finite classical-quantum input `{p(x), rho_x}`.
#[derive(Clone, Debug)]
pub struct CQEnsemble {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl CQEnsemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        if probs.is_empty() || probs.len() != states.len() {
            return Err(Error::InvalidState(format!(
                "{} probabilities for {} states",
                probs.len(),
                states.len()
            )));
        }
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidState("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        let dims = states[0].dims();
        if states.iter().any(|s| s.dims() != dims) {
            return Err(Error::DimensionMismatch("ensemble states differ in shape".into()));
        }
        Ok(Self { probs, states })
    }

    /// Uniform ensemble.
    pub fn uniform(states: Vec<DensityOperator>) -> Result<Self> {
        let n = states.len().max(1);
        Self::new(vec![1.0 / n as f64; states.len()], states)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn average(&self) -> DensityOperator {
        DensityOperator::mixture(&self.probs, &self.states).expect("validated ensemble")
    }
}

/// `S(Phi(avg)) - sum_x p(x) S(Phi(rho_x))`.
pub fn holevo_of_ensemble(phi: &KrausChannel, e: &CQEnsemble) -> Result<f64> {
    let avg = phi.apply_full(&e.average())?;
    let mut v = von_neumann_entropy(&avg);
    for (p, s) in e.probs.iter().zip(&e.states) {
        if *p > 0.0 {
            v -= p * von_neumann_entropy(&phi.apply_full(s)?);
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolevoOptions {
    /// Defaults to the squared input dimension.
    pub ensemble_size: Option<usize>,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for HolevoOptions {
    fn default() -> Self {
        Self { ensemble_size: None, restarts: 32, tol: 1e-6, max_iters: 500, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolevoPath {
    Naive,
    Flagged,
    Product,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub prob: f64,
    /// `[re, im]` amplitudes in the computational basis
    pub amplitudes: Vec<[f64; 2]>,
}

/// Certified lower estimate of a channel's Holevo information.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolevoEstimate {
    pub value: f64,
    pub path: HolevoPath,
    pub seed: u64,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub ensemble: Vec<EnsembleMember>,
    pub restarts: Vec<RestartTrace>,
    /// value after each iteration of the winning restart
    pub history: Vec<f64>,
}

impl HolevoEstimate {
    fn empty(path: HolevoPath, seed: u64) -> Self {
        Self {
            value: 0.0,
            path,
            seed,
            restarts_used: 0,
            best_restart: 0,
            ensemble: Vec::new(),
            restarts: Vec::new(),
            history: vec![0.0],
        }
    }

    /// Best ensemble as pure state vectors.
    pub fn vectors(&self) -> Vec<CVector> {
        self.ensemble
            .iter()
            .map(|m| CVector::from_iterator(m.amplitudes.len(), m.amplitudes.iter().map(|a| C64::new(a[0], a[1]))))
            .collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.ensemble.iter().map(|m| m.prob).collect()
    }

    /// Best ensemble as a [`CQEnsemble`] of pure states on `shape`.
    pub fn cq_ensemble(&self, shape: &crate::qcore::SpaceShape) -> Result<CQEnsemble> {
        let states = self
            .vectors()
            .iter()
            .map(|v| DensityOperator::pure(shape.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        let probs = self.probs();
        let total: f64 = probs.iter().sum();
        CQEnsemble::new(probs.iter().map(|p| p / total).collect(), states)
    }
}

/// Warm-start ensemble of pure states.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub probs: Vec<f64>,
    pub vectors: Vec<CVector>,
}

impl WarmStart {
    pub fn from_estimate(e: &HolevoEstimate) -> Self {
        Self { probs: e.probs(), vectors: e.vectors() }
    }

    /// Product ensemble `{p_x q_y, psi_x ⊗ phi_y}`, dropping negligible
    /// weights.
    pub fn product(&self, other: &WarmStart) -> Self {
        let mut probs = Vec::new();
        let mut vectors = Vec::new();
        for (p, a) in self.probs.iter().zip(&self.vectors) {
            for (q, b) in other.probs.iter().zip(&other.vectors) {
                if p * q > 1e-12 {
                    probs.push(p * q);
                    vectors.push(a.kronecker(b));
                }
            }
        }
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        Self { probs, vectors }
    }
}

fn guard(phi: &KrausChannel) -> Result<()> {
    if phi.in_dim() > MAX_INPUT_DIM {
        return Err(Error::GuardExceeded(format!(
            "channel input dimension {} exceeds {MAX_INPUT_DIM}",
            phi.in_dim()
        )));
    }
    Ok(())
}

fn run(
    problem: &Problem,
    opts: &HolevoOptions,
    path: HolevoPath,
    block_dims: Vec<usize>,
    warm: Vec<PureEnsemble>,
) -> Result<HolevoEstimate> {
    if problem.components.is_empty() {
        return Ok(HolevoEstimate::empty(path, opts.seed));
    }
    let d = problem.in_dim();
    let size = opts.ensemble_size.unwrap_or(d * d).max(1);
    let settings = Settings { tol: opts.tol, max_iters: opts.max_iters, block_dims };
    let outcomes = optimize(problem, &settings, size, opts.restarts, opts.seed, warm);
    let Some(b) = best(&outcomes) else {
        return Err(Error::OutOfRange("no restarts requested".into()));
    };
    let winner = &outcomes[b];
    let ensemble = winner
        .ensemble
        .probs
        .iter()
        .zip(winner.ensemble.full_vectors())
        .map(|(p, v)| EnsembleMember { prob: *p, amplitudes: v.iter().map(|z| [z.re, z.im]).collect() })
        .collect();
    Ok(HolevoEstimate {
        value: winner.trace.value.max(0.0),
        path,
        seed: opts.seed,
        restarts_used: outcomes.len(),
        best_restart: b,
        ensemble,
        restarts: outcomes.iter().map(|o| o.trace.clone()).collect(),
        history: winner.history.clone(),
    })
}

fn warm_full(warm: &[WarmStart], d: usize) -> Result<Vec<PureEnsemble>> {
    warm.iter()
        .map(|w| {
            if w.vectors.iter().any(|v| v.len() != d) || w.vectors.len() != w.probs.len() || w.vectors.is_empty() {
                return Err(Error::DimensionMismatch("warm start does not match channel input".into()));
            }
            Ok(PureEnsemble {
                probs: w.probs.clone(),
                blocks: w.vectors.iter().map(|v| vec![v.normalize()]).collect(),
            })
        })
        .collect()
}

/// Ensemble optimization on the full channel output.
pub fn maximize_holevo(phi: &KrausChannel, opts: &HolevoOptions) -> Result<HolevoEstimate> {
    maximize_holevo_seeded(phi, opts, &[])
}

/// As [`maximize_holevo`], with extra warm-start ensembles tried before the
/// random restarts.
pub fn maximize_holevo_seeded(phi: &KrausChannel, opts: &HolevoOptions, warm: &[WarmStart]) -> Result<HolevoEstimate> {
    guard(phi)?;
    let problem = Problem::naive(phi);
    run(&problem, opts, HolevoPath::Naive, vec![phi.in_dim()], warm_full(warm, phi.in_dim())?)
}

/// Ensemble optimization through the flag-sector decomposition
/// `I(X;BY) = sum_y I(X;B)_y` (unnormalized blocks).
pub fn maximize_holevo_flagged(phi: &KrausChannel, opts: &HolevoOptions) -> Result<HolevoEstimate> {
    maximize_holevo_flagged_seeded(phi, opts, &[])
}

pub fn maximize_holevo_flagged_seeded(
    phi: &KrausChannel,
    opts: &HolevoOptions,
    warm: &[WarmStart],
) -> Result<HolevoEstimate> {
    guard(phi)?;
    let problem = Problem::flagged(phi)?;
    run(&problem, opts, HolevoPath::Flagged, vec![phi.in_dim()], warm_full(warm, phi.in_dim())?)
}

/// Flagged path when the channel has flags, naive otherwise.
pub fn maximize_holevo_auto(phi: &KrausChannel, opts: &HolevoOptions, warm: &[WarmStart]) -> Result<HolevoEstimate> {
    if phi.is_flagged() {
        maximize_holevo_flagged_seeded(phi, opts, warm)
    } else {
        maximize_holevo_seeded(phi, opts, warm)
    }
}

/// Optimization restricted to ensembles of product states across blocks
/// of consecutive input factors; `block_factors[i]` is the number of
/// factors in block `i`.
pub fn maximize_holevo_product(
    phi: &KrausChannel,
    block_factors: &[usize],
    opts: &HolevoOptions,
) -> Result<HolevoEstimate> {
    guard(phi)?;
    let dims = phi.in_shape().factors();
    if block_factors.iter().sum::<usize>() != dims.len() || block_factors.contains(&0) {
        return Err(Error::DimensionMismatch(format!(
            "blocks {block_factors:?} do not partition {} input factors",
            dims.len()
        )));
    }
    let mut block_dims = Vec::with_capacity(block_factors.len());
    let mut start = 0;
    for &b in block_factors {
        block_dims.push(dims[start..start + b].iter().product());
        start += b;
    }
    let problem = if phi.is_flagged() { Problem::flagged(phi)? } else { Problem::naive(phi) };
    run(&problem, opts, HolevoPath::Product, block_dims, Vec::new())
}

/// How a potential Holevo capacity is obtained.
#[derive(Clone, Debug)]
pub enum ChiPotSpec {
    Declared(f64),
    StronglyAdditive,
    AssistedSearch(Vec<KrausChannel>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiPotTag {
    Exact,
    ExactByDeclaration,
    LowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiPotValue {
    pub value: f64,
    pub tag: ChiPotTag,
}

/// Potential Holevo capacity according to `spec`. Constant channels are
/// exactly 0 unless a value is declared.
pub fn chi_pot(phi: &KrausChannel, spec: &ChiPotSpec, opts: &HolevoOptions) -> Result<ChiPotValue> {
    if let ChiPotSpec::Declared(v) = spec {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Unresolvable(format!("declared potential capacity {v}")));
        }
        return Ok(ChiPotValue { value: *v, tag: ChiPotTag::Exact });
    }
    if phi.constant_output().is_some() {
        return Ok(ChiPotValue { value: 0.0, tag: ChiPotTag::Exact });
    }
    match spec {
        ChiPotSpec::Declared(_) => unreachable!(),
        ChiPotSpec::StronglyAdditive => Ok(ChiPotValue {
            value: maximize_holevo_auto(phi, opts, &[])?.value,
            tag: ChiPotTag::ExactByDeclaration,
        }),
        ChiPotSpec::AssistedSearch(family) => {
            if family.is_empty() {
                return Err(Error::Unresolvable("assisted search with an empty family".into()));
            }
            let own = maximize_holevo_auto(phi, opts, &[])?;
            let mut best_gain = f64::NEG_INFINITY;
            for psi in family {
                let other = maximize_holevo_auto(psi, opts, &[])?;
                let warm = WarmStart::from_estimate(&own).product(&WarmStart::from_estimate(&other));
                let joint = phi.tensor(psi)?;
                let j = maximize_holevo_auto(&joint, opts, &[warm])?;
                best_gain = best_gain.max(j.value - other.value);
            }
            Ok(ChiPotValue { value: best_gain.max(0.0), tag: ChiPotTag::LowerBound })
        }
    }
}

/// Checks a declared potential capacity against the channel's own
/// estimate.
pub fn validate_declared(phi: &KrausChannel, declared: f64, opts: &HolevoOptions) -> Result<f64> {
    let est = maximize_holevo_auto(phi, opts, &[])?.value;
    if declared < est - 1e-6 {
        return Err(Error::Unresolvable(format!(
            "declared value {declared} is below the estimate {est}"
        )));
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationProbe {
    pub m: usize,
    pub chi_single: f64,
    pub chi_m: f64,
    pub per_use: f64,
    /// `chi_m / m - chi_single`
    pub gap: f64,
}

/// Per-use Holevo estimate of `Phi^{⊗m}` for `m` in {1, 2}; the two-copy
/// run is seeded with the product of the single-copy optimum.
pub fn regularization_probe(phi: &KrausChannel, m: usize, opts: &HolevoOptions) -> Result<RegularizationProbe> {
    if !(1..=2).contains(&m) {
        return Err(Error::OutOfRange(format!("m = {m}, expected 1 or 2")));
    }
    let single = maximize_holevo_auto(phi, opts, &[])?;
    if m == 1 {
        return Ok(RegularizationProbe {
            m,
            chi_single: single.value,
            chi_m: single.value,
            per_use: single.value,
            gap: 0.0,
        });
    }
    let joint = phi.tensor(phi)?;
    guard(&joint)?;
    let w = WarmStart::from_estimate(&single);
    let est = maximize_holevo_auto(&joint, opts, &[w.product(&w)])?;
    let per_use = est.value / m as f64;
    Ok(RegularizationProbe { m, chi_single: single.value, chi_m: est.value, per_use, gap: per_use - single.value })
}

/// Holevo quantity of one fixed ensemble through the heralded channels
/// `Z_k(Phi_1..Phi_n)` for every `k` in `ks` (0 allowed).
pub fn heralded_information_profile(
    phis: &[KrausChannel],
    sigma: &DensityOperator,
    e: &CQEnsemble,
    ks: &[usize],
) -> Result<Vec<(usize, f64)>> {
    ks.iter()
        .map(|&k| {
            let z = heralded_with_k(phis, k, sigma)?;
            Ok((k, holevo_of_ensemble(&z, e)?))
        })
        .collect()
}
