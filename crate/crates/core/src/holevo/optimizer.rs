//! Alternating ascent: pure-state gradient steps, then Blahut-Arimoto
//! updates of the probabilities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{AvgData, Problem, StateData};
use crate::qcore::linalg::{CVector, C64};
use crate::qcore::random::{derive_seed, random_unit_vector, rng};

/// Consecutive low-improvement iterations required to stop.
const PATIENCE: usize = 5;
const BA_TOL: f64 = 1e-8;
const BA_MAX: usize = 200;

/// Pure-state ensemble; each state is a tensor product of its blocks
/// (a single block when unrestricted).
#[derive(Clone, Debug)]
pub(crate) struct PureEnsemble {
    pub probs: Vec<f64>,
    pub blocks: Vec<Vec<CVector>>,
}

impl PureEnsemble {
    pub fn full_vectors(&self) -> Vec<CVector> {
        self.blocks.iter().map(|b| kron_all(b)).collect()
    }
}

pub(crate) fn kron_all(parts: &[CVector]) -> CVector {
    let mut acc = CVector::from_element(1, C64::new(1.0, 0.0));
    for p in parts {
        acc = acc.kronecker(p);
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub index: usize,
    pub warm: bool,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct RestartOutcome {
    pub trace: RestartTrace,
    pub ensemble: PureEnsemble,
    pub history: Vec<f64>,
}

pub(crate) struct Settings {
    pub tol: f64,
    pub max_iters: usize,
    /// block dimensions for product-restricted ensembles
    pub block_dims: Vec<usize>,
}

struct Current {
    ens: PureEnsemble,
    full: Vec<CVector>,
    data: Vec<StateData>,
    avg: AvgData,
    value: f64,
}

impl Current {
    fn new(problem: &Problem, ens: PureEnsemble) -> Self {
        let full = ens.full_vectors();
        let data: Vec<StateData> = full.iter().map(|v| problem.state_data(v)).collect();
        let avg = problem.avg_data(&ens.probs, &data);
        let value = problem.value(&ens.probs, &data, &avg);
        Self { ens, full, data, avg, value }
    }
}

pub(crate) fn random_ensemble(size: usize, block_dims: &[usize], seed: u64) -> PureEnsemble {
    let mut r = rng(seed);
    let blocks = (0..size)
        .map(|_| block_dims.iter().map(|&d| random_unit_vector(d, &mut r)).collect())
        .collect();
    PureEnsemble { probs: vec![1.0 / size as f64; size], blocks }
}

/// Gradient of `<psi|G|psi>` with respect to block `g` of a product vector,
/// given `w = G psi`.
fn block_gradient(w: &CVector, blocks: &[CVector], g: usize) -> CVector {
    let left = kron_all(&blocks[..g]);
    let right = kron_all(&blocks[g + 1..]);
    let mid = blocks[g].len();
    let (nl, nr) = (left.len(), right.len());
    CVector::from_fn(mid, |m, _| {
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..nl {
            for r in 0..nr {
                acc += left[l].conj() * right[r].conj() * w[l * mid * nr + m * nr + r];
            }
        }
        acc
    })
}

/// One projected gradient step on all states with backtracking.
fn state_step(problem: &Problem, cur: Current, step: &mut f64) -> (Current, bool) {
    let mut dirs: Vec<Vec<CVector>> = Vec::with_capacity(cur.full.len());
    let mut norm2 = 0.0;
    for (x, psi) in cur.full.iter().enumerate() {
        let p = cur.ens.probs[x];
        let w = problem.lifted_gradient(psi, &cur.data[x], &cur.avg).scale(p);
        let blocks = &cur.ens.blocks[x];
        let d: Vec<CVector> = (0..blocks.len())
            .map(|g| {
                let grad = if blocks.len() == 1 { w.clone() } else { block_gradient(&w, blocks, g) };
                let overlap = blocks[g].dotc(&grad);
                grad - &blocks[g] * overlap
            })
            .collect();
        norm2 += d.iter().map(|v| v.norm_squared()).sum::<f64>();
        dirs.push(d);
    }
    if norm2 < 1e-30 {
        return (cur, false);
    }
    let scale = 1.0 / norm2.sqrt();
    for _ in 0..40 {
        let t = *step * scale;
        let blocks: Vec<Vec<CVector>> = cur
            .ens
            .blocks
            .iter()
            .zip(&dirs)
            .map(|(bs, ds)| {
                bs.iter()
                    .zip(ds)
                    .map(|(b, d)| {
                        let v = b + d.scale(t);
                        let n = v.norm();
                        v.unscale(n)
                    })
                    .collect()
            })
            .collect();
        let cand = Current::new(problem, PureEnsemble { probs: cur.ens.probs.clone(), blocks });
        if cand.value > cur.value {
            *step = (*step * 1.5).min(2.0);
            return (cand, true);
        }
        *step *= 0.5;
        if *step < 1e-14 {
            break;
        }
    }
    *step = step.max(1e-6);
    (cur, false)
}

/// Blahut-Arimoto iterations with states fixed; never lowers the value.
fn prob_step(problem: &Problem, mut cur: Current) -> Current {
    for _ in 0..BA_MAX {
        let d = problem.divergences(&cur.data, &cur.avg);
        let dmax = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> =
            cur.ens.probs.iter().zip(&d).map(|(p, dx)| p * (dx - dmax).exp2()).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        let avg = problem.avg_data(&probs, &cur.data);
        let value = problem.value(&probs, &cur.data, &avg);
        if value <= cur.value {
            break;
        }
        let gain = value - cur.value;
        cur.ens.probs = probs;
        cur.avg = avg;
        cur.value = value;
        if gain < BA_TOL {
            break;
        }
    }
    cur
}

pub(crate) fn run_restart(
    problem: &Problem,
    init: PureEnsemble,
    settings: &Settings,
    index: usize,
    warm: bool,
) -> RestartOutcome {
    let mut cur = Current::new(problem, init);
    let mut history = vec![cur.value];
    let mut step = 0.5;
    let mut quiet = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_iters {
        iterations += 1;
        let before = cur.value;
        let (next, _) = state_step(problem, cur, &mut step);
        cur = prob_step(problem, next);
        history.push(cur.value);
        if cur.value - before < settings.tol * 1e-2 {
            quiet += 1;
            if quiet >= PATIENCE {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    RestartOutcome {
        trace: RestartTrace { index, warm, value: cur.value, iterations, converged },
        ensemble: cur.ens,
        history,
    }
}

/// Runs warm starts (indices first) and seeded random restarts in
/// parallel; the best value wins, ties going to the lowest index.
pub(crate) fn optimize(
    problem: &Problem,
    settings: &Settings,
    ensemble_size: usize,
    restarts: usize,
    seed: u64,
    warm: Vec<PureEnsemble>,
) -> Vec<RestartOutcome> {
    let mut inits: Vec<(PureEnsemble, bool)> = warm.into_iter().map(|e| (e, true)).collect();
    inits.extend((0..restarts).map(|i| {
        (random_ensemble(ensemble_size, &settings.block_dims, derive_seed(seed, i as u64)), false)
    }));
    inits
        .into_par_iter()
        .enumerate()
        .map(|(i, (e, warm))| run_restart(problem, e, settings, i, warm))
        .collect()
}

pub(crate) fn best(outcomes: &[RestartOutcome]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        match best {
            Some(b) if outcomes[b].trace.value >= o.trace.value => {}
            _ => best = Some(i),
        }
    }
    best
}
