//! Separable approximations `sigma = sum_i q_i alpha_i ⊗ beta_i`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bipartite;
use crate::error::{Error, Result};
use crate::qcore::linalg::{eigh, hermitian_fn, partial_trace_raw, trace_norm, CMatrix, C64};
use crate::qcore::random::{derive_seed, ginibre, rng};
use crate::qcore::DensityOperator;

/// Weights and local states `(q, alpha, beta)`.
type Decomposition = (Vec<f64>, Vec<CMatrix>, Vec<CMatrix>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparableOptions {
    /// Number of product terms; defaults to `(|A| |B|)^2`.
    pub cardinality: Option<usize>,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SeparableOptions {
    fn default() -> Self {
        Self { cardinality: None, restarts: 4, tol: 1e-12, max_iters: 400, seed: 0 }
    }
}

/// Best separable state found and its trace-norm distance `||rho - sigma||_1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparableApprox {
    pub weights: Vec<f64>,
    pub alphas: Vec<CMatrix>,
    pub betas: Vec<CMatrix>,
    pub distance: f64,
    pub cardinality: usize,
    pub source: String,
    pub restart_distances: Vec<f64>,
}

impl SeparableApprox {
    pub fn assembled(&self) -> CMatrix {
        assemble(&self.weights, &self.alphas, &self.betas)
    }
}

fn assemble(q: &[f64], alphas: &[CMatrix], betas: &[CMatrix]) -> CMatrix {
    let n = alphas[0].nrows() * betas[0].nrows();
    let mut s = CMatrix::zeros(n, n);
    for ((w, a), b) in q.iter().zip(alphas).zip(betas) {
        if *w > 0.0 {
            s += a.kronecker(b).scale(*w);
        }
    }
    s
}

#[derive(Clone)]
struct Params {
    w: Vec<f64>,
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
}

fn normalized(x: &CMatrix) -> (CMatrix, f64) {
    let m = x * x.adjoint();
    let t = m.trace().re;
    (m.unscale(t), t)
}

fn softmax(w: &[f64]) -> Vec<f64> {
    let mx = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = w.iter().map(|x| (x - mx).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

struct Decoded {
    q: Vec<f64>,
    alphas: Vec<CMatrix>,
    betas: Vec<CMatrix>,
    ta: Vec<f64>,
    tb: Vec<f64>,
    sigma: CMatrix,
}

fn decode(p: &Params) -> Decoded {
    let q = softmax(&p.w);
    let (alphas, ta): (Vec<_>, Vec<_>) = p.a.iter().map(normalized).unzip();
    let (betas, tb): (Vec<_>, Vec<_>) = p.b.iter().map(normalized).unzip();
    let sigma = assemble(&q, &alphas, &betas);
    Decoded { q, alphas, betas, ta, tb, sigma }
}

#[derive(Clone, Copy, PartialEq)]
enum Loss {
    HilbertSchmidt,
    Trace,
}

fn loss_and_dsigma(rho: &CMatrix, sigma: &CMatrix, loss: Loss) -> (f64, CMatrix) {
    let diff = rho - sigma;
    match loss {
        Loss::HilbertSchmidt => (diff.norm_squared(), diff.scale(-2.0)),
        Loss::Trace => {
            let (vals, vecs) = eigh(&diff);
            let l = vals.iter().map(|v| v.abs()).sum();
            (l, hermitian_fn(&vals, &vecs, |v| -v.signum()))
        }
    }
}

fn loss_only(rho: &CMatrix, sigma: &CMatrix, loss: Loss) -> f64 {
    let diff = rho - sigma;
    match loss {
        Loss::HilbertSchmidt => diff.norm_squared(),
        Loss::Trace => trace_norm(&diff).unwrap_or(f64::INFINITY),
    }
}

/// Partial traces of `G (I ⊗ beta)` over B and of `G (alpha ⊗ I)` over A.
fn local_gradients(g: &CMatrix, alpha: &CMatrix, beta: &CMatrix) -> (CMatrix, CMatrix) {
    let (da, db) = (alpha.nrows(), beta.nrows());
    let ga = partial_trace_raw(&(g * CMatrix::identity(da, da).kronecker(beta)), &[da, db], &[0]);
    let gb = partial_trace_raw(&(g * alpha.kronecker(&CMatrix::identity(db, db))), &[da, db], &[1]);
    (ga, gb)
}

fn gradient(p: &Params, d: &Decoded, g: &CMatrix) -> Params {
    let r = p.w.len();
    let mut gq = vec![0.0; r];
    let mut ga = Vec::with_capacity(r);
    let mut gb = Vec::with_capacity(r);
    for i in 0..r {
        let prod = d.alphas[i].kronecker(&d.betas[i]);
        gq[i] = (g.component_mul(&prod.transpose())).sum().re;
        let (ha, hb) = local_gradients(g, &d.alphas[i], &d.betas[i]);
        let ha = ha.scale(d.q[i]);
        let hb = hb.scale(d.q[i]);
        let ca = (ha.component_mul(&d.alphas[i].transpose())).sum();
        let cb = (hb.component_mul(&d.betas[i].transpose())).sum();
        ga.push((&ha - CMatrix::identity(ha.nrows(), ha.nrows()) * ca) * &p.a[i] / C64::new(d.ta[i], 0.0));
        gb.push((&hb - CMatrix::identity(hb.nrows(), hb.nrows()) * cb) * &p.b[i] / C64::new(d.tb[i], 0.0));
    }
    let mean: f64 = d.q.iter().zip(&gq).map(|(q, g)| q * g).sum();
    let gw = d.q.iter().zip(&gq).map(|(q, g)| q * (g - mean)).collect();
    Params { w: gw, a: ga, b: gb }
}

fn axpy(p: &Params, g: &Params, t: f64) -> Params {
    Params {
        w: p.w.iter().zip(&g.w).map(|(x, y)| x - t * y).collect(),
        a: p.a.iter().zip(&g.a).map(|(x, y)| x - y.scale(t)).collect(),
        b: p.b.iter().zip(&g.b).map(|(x, y)| x - y.scale(t)).collect(),
    }
}

fn norm2(g: &Params) -> f64 {
    g.w.iter().map(|x| x * x).sum::<f64>()
        + g.a.iter().map(|m| m.norm_squared()).sum::<f64>()
        + g.b.iter().map(|m| m.norm_squared()).sum::<f64>()
}

/// Backtracking descent; returns the best parameters for the trace norm
/// seen along the way.
fn descend(rho: &CMatrix, mut p: Params, loss: Loss, max_iters: usize, tol: f64) -> Params {
    let mut d = decode(&p);
    let mut value = loss_only(rho, &d.sigma, loss);
    let mut step = 1.0;
    for _ in 0..max_iters {
        let (_, ds) = loss_and_dsigma(rho, &d.sigma, loss);
        let g = gradient(&p, &d, &ds);
        let n2 = norm2(&g);
        if n2 < 1e-30 {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let cand = axpy(&p, &g, step);
            let cd = decode(&cand);
            let cv = loss_only(rho, &cd.sigma, loss);
            let enough = match loss {
                Loss::HilbertSchmidt => cv <= value - 1e-4 * step * n2,
                Loss::Trace => cv < value,
            };
            if enough {
                let gain = value - cv;
                p = cand;
                d = cd;
                value = cv;
                step = (step * 2.0).min(1e3);
                accepted = gain >= tol;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    p
}

fn product_of_marginals(ab: &DensityOperator) -> Decomposition {
    let a = partial_trace_raw(ab.matrix(), ab.dims(), &[0]);
    let b = partial_trace_raw(ab.matrix(), ab.dims(), &[1]);
    (vec![1.0], vec![a], vec![b])
}

/// Dephased state `sum_ab rho[ab,ab] |a><a| ⊗ |b><b|`; exact for
/// classical states.
fn dephased(ab: &DensityOperator) -> Decomposition {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let mut q = Vec::new();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    for a in 0..da {
        for b in 0..db {
            let w = ab.matrix()[(a * db + b, a * db + b)].re;
            if w > 0.0 {
                let mut x = CMatrix::zeros(da, da);
                x[(a, a)] = C64::new(1.0, 0.0);
                let mut y = CMatrix::zeros(db, db);
                y[(b, b)] = C64::new(1.0, 0.0);
                q.push(w);
                alphas.push(x);
                betas.push(y);
            }
        }
    }
    let z: f64 = q.iter().sum();
    q.iter_mut().for_each(|w| *w /= z);
    (q, alphas, betas)
}

/// Best separable approximation found; the reported distance is an upper
/// bound on the trace-norm distance of `rho_AB` to the separable set.
pub fn separable_approx(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    opts: &SeparableOptions,
) -> Result<SeparableApprox> {
    let ab = bipartite(rho, a, b)?;
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let r = opts.cardinality.unwrap_or((da * db) * (da * db));
    if r < 1 {
        return Err(Error::OutOfRange("cardinality must be at least 1".into()));
    }
    let target = ab.matrix().clone();

    let runs: Vec<(Vec<f64>, Vec<CMatrix>, Vec<CMatrix>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let mut g = rng(derive_seed(opts.seed, i as u64));
            let p = Params {
                w: vec![0.0; r],
                a: (0..r).map(|_| ginibre(da, da, &mut g)).collect(),
                b: (0..r).map(|_| ginibre(db, db, &mut g)).collect(),
            };
            let p = descend(&target, p, Loss::HilbertSchmidt, opts.max_iters, opts.tol);
            let p = descend(&target, p, Loss::Trace, opts.max_iters, opts.tol);
            let d = decode(&p);
            (d.q, d.alphas, d.betas)
        })
        .collect();

    let mut candidates: Vec<(String, Decomposition)> = vec![
        ("product_of_marginals".into(), product_of_marginals(&ab)),
        ("dephased".into(), dephased(&ab)),
    ];
    let mut restart_distances = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        restart_distances.push(trace_norm(&(&target - assemble(&run.0, &run.1, &run.2)))?);
        candidates.push((format!("restart {i}"), run));
    }
    let mut best: Option<SeparableApprox> = None;
    for (source, (q, alphas, betas)) in candidates {
        let distance = trace_norm(&(&target - assemble(&q, &alphas, &betas)))?;
        if best.as_ref().is_none_or(|b| distance < b.distance) {
            let cardinality = q.len();
            best = Some(SeparableApprox {
                weights: q,
                alphas,
                betas,
                distance,
                cardinality,
                source,
                restart_distances: Vec::new(),
            });
        }
    }
    let mut best = best.expect("at least the marginal candidate");
    best.restart_distances = restart_distances;
    Ok(best)
}

/// Lower bound on `min_sigma PPT ||rho - sigma||_1` from the witness
/// `W = P^{T_B}`, `P` the projector onto the negative part of `rho^{T_B}`:
/// `N / ||W||_inf` with `N` the negativity sum. Exact distance bound to the
/// separable set for 2x2 and 2x3.
pub fn ppt_witness_lower_bound(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<f64> {
    let ab = bipartite(rho, a, b)?;
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let pt = partial_transpose_b(ab.matrix(), da, db);
    let (vals, vecs) = eigh(&pt);
    let negativity: f64 = vals.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    if negativity <= 1e-15 {
        return Ok(0.0);
    }
    let p = hermitian_fn(&vals, &vecs, |v| if v < 0.0 { 1.0 } else { 0.0 });
    let w = partial_transpose_b(&p, da, db);
    let (wv, _) = eigh(&w);
    let wnorm = wv.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(negativity / wnorm)
}

pub(crate) fn partial_transpose_b(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    CMatrix::from_fn(da * db, da * db, |r, c| {
        let (a1, b1) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        m[(a1 * db + b2, a2 * db + b1)]
    })
}

