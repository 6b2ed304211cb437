//! Certified upper bounds on squashed entanglement from explicit
//! extensions, separable approximations, and the related harnesses.

mod extension;
mod harness;
mod separable;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use harness::{
    builtin_monogamy_suite, faithfulness_consistency, heralded_averaging_check, monogamy_harness,
    HeraldInput, MonogamyCase, FAITHFULNESS_CONSTANT, REPRODUCTION_TOL,
};
pub use separable::{ppt_witness_lower_bound, separable_approx, SeparableApprox, SeparableOptions};

use crate::channels::KrausChannel;
use crate::entropy::{conditional_mutual_information, mutual_information};
use crate::error::{Error, Result};
use crate::qcore::linalg::{eigh, max_abs_diff, reduce_ordered, CMatrix, C64, ZERO};
use crate::qcore::random::derive_seed;
use crate::qcore::{DensityOperator, SpaceShape};
use extension::ExtProblem;

/// Largest `|A| |B|` accepted.
pub const MAX_AB_DIM: usize = 36;
/// Marginal tolerance for reported extensions.
pub const EXTENSION_TOL: f64 = 1e-8;
/// Extensions larger than this are not materialized in the result.
const KEEP_EXTENSION_DIM: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsqOptions {
    /// Dimension of `C`; defaults to `|A| |B|`.
    pub ext_dim: Option<usize>,
    pub kraus_rank: usize,
    pub restarts: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for EsqOptions {
    fn default() -> Self {
        Self { ext_dim: None, kraus_rank: 2, restarts: 8, tol: 1e-10, max_iters: 300, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtensionKind {
    /// trivial extension, value `½ I(A;B)`
    Baseline,
    CopyA,
    CopyB,
    Isometry { restart: usize },
    Seeded { index: usize },
    /// sum of per-flag-sector bounds
    FlagConditioned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsqRestart {
    pub index: usize,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBound {
    pub label: String,
    pub weight: f64,
    pub value: f64,
}

/// Upper bound on `E_sq(A;B)` certified by an explicit extension.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EsqUpperBound {
    pub value: f64,
    /// `½ I(A;B)`
    pub baseline: f64,
    pub method: ExtensionKind,
    pub ext_dim: usize,
    pub kraus_rank: usize,
    pub marginal_error: f64,
    pub seed: u64,
    pub restarts: Vec<EsqRestart>,
    pub sectors: Vec<SectorBound>,
    /// `rho_ABC` on factors `[A, B, C]` when small enough to keep.
    #[serde(skip)]
    pub extension: Option<DensityOperator>,
}

/// `½ I(A;B|C)` of an explicit extension on `[dA, dB, dC]`.
fn half_cmi(ext: &DensityOperator) -> Result<f64> {
    Ok(0.5 * conditional_mutual_information(ext, &[0], &[1], &[2])?)
}

/// Reduced state on `A ++ B` with `A` and `B` each merged into one factor.
fn bipartite(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<DensityOperator> {
    let mut keep = a.to_vec();
    keep.extend_from_slice(b);
    rho.shape().check_selection(&keep)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySelection);
    }
    let da: usize = a.iter().map(|&f| rho.dims()[f]).product();
    let db: usize = b.iter().map(|&f| rho.dims()[f]).product();
    if da * db > MAX_AB_DIM {
        return Err(Error::GuardExceeded(format!("|A||B| = {} exceeds {MAX_AB_DIM}", da * db)));
    }
    let m = reduce_ordered(rho.matrix(), rho.dims(), &keep);
    Ok(DensityOperator::from_trusted(SpaceShape::new(vec![da, db])?, m))
}

/// Copy of `A` (or `B`) in the computational basis; only an extension when
/// the state is block diagonal in that basis.
fn copy_extension(ab: &DensityOperator, copy_a: bool) -> DensityOperator {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let dc = if copy_a { da } else { db };
    let n = da * db * dc;
    let m = ab.matrix();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..da * db {
        for j in 0..da * db {
            let (ci, cj) = if copy_a { (i / db, j / db) } else { (i % db, j % db) };
            if ci == cj {
                out[(i * dc + ci, j * dc + cj)] = m[(i, j)];
            }
        }
    }
    DensityOperator::from_trusted(SpaceShape::new(vec![da, db, dc]).expect("positive dims"), out)
}

fn marginal_error(ext: &DensityOperator, ab: &DensityOperator) -> f64 {
    let m = crate::qcore::linalg::partial_trace_raw(ext.matrix(), ext.dims(), &[0, 1]);
    max_abs_diff(&m, ab.matrix())
}

/// Merges the factors of a seed extension into `[dA, dB, dC]`.
fn normalize_seed(seed: &DensityOperator, da: usize, db: usize) -> Result<DensityOperator> {
    let d = seed.dim();
    if !d.is_multiple_of(da * db) {
        return Err(Error::DimensionMismatch(format!("seed extension of dimension {d}")));
    }
    let dc = d / (da * db);
    Ok(DensityOperator::from_trusted(SpaceShape::new(vec![da, db, dc])?, seed.matrix().clone()))
}

fn purification(ab: &DensityOperator) -> CMatrix {
    let (vals, vecs) = eigh(ab.matrix());
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-14).collect();
    CMatrix::from_fn(ab.dim(), keep.len().max(1), |r, c| {
        if keep.is_empty() {
            ZERO
        } else {
            vecs[(r, keep[c])] * C64::new(vals[keep[c]].sqrt(), 0.0)
        }
    })
}

/// Upper bound on `E_sq(A;B)_rho`.
pub fn esq_upper(rho: &DensityOperator, a: &[usize], b: &[usize], opts: &EsqOptions) -> Result<EsqUpperBound> {
    esq_upper_seeded(rho, a, b, opts, &[])
}

/// As [`esq_upper`], also evaluating the given extensions (factors
/// `[A.., B.., C..]`), each re-checked against the marginal.
pub fn esq_upper_seeded(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    opts: &EsqOptions,
    seeds: &[DensityOperator],
) -> Result<EsqUpperBound> {
    let ab = bipartite(rho, a, b)?;
    esq_bipartite(&ab, opts, seeds)
}

fn esq_bipartite(ab: &DensityOperator, opts: &EsqOptions, seeds: &[DensityOperator]) -> Result<EsqUpperBound> {
    let (da, db) = (ab.dims()[0], ab.dims()[1]);
    let dc = opts.ext_dim.unwrap_or(da * db);
    if dc == 0 || opts.kraus_rank == 0 {
        return Err(Error::OutOfRange("extension dimension and Kraus rank must be positive".into()));
    }
    let baseline = (0.5 * mutual_information(ab, &[0], &[1])?).max(0.0);
    let mut best = EsqUpperBound {
        value: baseline,
        baseline,
        method: ExtensionKind::Baseline,
        ext_dim: 1,
        kraus_rank: 1,
        marginal_error: 0.0,
        seed: opts.seed,
        restarts: Vec::new(),
        sectors: Vec::new(),
        extension: None,
    };
    if baseline <= 1e-12 {
        return Ok(best);
    }

    let mut candidates: Vec<(ExtensionKind, DensityOperator)> = Vec::new();
    for (kind, copy_a) in [(ExtensionKind::CopyA, true), (ExtensionKind::CopyB, false)] {
        let ext = copy_extension(ab, copy_a);
        if marginal_error(&ext, ab) <= EXTENSION_TOL {
            candidates.push((kind, ext));
        }
    }
    for (index, s) in seeds.iter().enumerate() {
        let ext = normalize_seed(s, da, db)?;
        if marginal_error(&ext, ab) <= EXTENSION_TOL {
            candidates.push((ExtensionKind::Seeded { index }, ext));
        }
    }
    for (kind, ext) in candidates {
        let v = half_cmi(&ext)?;
        if v < best.value {
            best.value = v;
            best.method = kind;
            best.ext_dim = ext.dims()[2];
            best.kraus_rank = 0;
            best.marginal_error = marginal_error(&ext, ab);
            best.extension = Some(ext);
        }
    }

    let psi = purification(ab);
    let problem = ExtProblem { psi, da, db, dc, r: opts.kraus_rank };
    if problem.v_rows() < problem.de() {
        return Err(Error::OutOfRange(format!(
            "extension {dc} x rank {} cannot host a purifying space of dimension {}",
            opts.kraus_rank,
            problem.de()
        )));
    }
    let runs: Vec<(CMatrix, f64, usize)> = (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let v0 = problem.random_isometry(derive_seed(opts.seed, i as u64));
            problem.descend(v0, opts.tol, opts.max_iters)
        })
        .collect();
    best.restarts = runs
        .iter()
        .enumerate()
        .map(|(index, (_, value, iterations))| EsqRestart { index, value: *value, iterations: *iterations })
        .collect();
    let mut winner: Option<usize> = None;
    for (i, (_, v, _)) in runs.iter().enumerate() {
        if *v < best.value && winner.is_none_or(|w| *v < runs[w].1) {
            winner = Some(i);
        }
    }
    if let Some(w) = winner {
        let v = &runs[w].0;
        let m = problem.build_m(v);
        let err = max_abs_diff(&problem.marginal(&m), ab.matrix());
        if err <= EXTENSION_TOL {
            best.value = runs[w].1;
            best.method = ExtensionKind::Isometry { restart: w };
            best.ext_dim = dc;
            best.kraus_rank = opts.kraus_rank;
            best.marginal_error = err;
            let n = da * db * dc;
            best.extension = (n <= KEEP_EXTENSION_DIM).then(|| {
                DensityOperator::from_trusted(
                    SpaceShape::new(vec![da, db, dc]).expect("positive dims"),
                    &m * m.adjoint(),
                )
            });
        }
    }
    best.value = best.value.max(0.0);
    Ok(best)
}

/// Bound on `E_sq(B0; B Y)` for the output of `Phi` applied to the factors
/// `acting_on` of `rho`; all other factors form `B0`. For flagged channels
/// the flag is conditioned on first: the bound is `sum_y p_y E_y`.
pub fn esq_upper_through_channel(
    rho: &DensityOperator,
    phi: &KrausChannel,
    acting_on: &[usize],
    opts: &EsqOptions,
) -> Result<EsqUpperBound> {
    rho.shape().check_selection(acting_on)?;
    let b0: Vec<usize> = (0..rho.dims().len()).filter(|f| !acting_on.contains(f)).collect();
    if b0.is_empty() {
        return Err(Error::EmptySelection);
    }
    let Some(flags) = phi.flags() else {
        let out = phi.apply(rho, acting_on)?;
        let (b0_out, b_out) = split_output(&b0, acting_on, phi.out_shape().len());
        return esq_upper(&out, &b0_out, &b_out, opts);
    };

    let mut sectors = Vec::with_capacity(flags.len());
    let mut total = 0.0;
    match flags.reductions() {
        Some(reductions) => {
            for (label, red) in flags.labels().iter().zip(reductions) {
                let value = match &red.channel {
                    Some(ch) if red.weight > 0.0 && !red.keep.is_empty() => {
                        let keep: Vec<usize> = red.keep.iter().map(|&k| acting_on[k]).collect();
                        let mut factors = b0.clone();
                        factors.extend_from_slice(&keep);
                        let reduced = DensityOperator::from_trusted(
                            rho.shape().select(&factors),
                            reduce_ordered(rho.matrix(), rho.dims(), &factors),
                        );
                        let local: Vec<usize> = (b0.len()..factors.len()).collect();
                        let out = ch.apply(&reduced, &local)?;
                        let b0_out: Vec<usize> = (0..b0.len()).collect();
                        let b_out: Vec<usize> = (b0.len()..out.dims().len()).collect();
                        esq_upper(&out, &b0_out, &b_out, opts)?.value
                    }
                    _ => 0.0,
                };
                total += red.weight * value;
                sectors.push(SectorBound { label: label.to_string(), weight: red.weight, value });
            }
        }
        None => {
            let out = phi.apply(rho, acting_on)?;
            let (b0_out, b_out) = split_output(&b0, acting_on, phi.out_shape().len());
            let flag = *b_out.last().expect("flag factor");
            let quantum: Vec<usize> = b_out[..b_out.len() - 1].to_vec();
            for (y, label) in flags.labels().iter().enumerate() {
                let (p, cond) = condition_on(&out, flag, y)?;
                let value = if p > 1e-14 && !quantum.is_empty() {
                    let cond = cond.expect("nonzero sector");
                    let (b0c, qc) = after_removal(&b0_out, &quantum, flag);
                    esq_upper(&cond, &b0c, &qc, opts)?.value
                } else {
                    0.0
                };
                total += p * value;
                sectors.push(SectorBound { label: label.to_string(), weight: p, value });
            }
        }
    }

    // the unconditioned baseline is also a valid bound
    let out = phi.apply(rho, acting_on)?;
    let (b0_out, b_out) = split_output(&b0, acting_on, phi.out_shape().len());
    let baseline = if b0_out.len() + b_out.len() == out.dims().len()
        && b0_out.iter().chain(&b_out).map(|&f| out.dims()[f]).product::<usize>() <= 4096
    {
        (0.5 * mutual_information(&out, &b0_out, &b_out)?).max(0.0)
    } else {
        f64::INFINITY
    };
    let (value, method) = if baseline < total {
        (baseline, ExtensionKind::Baseline)
    } else {
        (total, ExtensionKind::FlagConditioned)
    };
    Ok(EsqUpperBound {
        value,
        baseline,
        method,
        ext_dim: opts.ext_dim.unwrap_or(0),
        kraus_rank: opts.kraus_rank,
        marginal_error: 0.0,
        seed: opts.seed,
        restarts: Vec::new(),
        sectors,
        extension: None,
    })
}

/// Factor positions of `B0` and of the channel output after substitution.
fn split_output(b0: &[usize], acting_on: &[usize], out_len: usize) -> (Vec<usize>, Vec<usize>) {
    let min_acting = *acting_on.iter().min().expect("nonempty");
    let pos = b0.iter().filter(|&&f| f < min_acting).count();
    let b0_out: Vec<usize> = (0..b0.len()).map(|i| if i < pos { i } else { i + out_len }).collect();
    let b_out: Vec<usize> = (pos..pos + out_len).collect();
    (b0_out, b_out)
}

/// Renumbers factor lists after removing factor `removed`.
fn after_removal(a: &[usize], b: &[usize], removed: usize) -> (Vec<usize>, Vec<usize>) {
    let f = |v: &[usize]| v.iter().map(|&i| if i > removed { i - 1 } else { i }).collect();
    (f(a), f(b))
}

/// Probability of flag value `y` on factor `flag` and the normalized
/// conditional state on the remaining factors.
fn condition_on(rho: &DensityOperator, flag: usize, y: usize) -> Result<(f64, Option<DensityOperator>)> {
    let dims = rho.dims();
    let stride: usize = dims[flag + 1..].iter().product();
    let idx: Vec<usize> = (0..rho.dim()).filter(|i| (i / stride) % dims[flag] == y).collect();
    let m = CMatrix::from_fn(idx.len(), idx.len(), |r, c| rho.matrix()[(idx[r], idx[c])]);
    let p = m.trace().re;
    if p <= 1e-14 {
        return Ok((p, None));
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|&f| f != flag).collect();
    let shape = rho.shape().select(&rest);
    Ok((p, Some(DensityOperator::from_trusted(shape, m.unscale(p)))))
}
