use crate::error::{Error, Result};
use crate::qcore::linalg::{eigh, CMatrix, C64, ONE, ZERO};
use crate::qcore::random::{haar_isometry, rng};
use crate::qcore::{DensityOperator, SpaceShape};

use super::{FlagLabel, KrausChannel, SectorReduction};

/// Largest total output dimension a heralded construction may produce.
pub const MAX_HERALDED_DIM: usize = 4096;

pub fn identity(d: usize) -> Result<KrausChannel> {
    let shape = SpaceShape::qudit(d)?;
    KrausChannel::new(format!("identity({d})"), shape.clone(), shape, vec![CMatrix::identity(d, d)])
}

/// Conjugation by a unitary.
pub fn unitary_channel(name: impl Into<String>, u: CMatrix) -> Result<KrausChannel> {
    if u.nrows() != u.ncols() {
        return Err(Error::NotSquare { rows: u.nrows(), cols: u.ncols() });
    }
    let shape = SpaceShape::qudit(u.nrows())?;
    KrausChannel::new(name, shape.clone(), shape, vec![u])
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::OutOfRange(format!("{what} = {p} outside [0,1]")));
    }
    Ok(())
}

/// Generalized Pauli (Weyl) operator `X^a Z^b`.
fn weyl(d: usize, a: usize, b: usize) -> CMatrix {
    let omega = 2.0 * std::f64::consts::PI / d as f64;
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[((j + a) % d, j)] = C64::from_polar(1.0, omega * (b * j) as f64);
    }
    m
}

/// `rho -> (1-p) rho + p I/d`.
pub fn depolarizing(d: usize, p: f64) -> Result<KrausChannel> {
    check_prob(p, "depolarizing p")?;
    let shape = SpaceShape::qudit(d)?;
    let d2 = (d * d) as f64;
    let mut kraus = vec![CMatrix::identity(d, d).scale((1.0 - p + p / d2).sqrt())];
    if p > 0.0 {
        for a in 0..d {
            for b in 0..d {
                if a != 0 || b != 0 {
                    kraus.push(weyl(d, a, b).scale((p / d2).sqrt()));
                }
            }
        }
    }
    KrausChannel::new(format!("depolarizing({d},{p})"), shape.clone(), shape, kraus)
}

/// Qubit dephasing `rho -> (1-p) rho + p Z rho Z`.
pub fn dephasing(p: f64) -> Result<KrausChannel> {
    check_prob(p, "dephasing p")?;
    let shape = SpaceShape::qudit(2)?;
    let mut z = CMatrix::identity(2, 2);
    z[(1, 1)] = -ONE;
    let kraus = vec![CMatrix::identity(2, 2).scale((1.0 - p).sqrt()), z.scale(p.sqrt())];
    KrausChannel::new(format!("dephasing({p})"), shape.clone(), shape, kraus)
}

pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_prob(gamma, "damping gamma")?;
    let shape = SpaceShape::qudit(2)?;
    let mut k0 = CMatrix::zeros(2, 2);
    k0[(0, 0)] = ONE;
    k0[(1, 1)] = C64::new((1.0 - gamma).sqrt(), 0.0);
    let mut k1 = CMatrix::zeros(2, 2);
    k1[(0, 1)] = C64::new(gamma.sqrt(), 0.0);
    KrausChannel::new(format!("amplitude_damping({gamma})"), shape.clone(), shape, vec![k0, k1])
}

/// Constant channel with output `sigma`; Kraus family `sqrt(l_j)|e_j><f_i|`.
pub fn trivial_channel(sigma: &DensityOperator, in_shape: SpaceShape) -> Result<KrausChannel> {
    let (vals, vecs) = eigh(sigma.matrix());
    let din = in_shape.dim();
    let mut kraus = Vec::new();
    for (j, &l) in vals.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let col = vecs.column(j).scale(l.sqrt());
        for i in 0..din {
            let mut k = CMatrix::zeros(sigma.dim(), din);
            k.column_mut(i).copy_from(&col);
            kraus.push(k);
        }
    }
    let ch = KrausChannel::new(format!("trivial({})", sigma.dim()), in_shape, sigma.shape().clone(), kraus)?;
    Ok(ch.with_constant_output(sigma.matrix().clone()))
}

/// Constant channel onto the maximally mixed state of dimension `d`.
pub fn trivial_channel_default(d: usize) -> Result<KrausChannel> {
    let shape = SpaceShape::qudit(d)?;
    trivial_channel(&DensityOperator::maximally_mixed(shape.clone()), shape)
        .map(|c| c.renamed(format!("trivial({d})")))
}

/// Appends a one-hot flag column to each Kraus operator.
fn flagged(k: &CMatrix, nflag: usize, y: usize) -> CMatrix {
    let mut e = CMatrix::zeros(nflag, 1);
    e[(y, 0)] = ONE;
    k.kronecker(&e)
}

fn check_sigma(sigma: &DensityOperator, out: &SpaceShape) -> Result<()> {
    if sigma.dims() != out.factors() {
        return Err(Error::DimensionMismatch(format!(
            "fixed state on {} but channel output is {}",
            sigma.shape(),
            out
        )));
    }
    Ok(())
}

/// `rho -> l Phi(rho) ⊗ |0><0| + (1-l) sigma ⊗ |1><1|`. Flag 0 is success.
pub fn erasure_channel(phi: &KrausChannel, lambda: f64, sigma: &DensityOperator) -> Result<KrausChannel> {
    check_prob(lambda, "erasure lambda")?;
    check_sigma(sigma, phi.out_shape())?;
    let theta = trivial_channel(sigma, phi.in_shape().clone())?;
    let mut kraus = Vec::new();
    if lambda > 0.0 {
        kraus.extend(phi.kraus().iter().map(|k| flagged(&k.scale(lambda.sqrt()), 2, 0)));
    }
    if lambda < 1.0 {
        kraus.extend(theta.kraus().iter().map(|k| flagged(&k.scale((1.0 - lambda).sqrt()), 2, 1)));
    }
    let mut out = phi.out_shape().factors().to_vec();
    out.push(2);
    let (keep, inform) = if phi.constant_output().is_some() {
        (Vec::new(), None)
    } else {
        ((0..phi.in_shape().len()).collect(), Some(phi.clone()))
    };
    let reductions = vec![
        SectorReduction { weight: lambda, keep, channel: inform },
        SectorReduction { weight: 1.0 - lambda, keep: vec![], channel: None },
    ];
    let ch = KrausChannel::new(
        format!("erasure({},{lambda})", phi.name()),
        phi.in_shape().clone(),
        SpaceShape::new(out)?,
        kraus,
    )?;
    ch.with_flags(
        vec![FlagLabel::Erasure { success: true }, FlagLabel::Erasure { success: false }],
        Some(reductions),
    )
}

/// Erasure channel with the maximally mixed fixed state.
pub fn erasure_channel_default(phi: &KrausChannel, lambda: f64) -> Result<KrausChannel> {
    let sigma = DensityOperator::maximally_mixed(phi.out_shape().clone());
    erasure_channel(phi, lambda, &sigma)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// `(1/C(n,k)) sum_R (Phi^R ⊗ Psi^{R^c})(rho) ⊗ |R><R|`.
pub fn flagged_switch_channel(phis: &[KrausChannel], psis: &[KrausChannel], k: usize) -> Result<KrausChannel> {
    if k == 0 || k > phis.len() {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", phis.len())));
    }
    switch_with_k(phis, psis, k)
}

pub(crate) fn switch_with_k(phis: &[KrausChannel], psis: &[KrausChannel], k: usize) -> Result<KrausChannel> {
    let n = phis.len();
    if n == 0 {
        return Err(Error::InvalidChannel("no channels given".into()));
    }
    if psis.len() != n {
        return Err(Error::DimensionMismatch(format!("{n} primary channels but {} alternatives", psis.len())));
    }
    if k > n {
        return Err(Error::OutOfRange(format!("k = {k} outside 0..={n}")));
    }
    for (j, (a, b)) in phis.iter().zip(psis).enumerate() {
        if a.in_shape().factors() != b.in_shape().factors() || a.out_shape().factors() != b.out_shape().factors() {
            return Err(Error::DimensionMismatch(format!(
                "position {}: {}→{} vs {}→{}",
                j + 1,
                a.in_shape(),
                a.out_shape(),
                b.in_shape(),
                b.out_shape()
            )));
        }
    }
    let sets = subsets(n, k);
    let nflag = sets.len();
    let qout: usize = phis.iter().map(|c| c.out_dim()).product();
    if qout * nflag > MAX_HERALDED_DIM {
        return Err(Error::GuardExceeded(format!(
            "heralded output dimension {} exceeds {MAX_HERALDED_DIM}",
            qout * nflag
        )));
    }

    let scale = (1.0 / nflag as f64).sqrt();
    let mut kraus = Vec::new();
    for (y, r) in sets.iter().enumerate() {
        let families: Vec<&[CMatrix]> =
            (0..n).map(|j| if r.contains(&j) { phis[j].kraus() } else { psis[j].kraus() }).collect();
        let mut acc = vec![CMatrix::from_element(1, 1, C64::new(scale, 0.0))];
        for fam in families {
            let mut next = Vec::with_capacity(acc.len() * fam.len());
            for a in &acc {
                for b in fam {
                    next.push(a.kronecker(b));
                }
            }
            acc = next;
        }
        kraus.extend(acc.iter().map(|m| flagged(m, nflag, y)));
    }

    let mut in_factors = Vec::new();
    let mut in_offsets = Vec::with_capacity(n);
    for c in phis {
        in_offsets.push(in_factors.len());
        in_factors.extend_from_slice(c.in_shape().factors());
    }
    let mut out_factors: Vec<usize> = phis.iter().flat_map(|c| c.out_shape().factors().to_vec()).collect();
    out_factors.push(nflag);

    let reductions = if psis.iter().all(|p| p.constant_output().is_some()) {
        let mut list = Vec::with_capacity(nflag);
        for r in &sets {
            let informative: Vec<usize> =
                r.iter().copied().filter(|&j| phis[j].constant_output().is_none()).collect();
            let keep: Vec<usize> = informative
                .iter()
                .flat_map(|&j| (0..phis[j].in_shape().len()).map(|f| f + in_offsets[j]).collect::<Vec<_>>())
                .collect();
            let channel = if informative.is_empty() {
                None
            } else {
                let chans: Vec<KrausChannel> = informative.iter().map(|&j| phis[j].clone()).collect();
                Some(KrausChannel::tensor_all(&chans)?)
            };
            list.push(SectorReduction { weight: 1.0 / nflag as f64, keep, channel });
        }
        Some(list)
    } else {
        None
    };

    let names: Vec<&str> = phis.iter().map(|c| c.name()).collect();
    let ch = KrausChannel::new(
        format!("switch[{}]({k})", names.join(",")),
        SpaceShape::new(in_factors)?,
        SpaceShape::new(out_factors)?,
        kraus,
    )?;
    ch.with_flags(sets.into_iter().map(FlagLabel::Subset).collect(), reductions)
}

/// Heralded channel: each position not in the heralded subset is replaced
/// by the constant channel onto `sigma`.
pub fn heralded_channel(phis: &[KrausChannel], k: usize, sigma: &DensityOperator) -> Result<KrausChannel> {
    if k == 0 || k > phis.len() {
        return Err(Error::OutOfRange(format!("k = {k} outside 1..={}", phis.len())));
    }
    heralded_with_k(phis, k, sigma)
}

pub(crate) fn heralded_with_k(phis: &[KrausChannel], k: usize, sigma: &DensityOperator) -> Result<KrausChannel> {
    let psis = phis
        .iter()
        .map(|p| {
            check_sigma(sigma, p.out_shape())?;
            trivial_channel(sigma, p.in_shape().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = phis.iter().map(|c| c.name()).collect();
    Ok(switch_with_k(phis, &psis, k)?.renamed(format!("heralded[{}]({k})", names.join(","))))
}

/// Heralded channel with the maximally mixed fixed state.
pub fn heralded_channel_default(phis: &[KrausChannel], k: usize) -> Result<KrausChannel> {
    let first = phis.first().ok_or_else(|| Error::InvalidChannel("no channels given".into()))?;
    let sigma = DensityOperator::maximally_mixed(first.out_shape().clone());
    heralded_channel(phis, k, &sigma)
}

/// Random channel from a Haar isometry `in -> out ⊗ env`.
pub fn random_channel(din: usize, dout: usize, n_kraus: usize, seed: u64) -> Result<KrausChannel> {
    if n_kraus == 0 {
        return Err(Error::OutOfRange("zero Kraus operators".into()));
    }
    if dout * n_kraus < din {
        return Err(Error::OutOfRange(format!(
            "isometry {din} -> {dout}x{n_kraus} impossible"
        )));
    }
    let mut r = rng(seed);
    let v = haar_isometry(dout * n_kraus, din, &mut r);
    let kraus: Vec<CMatrix> = (0..n_kraus)
        .map(|e| CMatrix::from_fn(dout, din, |i, j| v[(i * n_kraus + e, j)]))
        .collect();
    let kraus: Vec<CMatrix> = kraus.into_iter().filter(|k| k.iter().any(|z| *z != ZERO)).collect();
    KrausChannel::new(
        format!("random({din},{dout},{n_kraus},{seed})"),
        SpaceShape::qudit(din)?,
        SpaceShape::qudit(dout)?,
        kraus,
    )
}
