use crate::error::{Error, Result};
use crate::qcore::linalg::CMatrix;
use crate::qcore::DensityOperator;
use crate::report::{BoundReport, Component, Provenance};

use super::constructors::{heralded_with_k, subsets};
use super::{block_trace_norm, erasure_channel, FlagLabel, KrausChannel};

/// Largest number of positions the mixture check accepts.
pub const MAX_MIXTURE_N: usize = 3;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Positions that succeeded, read off an erasure or joint-erasure label.
fn successes(label: &FlagLabel) -> Result<Vec<usize>> {
    let parts = match label {
        FlagLabel::Joint(parts) => parts.clone(),
        other => vec![other.clone()],
    };
    let mut r = Vec::new();
    for (j, p) in parts.iter().enumerate() {
        match p {
            FlagLabel::Erasure { success: true } => r.push(j),
            FlagLabel::Erasure { success: false } => {}
            other => return Err(Error::InvalidChannel(format!("unexpected flag label {other}"))),
        }
    }
    Ok(r)
}

/// Choi trace-norm distance between `⊗_j Z_l(Phi_j)` and the binomial
/// mixture of heralded channels, after relabeling erasure flags to the
/// subset of successful positions. `weights[k]` overrides the weight of the
/// `k`-th heralded term.
pub fn binomial_mixture_distance(
    phis: &[KrausChannel],
    lambda: f64,
    sigma: &DensityOperator,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let n = phis.len();
    if n == 0 {
        return Err(Error::InvalidChannel("no channels given".into()));
    }
    if n > MAX_MIXTURE_N {
        return Err(Error::GuardExceeded(format!("mixture check limited to n <= {MAX_MIXTURE_N}, got {n}")));
    }
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() == n + 1 => w.to_vec(),
        Some(w) => {
            return Err(Error::DimensionMismatch(format!("{} weights for n = {n}", w.len())));
        }
        None => (0..=n)
            .map(|k| binomial(n, k) * lambda.powi(k as i32) * (1.0 - lambda).powi((n - k) as i32))
            .collect(),
    };

    let erasures = phis
        .iter()
        .map(|p| erasure_channel(p, lambda, sigma))
        .collect::<Result<Vec<_>>>()?;
    let product = KrausChannel::tensor_all(&erasures)?;

    let mut canonical: Vec<Vec<usize>> = Vec::with_capacity(1 << n);
    let mut offsets = Vec::with_capacity(n + 1);
    for k in 0..=n {
        offsets.push(canonical.len());
        canonical.extend(subsets(n, k));
    }
    let nflag = canonical.len();

    let flags = product.flags().ok_or(Error::MissingFlags)?;
    let relabel: Vec<usize> = flags
        .labels()
        .iter()
        .map(|l| {
            let r = successes(l)?;
            canonical
                .iter()
                .position(|c| *c == r)
                .ok_or_else(|| Error::InvalidChannel(format!("no subset for label {l}")))
        })
        .collect::<Result<_>>()?;

    let din = product.in_dim();
    let dq = product.quantum_out_dim();
    let dout = dq * nflag;
    let n_all = din * dout;
    // Choi index (i, q, y) -> i*dout + q*nflag + y
    let place = |idx: usize, ny: usize, map: &dyn Fn(usize) -> usize| -> usize {
        let i = idx / (dq * ny);
        let rem = idx % (dq * ny);
        i * dout + (rem / ny) * nflag + map(rem % ny)
    };

    let lhs = product.choi_raw();
    let mut diff = CMatrix::zeros(n_all, n_all);
    let fwd = |y: usize| relabel[y];
    let lhs_map: Vec<usize> = (0..n_all).map(|idx| place(idx, nflag, &fwd)).collect();
    for r in 0..n_all {
        for c in 0..n_all {
            diff[(lhs_map[r], lhs_map[c])] = lhs[(r, c)];
        }
    }

    for (k, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let zk = heralded_with_k(phis, k, sigma)?;
        let choi = zk.choi_raw();
        let ny = zk.flags().map(|f| f.len()).ok_or(Error::MissingFlags)?;
        let off = offsets[k];
        let shift = move |y: usize| off + y;
        let map: Vec<usize> = (0..choi.nrows()).map(|idx| place(idx, ny, &shift)).collect();
        for r in 0..choi.nrows() {
            for c in 0..choi.ncols() {
                diff[(map[r], map[c])] -= choi[(r, c)] * *w;
            }
        }
    }

    let mut dims = product.in_shape().factors().to_vec();
    dims.extend_from_slice(product.quantum_out_factors());
    dims.push(nflag);
    block_trace_norm(&diff, &dims, dims.len() - 1)
}

/// Mixture identity as a report: the distance is the left side, zero the
/// right side, and the allowance is `1e-10`.
pub fn binomial_mixture_check(phis: &[KrausChannel], lambda: f64, sigma: &DensityOperator) -> Result<BoundReport> {
    let dist = binomial_mixture_distance(phis, lambda, sigma, None)?;
    let names: Vec<&str> = phis.iter().map(|c| c.name()).collect();
    let lambda_s = lambda.to_string();
    let fp = crate::report::fingerprint(&[&names.join(","), &lambda_s, &sigma.fingerprint()]);
    Ok(BoundReport::new("binomial_mixture", dist, Provenance::Analytic, vec![Component::new("zero", 0.0)])
        .with_allowance(1e-10)
        .with_fingerprint(fp)
        .diagnostic("n", phis.len() as f64)
        .diagnostic("lambda", lambda)
        .judge(Ok(()), "none"))
}
