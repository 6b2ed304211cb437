//! Raw dense kernels on row-major tensor-factored matrices.
//!
//! Factor 0 is the most significant digit of a basis index. Functions here
//! take plain matrices plus a factor list and do no state validation; the
//! checked wrappers live on [`DensityOperator`](super::DensityOperator).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance on `M - M^dagger` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of an (assumed) Hermitian matrix, eigenvalues sorted
/// in descending order with matching eigenvector columns.
pub(crate) fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    if n == 1 {
        return (vec![m[(0, 0)].re], CMatrix::from_element(1, 1, ONE));
    }
    let (scaled, s) = prescale(m);
    if s == 0.0 {
        return (vec![0.0; n], CMatrix::identity(n, n));
    }
    let mut eig = robust_eigen(scaled);
    eig.eigenvalues *= s;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Symmetrized copy scaled to unit max-abs entry, and the scale. The
/// eigensolver can return NaN on matrices whose entries are all tiny.
fn prescale(m: &CMatrix) -> (CMatrix, f64) {
    let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s == 0.0 || !s.is_finite() {
        return (symmetrize(m), if s == 0.0 { 0.0 } else { 1.0 });
    }
    (symmetrize(m).unscale(s), s)
}

/// The eigensolver occasionally returns NaN on matrices with exact sparse
/// structure. Conjugating by a fixed unitary breaks the structure without
/// changing the spectrum; eigenvectors are rotated back.
fn robust_eigen(m: CMatrix) -> SymmetricEigen<C64, nalgebra::Dyn> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|v| v.is_finite()) {
        return eig;
    }
    let n = m.nrows();
    for attempt in 0..4u64 {
        let mut rng = crate::qcore::random::rng(0x5eed_0000 + attempt);
        let u = crate::qcore::random::haar_isometry(n, n, &mut rng);
        let rotated = symmetrize(&(u.adjoint() * &m * &u));
        let mut eig = SymmetricEigen::new(rotated);
        if eig.eigenvalues.iter().all(|v| v.is_finite()) {
            eig.eigenvectors = &u * eig.eigenvectors;
            return eig;
        }
    }
    eig
}

/// Eigenvalues only, descending.
pub(crate) fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    if n == 1 {
        return vec![m[(0, 0)].re];
    }
    let (scaled, s) = prescale(m);
    if s == 0.0 {
        return vec![0.0; n];
    }
    let mut v: Vec<f64> = robust_eigen(scaled).eigenvalues.iter().map(|x| x * s).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Hermitian eigendecomposition with input validation.
///
/// Returns eigenvalues in descending order and the unitary whose columns are
/// the corresponding eigenvectors.
pub fn eig_hermitian(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eigh(m))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub(crate) fn hermitian_fn(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        let fv = f(v);
        for r in 0..n {
            scaled[(r, c)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    if hermitian_deviation(m) <= 1e-13 {
        return Ok(eigvalsh(m).iter().map(|v| v.abs()).sum());
    }
    Ok(m.clone().svd(false, false).singular_values.iter().sum())
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        s[f] = s[f + 1] * dims[f + 1];
    }
    s
}

/// Flat offsets of every basis combination of the factors in `subset`,
/// enumerated with `subset[0]` as the most significant digit.
pub(crate) fn offsets(dims: &[usize], subset: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &f in subset {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &base in &out {
            for i in 0..dims[f] {
                next.push(base + i * st[f]);
            }
        }
        out = next;
    }
    out
}

/// Partial trace keeping `keep` (sorted, duplicate free) in original order.
pub(crate) fn partial_trace_raw(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !keep.contains(f)).collect();
    let ko = offsets(dims, keep);
    let to = offsets(dims, &traced);
    let dk = ko.len();
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for &t in &to {
                acc += m[(ko[i] + t, ko[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Reduced matrix on `keep` in the listed order (not necessarily sorted).
pub(crate) fn reduce_ordered(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    let reduced = partial_trace_raw(m, dims, &sorted);
    if sorted == keep {
        return reduced;
    }
    let sub_dims: Vec<usize> = sorted.iter().map(|&f| dims[f]).collect();
    let order: Vec<usize> =
        keep.iter().map(|f| sorted.iter().position(|s| s == f).unwrap()).collect();
    reorder_raw(&reduced, &sub_dims, &order)
}

/// Reorders tensor factors: new factor `p` is old factor `order[p]`.
pub(crate) fn reorder_raw(m: &CMatrix, dims: &[usize], order: &[usize]) -> CMatrix {
    if order.iter().enumerate().all(|(p, &o)| p == o) {
        return m.clone();
    }
    let map = offsets(dims, order);
    let n = map.len();
    CMatrix::from_fn(n, n, |i, j| m[(map[i], map[j])])
}

/// Reorders the factors of a state vector.
pub(crate) fn reorder_vector(v: &CVector, dims: &[usize], order: &[usize]) -> CVector {
    let map = offsets(dims, order);
    CVector::from_fn(map.len(), |i, _| v[map[i]])
}

/// `sum_k K rho K^dagger` for a channel acting on the whole space.
pub(crate) fn apply_kraus(m: &CMatrix, kraus: &[CMatrix]) -> CMatrix {
    let out = kraus.first().map_or(0, |k| k.nrows());
    let mut acc = CMatrix::zeros(out, out);
    for k in kraus {
        let km = k * m;
        acc += km * k.adjoint();
    }
    acc
}

/// Applies a Kraus family to the factors `acting` of a tensor-factored
/// matrix. The channel's output factors replace the acted-on factors and
/// are inserted where the lowest acted-on factor used to sit.
///
/// Returns the new matrix and its factor list.
pub(crate) fn apply_kraus_local(
    m: &CMatrix,
    dims: &[usize],
    acting: &[usize],
    kraus: &[CMatrix],
    out_dims: &[usize],
) -> (CMatrix, Vec<usize>) {
    let rest: Vec<usize> = (0..dims.len()).filter(|f| !acting.contains(f)).collect();
    let mut order = rest.clone();
    order.extend_from_slice(acting);
    let moved = reorder_raw(m, dims, &order);
    let r: usize = rest.iter().map(|&f| dims[f]).product();
    let a: usize = acting.iter().map(|&f| dims[f]).product();
    let b: usize = out_dims.iter().product();

    let mut out = CMatrix::zeros(r * b, r * b);
    if r == 1 {
        out = apply_kraus(&moved, kraus);
    } else {
        let mut x = CMatrix::zeros(r * b, r * a);
        for k in kraus {
            for blk in 0..r {
                let rows = moved.rows(blk * a, a);
                x.rows_mut(blk * b, b).copy_from(&(k * rows));
            }
            let kd = k.adjoint();
            for blk in 0..r {
                let cols = x.columns(blk * a, a);
                let mut target = out.columns_mut(blk * b, b);
                target += cols * &kd;
            }
        }
    }

    let min_acting = acting.iter().copied().min().unwrap_or(0);
    let pos = rest.iter().filter(|&&f| f < min_acting).count();
    let mut mid_dims: Vec<usize> = rest.iter().map(|&f| dims[f]).collect();
    let n_rest = mid_dims.len();
    mid_dims.extend_from_slice(out_dims);
    let mut back: Vec<usize> = (0..pos).collect();
    back.extend(n_rest..n_rest + out_dims.len());
    back.extend(pos..n_rest);
    let final_dims: Vec<usize> = back.iter().map(|&i| mid_dims[i]).collect();
    (reorder_raw(&out, &mid_dims, &back), final_dims)
}

/// Embeds an operator on the factors `acting` (in the listed order) into
/// the full space as `op ⊗ I`, respecting factor positions.
pub(crate) fn embed_operator(op: &CMatrix, dims: &[usize], acting: &[usize]) -> CMatrix {
    let rest: Vec<usize> = (0..dims.len()).filter(|f| !acting.contains(f)).collect();
    let r: usize = rest.iter().map(|&f| dims[f]).product();
    let mut order = acting.to_vec();
    order.extend_from_slice(&rest);
    let big = op.kronecker(&CMatrix::identity(r, r));
    let ordered_dims: Vec<usize> = order.iter().map(|&f| dims[f]).collect();
    // inverse permutation takes `order` layout back to natural layout
    let mut inverse = vec![0; order.len()];
    for (p, &f) in order.iter().enumerate() {
        inverse[f] = p;
    }
    reorder_raw(&big, &ordered_dims, &inverse)
}

pub(crate) fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn eig_sorted_descending() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.3), c(0.7)]));
        let (vals, vecs) = eig_hermitian(&m).unwrap();
        assert_abs_diff_eq!(vals[0], 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 0.3, epsilon = 1e-14);
        let recon = hermitian_fn(&vals, &vecs, |x| x);
        assert!(max_abs_diff(&recon, &m) < 1e-12);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn trace_norm_rejects_rectangular() {
        let m = CMatrix::zeros(2, 3);
        assert!(matches!(trace_norm(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn trace_norm_of_non_hermitian() {
        // |0><1| has a single unit singular value
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reorder_swaps_kron_factors() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let b = CMatrix::from_row_slice(3, 3, &[c(1.0), c(0.0), c(5.0), c(0.0), c(2.0), c(0.0), c(7.0), c(0.0), c(3.0)]);
        let ab = a.kronecker(&b);
        let ba = b.kronecker(&a);
        assert!(max_abs_diff(&reorder_raw(&ab, &[2, 3], &[1, 0]), &ba) < 1e-15);
    }

    #[test]
    fn embed_matches_kron_in_middle() {
        let op = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let id2 = CMatrix::identity(2, 2);
        let id3 = CMatrix::identity(3, 3);
        let expected = id3.kronecker(&op).kronecker(&id2);
        let got = embed_operator(&op, &[3, 2, 2], &[1]);
        assert!(max_abs_diff(&got, &expected) < 1e-15);
    }

    #[test]
    fn local_kraus_on_middle_factor() {
        // bit flip on the middle qubit of |000>
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let mut m = CMatrix::zeros(8, 8);
        m[(0, 0)] = c(1.0);
        let (out, dims) = apply_kraus_local(&m, &[2, 2, 2], &[1], &[x], &[2]);
        assert_eq!(dims, vec![2, 2, 2]);
        assert_abs_diff_eq!(out[(2, 2)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn local_kraus_changes_dimension_in_place() {
        // map qubit 0 of a [2,3] product to a qutrit |0> (trace-and-prepare)
        let mut kraus = Vec::new();
        for i in 0..2 {
            let mut k = CMatrix::zeros(3, 2);
            k[(0, i)] = c(1.0);
            kraus.push(k);
        }
        let rho = CMatrix::identity(6, 6).scale(1.0 / 6.0);
        let (out, dims) = apply_kraus_local(&rho, &[2, 3], &[0], &kraus, &[3]);
        assert_eq!(dims, vec![3, 3]);
        assert_abs_diff_eq!(out.trace().re, 1.0, epsilon = 1e-14);
        for j in 0..3 {
            assert_abs_diff_eq!(out[(j, j)].re, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn sparse_rank_one_spectrum_is_finite() {
        // 8 |v><v| with v the normalized indicator of every ninth index
        let mut m = CMatrix::zeros(64, 64);
        for i in (0..64).step_by(9) {
            for j in (0..64).step_by(9) {
                m[(i, j)] = c(1.0);
            }
        }
        let v = eigvalsh(&m);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_abs_diff_eq!(v[0], 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 8.0, epsilon = 1e-10);
        let (vals, vecs) = eigh(&m);
        let rebuilt = hermitian_fn(&vals, &vecs, |x| x);
        assert!(max_abs_diff(&rebuilt, &m) < 1e-10);
    }
}
