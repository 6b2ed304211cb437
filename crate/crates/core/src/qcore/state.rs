use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::linalg::{
    eigvalsh, hermitian_deviation, outer, partial_trace_raw, symmetrize, CMatrix,
    CVector, C64, HERMITIAN_TOL, ONE, PSD_TOL, ZERO,
};
use super::shape::SpaceShape;
use crate::error::{Error, Result};

/// Positive semidefinite, unit-trace operator on a tensor-factored space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOperator {
    shape: SpaceShape,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates and symmetrizes `matrix`.
    pub fn new(shape: SpaceShape, matrix: CMatrix) -> Result<Self> {
        let d = shape.dim();
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if matrix.nrows() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} for shape {shape} of dimension {d}",
                matrix.nrows()
            )));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let matrix = symmetrize(&matrix);
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = eigvalsh(&matrix).last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { shape, matrix })
    }

    /// Builds a state from a matrix produced by a trusted kernel; only
    /// symmetrizes. Used on optimizer hot paths.
    pub(crate) fn from_trusted(shape: SpaceShape, matrix: CMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), shape.dim());
        Self { shape, matrix: symmetrize(&matrix) }
    }

    /// Normalizes a positive semidefinite matrix to unit trace.
    pub fn from_unnormalized(shape: SpaceShape, matrix: CMatrix) -> Result<Self> {
        let tr = matrix.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        Self::new(shape, matrix.unscale(tr))
    }

    pub fn pure(shape: SpaceShape, vector: &CVector) -> Result<Self> {
        Ok(PureState::new(shape, vector.clone())?.to_density())
    }

    pub fn maximally_mixed(shape: SpaceShape) -> Self {
        let d = shape.dim();
        Self { shape, matrix: CMatrix::identity(d, d).unscale(d as f64) }
    }

    /// Computational basis projector `|i><i|`.
    pub fn basis(shape: SpaceShape, index: usize) -> Result<Self> {
        let d = shape.dim();
        if index >= d {
            return Err(Error::OutOfRange(format!("basis index {index} >= {d}")));
        }
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = ONE;
        Ok(Self { shape, matrix: m })
    }

    /// Diagonal state with the given probabilities.
    pub fn diagonal(shape: SpaceShape, probs: &[f64]) -> Result<Self> {
        if probs.len() != shape.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for dimension {}",
                probs.len(),
                shape.dim()
            )));
        }
        let m = CMatrix::from_fn(probs.len(), probs.len(), |i, j| {
            if i == j {
                C64::new(probs[i], 0.0)
            } else {
                ZERO
            }
        });
        Self::new(shape, m)
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.factors()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.matrix)
    }

    /// Eigenvalues clamped at zero, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        self.eigenvalues().into_iter().map(|v| v.max(0.0)).collect()
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > tol).count()
    }

    /// Reduced state on `keep`; factor order of the original is preserved.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        self.shape.check_selection(keep)?;
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        let m = partial_trace_raw(&self.matrix, self.dims(), &sorted);
        Ok(Self::from_trusted(self.shape.select(&sorted), m))
    }

    /// Kronecker product; factor lists are concatenated.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let shape = self.shape.concat(&other.shape)?;
        Ok(Self { shape, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// Convex combination `sum_i w_i rho_i` of states sharing one shape.
    pub fn mixture(weights: &[f64], states: &[DensityOperator]) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptySelection)?;
        let d = first.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            if s.shape.factors() != first.shape.factors() {
                return Err(Error::DimensionMismatch("mixture of different shapes".into()));
            }
            acc += s.matrix.scale(*w);
        }
        Self::new(first.shape.clone(), acc)
    }

    /// Content hash of shape and matrix entries (hex SHA-256).
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in self.dims() {
            h.update((*d as u64).to_le_bytes());
        }
        for z in self.matrix.iter() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        hex_digest(h)
    }
}

pub(crate) fn hex_digest(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Unit vector on a tensor-factored space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    shape: SpaceShape,
    vector: CVector,
}

impl PureState {
    pub fn new(shape: SpaceShape, vector: CVector) -> Result<Self> {
        if vector.len() != shape.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} for dimension {}",
                vector.len(),
                shape.dim()
            )));
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("vector norm {norm}")));
        }
        Ok(Self { shape, vector })
    }

    /// Normalizes `vector` first.
    pub fn normalized(shape: SpaceShape, vector: CVector) -> Result<Self> {
        let norm = vector.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(shape, vector.unscale(norm))
    }

    pub fn shape(&self) -> &SpaceShape {
        &self.shape
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_trusted(self.shape.clone(), outer(&self.vector))
    }
}

/// Named states used by tests, suites and the command line.
pub mod named {
    use super::*;

    fn qubits(n: usize) -> SpaceShape {
        SpaceShape::new(vec![2; n]).expect("nonzero factors")
    }

    fn ket(amps: &[(usize, f64)], dim: usize) -> CVector {
        let mut v = CVector::zeros(dim);
        for &(i, a) in amps {
            v[i] = C64::new(a, 0.0);
        }
        v
    }

    /// `(|00> + |11>)/sqrt 2`.
    pub fn bell() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::from_trusted(qubits(2), outer(&ket(&[(0, s), (3, s)], 4)))
    }

    /// `(|01> - |10>)/sqrt 2`.
    pub fn singlet() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::from_trusted(qubits(2), outer(&ket(&[(1, s), (2, -s)], 4)))
    }

    /// `(|0..0> + |1..1>)/sqrt 2` on `n` qubits.
    pub fn ghz(n: usize) -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = 1 << n;
        DensityOperator::from_trusted(qubits(n), outer(&ket(&[(0, s), (d - 1, s)], d)))
    }

    /// `p |singlet><singlet| + (1-p) I/4`.
    pub fn werner(p: f64) -> Result<DensityOperator> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("werner parameter {p}")));
        }
        let m = singlet().matrix.scale(p) + CMatrix::identity(4, 4).scale((1.0 - p) / 4.0);
        DensityOperator::new(qubits(2), m)
    }

    /// `(|00><00| + |11><11|)/2`.
    pub fn classically_correlated() -> DensityOperator {
        DensityOperator::diagonal(qubits(2), &[0.5, 0.0, 0.0, 0.5]).expect("valid")
    }

    /// Qubit `|0><0|`.
    pub fn zero() -> DensityOperator {
        DensityOperator::basis(qubits(1), 0).expect("valid")
    }

    /// Qubit `|+><+|`.
    pub fn plus() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::from_trusted(qubits(1), outer(&ket(&[(0, s), (1, s)], 2)))
    }
}

#[cfg(test)]
mod tests {
    use super::named::*;
    use super::*;
    use crate::qcore::linalg::max_abs_diff;
    use approx::assert_abs_diff_eq;

    #[test]
    fn maximally_mixed_product() {
        let q = SpaceShape::qudit(2).unwrap();
        let prod = DensityOperator::maximally_mixed(q.clone())
            .tensor(&DensityOperator::maximally_mixed(q))
            .unwrap();
        assert_eq!(prod.dims(), &[2, 2]);
        let expected = CMatrix::identity(4, 4).scale(0.25);
        assert!(max_abs_diff(prod.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn tensor_then_trace_recovers_factor() {
        let rho = plus();
        let both = rho.tensor(&zero()).unwrap();
        let back = both.partial_trace(&[0]).unwrap();
        assert!(max_abs_diff(back.matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn bell_tensor_bell_is_pure() {
        let b = bell().tensor(&bell()).unwrap();
        let ev = b.eigenvalues();
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert!(ev[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let m = bell().partial_trace(&[0]).unwrap();
        let expected = CMatrix::identity(2, 2).scale(0.5);
        assert!(max_abs_diff(m.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn ghz_two_qubit_marginal() {
        // oracle: direct sum over the traced index of the 8x8 GHZ matrix
        let g = ghz(3);
        let mut oracle = CMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                for t in 0..2 {
                    oracle[(i, j)] += g.matrix()[(2 * i + t, 2 * j + t)];
                }
            }
        }
        let m = g.partial_trace(&[0, 1]).unwrap();
        assert!(max_abs_diff(m.matrix(), &oracle) < 1e-15);
        assert_abs_diff_eq!(m.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.matrix()[(3, 3)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.matrix()[(0, 3)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let b = bell();
        assert_eq!(b.partial_trace(&[]), Err(Error::EmptySelection));
        assert_eq!(b.partial_trace(&[2]), Err(Error::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn rejects_invalid_matrices() {
        let q = SpaceShape::qudit(2).unwrap();
        let neg = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]));
        assert!(matches!(DensityOperator::new(q.clone(), neg), Err(Error::InvalidState(_))));
        let trace2 = CMatrix::identity(2, 2);
        assert!(matches!(DensityOperator::new(q, trace2), Err(Error::InvalidState(_))));
    }

    #[test]
    fn pure_state_norm_check() {
        let q = SpaceShape::qudit(2).unwrap();
        let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(PureState::new(q.clone(), v.clone()).is_err());
        assert!(PureState::normalized(q, v).is_ok());
    }
}
