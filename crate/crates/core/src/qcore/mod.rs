//! Dense complex linear algebra over tensor-factored spaces.

pub mod linalg;
pub mod random;
mod shape;
mod state;

pub use linalg::{eig_hermitian, trace_norm, CMatrix, CVector, C64};
pub use random::{derive_seed, random_density};
pub use shape::SpaceShape;
pub use state::{named, DensityOperator, PureState};

pub(crate) use state::hex_digest;

/// Kronecker product of two states; factor lists are concatenated.
pub fn tensor(a: &DensityOperator, b: &DensityOperator) -> crate::Result<DensityOperator> {
    a.tensor(b)
}

/// Reduced state on `keep` (order of the original factors preserved).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> crate::Result<DensityOperator> {
    rho.partial_trace(keep)
}

/// Trace norm of the difference of two states.
pub fn trace_distance_norm(a: &DensityOperator, b: &DensityOperator) -> crate::Result<f64> {
    if a.dims() != b.dims() {
        return Err(crate::Error::DimensionMismatch(format!(
            "{} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    trace_norm(&(a.matrix() - b.matrix()))
}
