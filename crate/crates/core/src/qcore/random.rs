//! Seeded sampling of states, vectors and isometries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::{CMatrix, CVector, C64};
use super::shape::SpaceShape;
use super::state::DensityOperator;
use crate::error::{Error, Result};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic child seed for stream `index` of `seed` (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut SeededRng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn ginibre(rows: usize, cols: usize, rng: &mut SeededRng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random unit vector.
pub fn random_unit_vector(dim: usize, rng: &mut SeededRng) -> CVector {
    let v = CVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Haar-random isometry with `rows >= cols` (orthonormal columns).
pub fn haar_isometry(rows: usize, cols: usize, rng: &mut SeededRng) -> CMatrix {
    debug_assert!(rows >= cols);
    let g = ginibre(rows, cols, rng);
    orthonormalize(g)
}

/// Q factor of a thin QR decomposition with the phases of `R`'s diagonal
/// absorbed, so the map is continuous near isometries.
pub(crate) fn orthonormalize(m: CMatrix) -> CMatrix {
    let cols = m.ncols();
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..cols {
        let d = r[(c, c)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            for row in 0..q.nrows() {
                q[(row, c)] *= phase;
            }
        }
    }
    q
}

/// Density operator `G G^dagger / tr(G G^dagger)` with `G` a
/// `dim x rank` Ginibre matrix drawn from `seed`.
pub fn random_density(shape: SpaceShape, rank: usize, seed: u64) -> Result<DensityOperator> {
    let d = shape.dim();
    if rank == 0 || rank > d {
        return Err(Error::OutOfRange(format!("rank {rank} for dimension {d}")));
    }
    let mut r = rng(seed);
    let g = ginibre(d, rank, &mut r);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    Ok(DensityOperator::from_trusted(shape, m.unscale(tr)))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(dim: usize, seed: u64) -> CMatrix {
    let mut r = rng(seed);
    let g = ginibre(dim, dim, &mut r);
    (&g + g.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::linalg::max_abs_diff;

    #[test]
    fn same_seed_same_matrix() {
        let s = SpaceShape::new(vec![2, 3]).unwrap();
        let a = random_density(s.clone(), 3, 42).unwrap();
        let b = random_density(s, 3, 42).unwrap();
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn rank_one_is_pure() {
        let s = SpaceShape::new(vec![3]).unwrap();
        let r = random_density(s, 1, 7).unwrap();
        assert_eq!(r.rank(1e-10), 1);
    }

    #[test]
    fn rank_out_of_range() {
        let s = SpaceShape::new(vec![2]).unwrap();
        assert!(random_density(s.clone(), 0, 1).is_err());
        assert!(random_density(s, 3, 1).is_err());
    }

    #[test]
    fn isometry_columns_orthonormal() {
        let mut r = rng(3);
        let v = haar_isometry(6, 4, &mut r);
        let gram = v.adjoint() * &v;
        assert!(max_abs_diff(&gram, &CMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}
