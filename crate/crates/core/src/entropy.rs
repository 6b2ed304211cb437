//! Entropy functionals (bits) and the Alicki-Fannes continuity bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::linalg::{eigvalsh, partial_trace_raw, CMatrix};
use crate::qcore::DensityOperator;

/// `-sum x log2 x` over the positive part of a spectrum. Works for
/// sub-normalized spectra as well.
pub(crate) fn spectrum_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// `-tr(M log2 M)` for a positive semidefinite (possibly sub-normalized)
/// matrix.
pub(crate) fn entropy_raw(m: &CMatrix) -> f64 {
    spectrum_entropy(&eigvalsh(m))
}

fn subsystem_entropy(rho: &DensityOperator, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.len() == rho.dims().len() {
        return entropy_raw(rho.matrix());
    }
    entropy_raw(&partial_trace_raw(rho.matrix(), rho.dims(), &sorted))
}

fn check_sets(rho: &DensityOperator, sets: &[&[usize]]) -> Result<()> {
    let n = rho.dims().len();
    let mut seen = vec![false; n];
    for set in sets {
        for &f in *set {
            if f >= n {
                return Err(Error::IndexOutOfRange { index: f, len: n });
            }
            if seen[f] {
                return Err(Error::Overlap(f));
            }
            seen[f] = true;
        }
    }
    Ok(())
}

fn union(sets: &[&[usize]]) -> Vec<usize> {
    sets.iter().flat_map(|s| s.iter().copied()).collect()
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_raw(rho.matrix())
}

/// Entropy of the reduced state on `set`.
pub fn entropy_of(rho: &DensityOperator, set: &[usize]) -> Result<f64> {
    check_sets(rho, &[set])?;
    if set.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subsystem_entropy(rho, set))
}

/// `S(A|B) = S(AB) - S(B)`.
pub fn conditional_entropy(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(rho, &[a, b])?;
    if a.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subsystem_entropy(rho, &union(&[a, b])) - subsystem_entropy(rho, b))
}

/// `I(A;B) = S(A) + S(B) - S(AB)`.
pub fn mutual_information(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<f64> {
    check_sets(rho, &[a, b])?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subsystem_entropy(rho, a) + subsystem_entropy(rho, b)
        - subsystem_entropy(rho, &union(&[a, b])))
}

/// `I(A;B|C) = S(AC) + S(BC) - S(ABC) - S(C)`; an empty `C` gives `I(A;B)`.
pub fn conditional_mutual_information(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    check_sets(rho, &[a, b, c])?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(subsystem_entropy(rho, &union(&[a, c])) + subsystem_entropy(rho, &union(&[b, c]))
        - subsystem_entropy(rho, &union(&[a, b, c]))
        - subsystem_entropy(rho, c))
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("probability {p}")));
    }
    Ok(spectrum_entropy(&[p, 1.0 - p]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfVariant {
    /// `2 d log|A| + (1 + d) h(d / (1 + d))`
    Refined,
    /// `2 d log(2|A| / d)`
    Weak,
}

/// Continuity bound on `|S(A|B)_rho - S(A|B)_sigma|` when
/// `||rho - sigma||_1 / 2 <= delta`.
pub fn alicki_fannes_bound(delta: f64, dim_a: usize, variant: AfVariant) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta {delta}")));
    }
    if dim_a < 2 {
        return Err(Error::OutOfRange(format!("dim_a {dim_a}")));
    }
    let log_d = (dim_a as f64).log2();
    Ok(match variant {
        AfVariant::Refined => {
            2.0 * delta * log_d + (1.0 + delta) * binary_entropy(delta / (1.0 + delta))?
        }
        AfVariant::Weak if delta == 0.0 => 0.0,
        AfVariant::Weak => 2.0 * delta * (2.0 * dim_a as f64 / delta).log2(),
    })
}

/// An entropy value tied to the state and subsystems it was computed on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub quantity: String,
    pub value: f64,
    pub state_fingerprint: String,
    pub subsystems: Vec<Vec<usize>>,
}

impl EntropyReport {
    pub fn entropy(rho: &DensityOperator, set: &[usize]) -> Result<Self> {
        Ok(Self {
            quantity: "S".into(),
            value: entropy_of(rho, set)?,
            state_fingerprint: rho.fingerprint(),
            subsystems: vec![set.to_vec()],
        })
    }

    pub fn conditional_entropy(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<Self> {
        Ok(Self {
            quantity: "S(A|B)".into(),
            value: conditional_entropy(rho, a, b)?,
            state_fingerprint: rho.fingerprint(),
            subsystems: vec![a.to_vec(), b.to_vec()],
        })
    }

    pub fn mutual_information(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<Self> {
        Ok(Self {
            quantity: "I(A;B)".into(),
            value: mutual_information(rho, a, b)?,
            state_fingerprint: rho.fingerprint(),
            subsystems: vec![a.to_vec(), b.to_vec()],
        })
    }

    pub fn conditional_mutual_information(
        rho: &DensityOperator,
        a: &[usize],
        b: &[usize],
        c: &[usize],
    ) -> Result<Self> {
        Ok(Self {
            quantity: "I(A;B|C)".into(),
            value: conditional_mutual_information(rho, a, b, c)?,
            state_fingerprint: rho.fingerprint(),
            subsystems: vec![a.to_vec(), b.to_vec(), c.to_vec()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::named::*;
    use crate::qcore::SpaceShape;
    use approx::assert_abs_diff_eq;

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(von_neumann_entropy(&bell()), 0.0, epsilon = 1e-12);
        let mixed = DensityOperator::maximally_mixed(SpaceShape::qudit(2).unwrap());
        assert_abs_diff_eq!(von_neumann_entropy(&mixed), 1.0, epsilon = 1e-12);
        let d = DensityOperator::diagonal(SpaceShape::qudit(2).unwrap(), &[0.7, 0.3]).unwrap();
        // oracle: h(0.3) evaluated directly
        let h = -0.3 * 0.3f64.log2() - 0.7 * 0.7f64.log2();
        assert_abs_diff_eq!(von_neumann_entropy(&d), h, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 0.881_290_899_230_692_6, epsilon = 1e-12);
    }

    #[test]
    fn conditional_entropy_examples() {
        assert_abs_diff_eq!(conditional_entropy(&bell(), &[0], &[1]).unwrap(), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            conditional_entropy(&classically_correlated(), &[0], &[1]).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let a = DensityOperator::diagonal(SpaceShape::qudit(2).unwrap(), &[0.7, 0.3]).unwrap();
        let prod = a.tensor(&plus()).unwrap();
        assert_abs_diff_eq!(
            conditional_entropy(&prod, &[0], &[1]).unwrap(),
            von_neumann_entropy(&a),
            epsilon = 1e-12
        );
    }

    #[test]
    fn overlapping_sets_rejected() {
        assert_eq!(conditional_entropy(&bell(), &[0], &[0]), Err(Error::Overlap(0)));
        assert_eq!(mutual_information(&bell(), &[0, 1], &[1]), Err(Error::Overlap(1)));
    }

    #[test]
    fn mutual_information_examples() {
        assert_abs_diff_eq!(mutual_information(&bell(), &[0], &[1]).unwrap(), 2.0, epsilon = 1e-12);
        let prod = plus().tensor(&zero()).unwrap();
        assert_abs_diff_eq!(mutual_information(&prod, &[0], &[1]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ghz_conditional_mutual_information() {
        // S(AC)=1, S(BC)=1, S(ABC)=0, S(C)=1 for GHZ
        let g = ghz(3);
        assert_abs_diff_eq!(entropy_of(&g, &[0, 2]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy_of(&g, &[2]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            conditional_mutual_information(&g, &[0], &[1], &[2]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        // 0.11 log2(1/0.11) + 0.89 log2(1/0.89), summed by hand to 16 digits
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.499_915_958_164_528_9, epsilon = 1e-12);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn alicki_fannes_values() {
        for v in [AfVariant::Refined, AfVariant::Weak] {
            assert_eq!(alicki_fannes_bound(0.0, 2, v).unwrap(), 0.0);
        }
        let h = binary_entropy(1.0 / 11.0).unwrap();
        assert_abs_diff_eq!(
            alicki_fannes_bound(0.1, 2, AfVariant::Refined).unwrap(),
            0.2 + 1.1 * h,
            epsilon = 1e-14
        );
        assert!(alicki_fannes_bound(1.1, 2, AfVariant::Weak).is_err());
        assert!(alicki_fannes_bound(0.5, 1, AfVariant::Weak).is_err());
    }

    #[test]
    fn refined_below_weak_on_grid() {
        for d in 2..=8 {
            for i in 0..=200 {
                let delta = i as f64 / 200.0;
                let r = alicki_fannes_bound(delta, d, AfVariant::Refined).unwrap();
                let w = alicki_fannes_bound(delta, d, AfVariant::Weak).unwrap();
                assert!(r <= w + 1e-12, "delta={delta} d={d}: {r} > {w}");
            }
        }
    }
}
