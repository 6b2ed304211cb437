use approx::assert_abs_diff_eq;

use super::*;
use crate::qcore::linalg::{max_abs_diff, C64};
use crate::qcore::named;
use crate::qcore::random::random_density;

fn mm(d: usize) -> DensityOperator {
    DensityOperator::maximally_mixed(SpaceShape::qudit(d).unwrap())
}

#[test]
fn identity_and_trivial_apply() {
    let rho = random_density(SpaceShape::qudit(2).unwrap(), 2, 7).unwrap();
    let id = identity(2).unwrap();
    assert!(max_abs_diff(id.apply_full(&rho).unwrap().matrix(), rho.matrix()) < 1e-14);
    let theta = trivial_channel_default(2).unwrap();
    assert!(max_abs_diff(theta.apply_full(&rho).unwrap().matrix(), mm(2).matrix()) < 1e-14);
    assert!(theta.completeness_error() < 1e-12);
}

#[test]
fn full_depolarization() {
    let ch = depolarizing(2, 1.0).unwrap();
    let out = ch.apply_full(&named::zero()).unwrap();
    assert!(max_abs_diff(out.matrix(), mm(2).matrix()) < 1e-14);
}

#[test]
fn depolarizing_choi_spectrum() {
    let p = 0.4;
    let ev = depolarizing(2, p).unwrap().choi_matrix().eigenvalues();
    let want = [1.0 - 3.0 * p / 4.0, p / 4.0, p / 4.0, p / 4.0];
    for (a, b) in ev.iter().zip(want) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
}

#[test]
fn identity_choi_is_bell() {
    let choi = identity(2).unwrap().choi_matrix();
    assert!(max_abs_diff(choi.matrix(), named::bell().matrix()) < 1e-14);
}

#[test]
fn trivial_choi_is_product() {
    let sigma = DensityOperator::diagonal(SpaceShape::qudit(2).unwrap(), &[0.8, 0.2]).unwrap();
    let theta = trivial_channel(&sigma, SpaceShape::qudit(3).unwrap()).unwrap();
    let want = mm(3).tensor(&sigma).unwrap();
    assert!(max_abs_diff(theta.choi_matrix().matrix(), want.matrix()) < 1e-14);
}

#[test]
fn erasure_output_spectrum() {
    let ch = erasure_channel_default(&identity(2).unwrap(), 0.3).unwrap();
    let ev = ch.apply_full(&named::zero()).unwrap().eigenvalues();
    assert_abs_diff_eq!(ev[0], 0.35, epsilon = 1e-12);
    assert_abs_diff_eq!(ev[1], 0.35, epsilon = 1e-12);
    assert_abs_diff_eq!(ev[2], 0.3, epsilon = 1e-12);
    assert_abs_diff_eq!(ev[3], 0.0, epsilon = 1e-12);
}

#[test]
fn erasure_extremes() {
    let id = identity(2).unwrap();
    let rho = named::plus();
    let on = erasure_channel_default(&id, 1.0).unwrap().apply_full(&rho).unwrap();
    let flag = on.partial_trace(&[1]).unwrap();
    assert_abs_diff_eq!(flag.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
    let off = erasure_channel_default(&id, 0.0).unwrap().apply_full(&rho).unwrap();
    let mut e1 = CMatrix::zeros(2, 2);
    e1[(1, 1)] = C64::new(1.0, 0.0);
    let want = mm(2).matrix().kronecker(&e1);
    assert!(max_abs_diff(off.matrix(), &want) < 1e-14);
    assert!(erasure_channel_default(&id, 1.2).is_err());
}

#[test]
fn heralded_single_position() {
    let id = identity(2).unwrap();
    let h = heralded_channel_default(std::slice::from_ref(&id), 1).unwrap();
    assert_eq!(h.out_shape().factors(), &[2, 1]);
    let rho = random_density(SpaceShape::qudit(2).unwrap(), 2, 3).unwrap();
    assert!(max_abs_diff(h.apply_full(&rho).unwrap().matrix(), rho.matrix()) < 1e-13);
}

#[test]
fn heralded_two_positions_conditionals() {
    let id = identity(2).unwrap();
    let h = heralded_channel_default(&[id.clone(), id], 1).unwrap();
    assert_eq!(h.flags().unwrap().labels(), &[FlagLabel::Subset(vec![0]), FlagLabel::Subset(vec![1])]);
    // input B0 A1 A2 with Bell on B0 A1 and |0> on A2
    let rho = named::bell().tensor(&named::zero()).unwrap();
    let out = h.apply(&rho, &[1, 2]).unwrap();
    assert_eq!(out.dims(), &[2, 2, 2, 2]);
    let flag = out.partial_trace(&[3]).unwrap();
    assert_abs_diff_eq!(flag.matrix()[(0, 0)].re, 0.5, epsilon = 1e-13);
    assert_abs_diff_eq!(flag.matrix()[(1, 1)].re, 0.5, epsilon = 1e-13);

    let m = out.matrix();
    let cond = |y: usize| {
        let idx: Vec<usize> = (0..16).filter(|i| i % 2 == y).collect();
        CMatrix::from_fn(8, 8, |r, c| m[(idx[r], idx[c])] * 2.0)
    };
    let bell_sigma = named::bell().tensor(&mm(2)).unwrap();
    assert!(max_abs_diff(&cond(0), bell_sigma.matrix()) < 1e-13);
    let mixed_zero = mm(2).tensor(&mm(2)).unwrap().tensor(&named::zero()).unwrap();
    assert!(max_abs_diff(&cond(1), mixed_zero.matrix()) < 1e-13);
}

#[test]
fn switch_with_trivial_alternatives_is_heralded() {
    let phis = vec![depolarizing(2, 0.2).unwrap(), identity(2).unwrap()];
    let psis = vec![trivial_channel_default(2).unwrap(), trivial_channel_default(2).unwrap()];
    let a = flagged_switch_channel(&phis, &psis, 1).unwrap();
    let b = heralded_channel_default(&phis, 1).unwrap();
    assert!(a.choi_distance(&b).unwrap() <= 1e-12);
}

#[test]
fn switch_with_equal_alternatives_ignores_flag() {
    let phis = vec![depolarizing(2, 0.2).unwrap(), dephasing(0.3).unwrap()];
    let sw = flagged_switch_channel(&phis, &phis, 1).unwrap();
    let rho = random_density(SpaceShape::new(vec![2, 2]).unwrap(), 4, 11).unwrap();
    let out = sw.apply_full(&rho).unwrap();
    let prod = KrausChannel::tensor_all(&phis).unwrap().apply_full(&rho).unwrap();
    let m = out.matrix();
    for y in 0..2 {
        let idx: Vec<usize> = (0..8).filter(|i| i % 2 == y).collect();
        let cond = CMatrix::from_fn(4, 4, |r, c| m[(idx[r], idx[c])] * 2.0);
        assert!(max_abs_diff(&cond, prod.matrix()) < 1e-13);
    }
}

#[test]
fn heralded_k_out_of_range() {
    let id = identity(2).unwrap();
    assert!(heralded_channel_default(&[id.clone()], 0).is_err());
    assert!(heralded_channel_default(&[id.clone()], 2).is_err());
}

#[test]
fn heralded_dimension_guard() {
    let ids: Vec<_> = (0..6).map(|_| identity(4).unwrap()).collect();
    assert!(matches!(heralded_channel_default(&ids, 3), Err(Error::GuardExceeded(_))));
}

#[test]
fn mismatched_shapes_rejected() {
    let a = vec![identity(2).unwrap()];
    let b = vec![identity(3).unwrap()];
    assert!(flagged_switch_channel(&a, &b, 1).is_err());
}

#[test]
fn apply_dimension_mismatch() {
    let rho = named::bell();
    assert!(identity(3).unwrap().apply(&rho, &[0]).is_err());
}

#[test]
fn tensor_commutes_with_apply() {
    let a = depolarizing(2, 0.3).unwrap();
    let b = amplitude_damping(0.4).unwrap();
    let ab = a.tensor(&b).unwrap();
    let rho = random_density(SpaceShape::new(vec![2, 2]).unwrap(), 4, 5).unwrap();
    let joint = ab.apply_full(&rho).unwrap();
    let seq = b.apply(&a.apply(&rho, &[0]).unwrap(), &[1]).unwrap();
    assert!(max_abs_diff(joint.matrix(), seq.matrix()) < 1e-12);
}

#[test]
fn flagged_tensor_merges_flags() {
    let z = erasure_channel_default(&identity(2).unwrap(), 0.4).unwrap();
    let zz = z.tensor(&z).unwrap();
    assert_eq!(zz.out_shape().factors(), &[2, 2, 4]);
    assert_eq!(zz.flags().unwrap().labels().len(), 4);
    assert!(zz.completeness_error() < 1e-12);
    let red = zz.flags().unwrap().reductions().unwrap();
    assert_abs_diff_eq!(red[0].weight, 0.16, epsilon = 1e-14);
    assert_eq!(red[0].keep, vec![0, 1]);
}

#[test]
fn mixture_identity_holds() {
    let sigma = mm(2);
    for lambda in [0.1, 0.5, 0.9] {
        for phi in [identity(2).unwrap(), depolarizing(2, 0.3).unwrap()] {
            for n in 1..=3 {
                let phis = vec![phi.clone(); n];
                let r = binomial_mixture_check(&phis, lambda, &sigma).unwrap();
                assert!(r.lhs <= 1e-10, "n={n} lambda={lambda}: {}", r.lhs);
                assert!(r.verdict.is_pass());
            }
        }
    }
}

#[test]
fn mixture_wrong_weights_detected() {
    let l: f64 = 0.2;
    let w = [l * l, 2.0 * l * (1.0 - l), (1.0 - l) * (1.0 - l)];
    let phis = vec![identity(2).unwrap(); 2];
    let d = binomial_mixture_distance(&phis, l, &mm(2), Some(&w)).unwrap();
    assert!(d > 0.1, "{d}");
}

#[test]
fn mixture_guard() {
    let phis = vec![identity(2).unwrap(); 4];
    assert!(matches!(binomial_mixture_check(&phis, 0.5, &mm(2)), Err(Error::GuardExceeded(_))));
}

#[test]
fn invalid_kraus_rejected() {
    let k = CMatrix::identity(2, 2).scale(0.9);
    let s = SpaceShape::qudit(2).unwrap();
    assert!(KrausChannel::new("bad", s.clone(), s, vec![k]).is_err());
}

#[test]
fn subsets_lexicographic() {
    assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
}

