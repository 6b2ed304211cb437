use herald_core::bounds::{blocksize_bound, blocksize_coefficient, correction_term, FValues};
use herald_core::channels::{heralded_channel_default, random_channel, subsets, KrausChannel};
use herald_core::entropy::{
    alicki_fannes_bound, conditional_entropy, conditional_mutual_information, mutual_information, von_neumann_entropy,
    AfVariant,
};
use herald_core::esq::{esq_upper, EsqOptions};
use herald_core::games::{classical_value, Game, Weight};
use herald_core::holevo::{holevo_of_ensemble, CQEnsemble};
use herald_core::qcore::linalg::hermitian_deviation;
use herald_core::qcore::random::{haar_isometry, random_hermitian, rng};
use herald_core::qcore::{eig_hermitian, random_density, trace_distance_norm, trace_norm, CMatrix, DensityOperator, SpaceShape, C64};
use proptest::prelude::*;

fn shape(dims: &[usize]) -> SpaceShape {
    SpaceShape::new(dims.to_vec()).unwrap()
}

fn state(dims: &[usize], seed: u64) -> DensityOperator {
    let d: usize = dims.iter().product();
    random_density(shape(dims), d, seed).unwrap()
}

fn min_eig(m: &CMatrix) -> f64 {
    eig_hermitian(m).unwrap().0.into_iter().fold(f64::INFINITY, f64::min)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn dims_strategy(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 2..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partial_trace_inverts_tensor(da in 1usize..=3, db in 1usize..=3, s1: u64, s2: u64) {
        let a = state(&[da], s1);
        let b = state(&[db], s2);
        let ab = a.tensor(&b).unwrap();
        prop_assert!(max_abs(&(ab.partial_trace(&[0]).unwrap().matrix() - a.matrix())) <= 1e-12);
        prop_assert!(max_abs(&(ab.partial_trace(&[1]).unwrap().matrix() - b.matrix())) <= 1e-12);
    }

    #[test]
    fn partial_trace_keeps_trace_and_positivity(dims in dims_strategy(3), seed: u64, mask in 1u8..7) {
        let rho = state(&dims, seed);
        let keep: Vec<usize> = (0..dims.len()).filter(|i| mask & (1 << i) != 0).collect();
        prop_assume!(!keep.is_empty());
        let r = rho.partial_trace(&keep).unwrap();
        prop_assert!((r.matrix().trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(min_eig(r.matrix()) >= -1e-10);
    }

    #[test]
    fn trace_norm_triangle_and_unitary_invariance(d in 1usize..=6, seed: u64) {
        let a = random_hermitian(d, seed);
        let b = random_hermitian(d, seed.wrapping_add(1));
        let ta = trace_norm(&a).unwrap();
        let tb = trace_norm(&b).unwrap();
        prop_assert!(trace_norm(&(&a + &b)).unwrap() <= ta + tb + 1e-9);
        let u = haar_isometry(d, d, &mut rng(seed ^ 0x5eed));
        let rotated = &u * &a * u.adjoint();
        prop_assert!((trace_norm(&rotated).unwrap() - ta).abs() <= 1e-9);
    }

    #[test]
    fn channels_preserve_trace_and_positivity(din in 1usize..=3, dout in 1usize..=3, nk in 1usize..=4, seed: u64) {
        prop_assume!(dout * nk >= din);
        let phi = random_channel(din, dout, nk, seed).unwrap();
        prop_assert!(phi.completeness_error() <= 1e-10);
        let rho = state(&[2, din], seed.wrapping_mul(3));
        let out = phi.apply(&rho, &[1]).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() <= 1e-10);
        prop_assert!(min_eig(out.matrix()) >= -1e-10);
        prop_assert!(hermitian_deviation(out.matrix()) <= 1e-10);
    }

    #[test]
    fn tensor_commutes_with_apply(d1 in 1usize..=2, d2 in 1usize..=3, seed: u64) {
        let phi = random_channel(d1, 2, 2, seed).unwrap();
        let psi = random_channel(d2, 2, 3, seed.wrapping_add(9)).unwrap();
        let joint = phi.tensor(&psi).unwrap();
        let rho = state(&[d1, d2], seed.wrapping_add(4));
        let a = joint.apply_full(&rho).unwrap();
        let b = psi.apply(&phi.apply(&rho, &[0]).unwrap(), &[1]).unwrap();
        prop_assert!(max_abs(&(a.matrix() - b.matrix())) <= 1e-10);
    }

    #[test]
    fn entropy_is_additive(da in 1usize..=3, db in 1usize..=3, seed: u64) {
        let a = state(&[da], seed);
        let b = state(&[db], seed.wrapping_add(17));
        let joint = von_neumann_entropy(&a.tensor(&b).unwrap());
        prop_assert!((joint - von_neumann_entropy(&a) - von_neumann_entropy(&b)).abs() <= 1e-9);
    }

    #[test]
    fn strong_subadditivity(dc in 2usize..=3, rank in 1usize..=12, seed: u64) {
        let rho = random_density(shape(&[2, 2, dc]), rank.min(4 * dc), seed).unwrap();
        prop_assert!(conditional_mutual_information(&rho, &[0], &[1], &[2]).unwrap() >= -1e-9);
    }

    #[test]
    fn alicki_fannes_continuity(db in 1usize..=3, t in 0.0f64..=1.0, seed: u64) {
        let rho = state(&[2, db], seed);
        let tau = state(&[2, db], seed.wrapping_add(1));
        let sigma = DensityOperator::mixture(&[1.0 - t, t], &[rho.clone(), tau]).unwrap();
        let delta = (trace_distance_norm(&rho, &sigma).unwrap() / 2.0).min(1.0);
        let gap = (conditional_entropy(&rho, &[0], &[1]).unwrap() - conditional_entropy(&sigma, &[0], &[1]).unwrap()).abs();
        let refined = alicki_fannes_bound(delta, 2, AfVariant::Refined).unwrap();
        prop_assert!(gap <= refined + 1e-9, "gap {gap} > {refined} at delta {delta}");
        prop_assert!(refined <= alicki_fannes_bound(delta, 2, AfVariant::Weak).unwrap() + 1e-12);
    }

    #[test]
    fn data_processing(db in 1usize..=3, dout in 1usize..=3, seed: u64) {
        let rho = state(&[2, db], seed);
        let phi = random_channel(db, dout, 3, seed.wrapping_add(2)).unwrap();
        let after = phi.apply(&rho, &[1]).unwrap();
        prop_assert!(mutual_information(&after, &[0], &[1]).unwrap() <= mutual_information(&rho, &[0], &[1]).unwrap() + 1e-9);
    }

    #[test]
    fn holevo_of_ensemble_in_range(din in 1usize..=3, dout in 1usize..=3, m in 1usize..=4, seed: u64) {
        prop_assume!(dout * 3 >= din);
        let phi = random_channel(din, dout, 3, seed).unwrap();
        let states: Vec<_> = (0..m).map(|i| random_density(shape(&[din]), 1, seed.wrapping_add(i as u64 + 1)).unwrap()).collect();
        let chi = holevo_of_ensemble(&phi, &CQEnsemble::uniform(states).unwrap()).unwrap();
        prop_assert!(chi >= -1e-12 && chi <= (dout as f64).log2() + 1e-9);
    }

    #[test]
    fn blocksize_correction_formula(lambda in 0.0f64..=1.0, n in 1usize..=6, f1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let coef = blocksize_coefficient(lambda, n);
        prop_assert!((coef - lambda * (1.0 - (1.0 - lambda).powi(n as i32 - 1))).abs() <= 1e-12);
        let values = vec![FValues { single: f1, potential: f1 + extra }; n];
        let r = blocksize_bound(lambda, &values, None).unwrap();
        let corr = r.component("blocksize_correction").unwrap();
        prop_assert!((corr - coef * extra * n as f64).abs() <= 1e-12);
        let flat = blocksize_bound(lambda, &vec![FValues { single: f1, potential: f1 }; n], None).unwrap();
        prop_assert_eq!(flat.component("blocksize_correction").unwrap(), 0.0);
    }

    #[test]
    fn verdict_follows_slack(lambda in 0.01f64..=1.0, n in 1usize..=4, f1 in 0.0f64..1.0, lhs in 0.0f64..3.0) {
        let r = blocksize_bound(lambda, &vec![FValues { single: f1, potential: 1.5 }; n], Some(lhs)).unwrap();
        prop_assert!(r.slack.is_finite());
        prop_assert_eq!(r.verdict.is_pass(), r.slack >= -r.allowance);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigendecomposition_reconstructs(d in 1usize..=64, seed: u64) {
        let m = random_hermitian(d, seed);
        let (vals, vecs) = eig_hermitian(&m).unwrap();
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, vals.iter().map(|&v| C64::new(v, 0.0))));
        prop_assert!(max_abs(&(&vecs * diag * vecs.adjoint() - &m)) <= 1e-9);
    }

    #[test]
    fn heralded_flags_uniform_and_block_diagonal(n in 1usize..=3, kk in 1usize..=3, seed: u64) {
        let k = kk.min(n);
        let phis: Vec<KrausChannel> = (0..n).map(|i| random_channel(2, 2, 2, seed.wrapping_add(i as u64)).unwrap()).collect();
        let z = heralded_channel_default(&phis, k).unwrap();
        let out = z.apply_full(&state(&vec![2; n], seed)).unwrap();
        let flag = out.dims().len() - 1;
        let sectors = subsets(n, k).len();
        prop_assert_eq!(out.dims()[flag], sectors);
        let marginal = out.partial_trace(&[flag]).unwrap();
        for i in 0..sectors {
            for j in 0..sectors {
                let expect = if i == j { 1.0 / sectors as f64 } else { 0.0 };
                prop_assert!((marginal.matrix()[(i, j)] - C64::new(expect, 0.0)).norm() <= 1e-12);
            }
        }
        let m = out.matrix();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if r % sectors != c % sectors {
                    prop_assert!(m[(r, c)].norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn classical_value_invariant_under_relabeling(
        nx in 1usize..=3, ny in 1usize..=3, na in 1usize..=3, nb in 1usize..=2,
        counts in prop::collection::vec(0u32..5, 9),
        wins in prop::collection::vec(any::<bool>(), 54),
        seed: u64,
    ) {
        let counts = &counts[..nx * ny];
        let total: u32 = counts.iter().sum();
        prop_assume!(total > 0);
        let pi: Vec<Weight> = counts.iter().map(|c| format!("{c}/{total}").parse().unwrap()).collect();
        let v = wins[..nx * ny * na * nb].to_vec();
        let g = Game::new("random", [nx, ny, na, nb], pi, v).unwrap();
        let perm = |n: usize, salt: u64| {
            let mut p: Vec<usize> = (0..n).collect();
            let mut r = rng(seed ^ salt);
            rand::seq::SliceRandom::shuffle(p.as_mut_slice(), &mut r);
            p
        };
        let h = g.relabeled(&perm(nx, 1), &perm(ny, 2), &perm(na, 3), &perm(nb, 4)).unwrap();
        let (a, b) = (classical_value(&g).unwrap(), classical_value(&h).unwrap());
        prop_assert!(a.exact.is_some());
        prop_assert_eq!(a.exact, b.exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn esq_below_half_mutual_information(db in 2usize..=3, rank in 1usize..=6, seed: u64) {
        let rho = random_density(shape(&[2, db]), rank.min(2 * db), seed).unwrap();
        let e = esq_upper(&rho, &[0], &[1], &EsqOptions { restarts: 2, max_iters: 60, seed, ..Default::default() }).unwrap();
        prop_assert!(e.value >= -1e-12);
        prop_assert!(e.value <= 0.5 * mutual_information(&rho, &[0], &[1]).unwrap() + 1e-9);
        prop_assert!(e.marginal_error <= 1e-8);
    }
}

#[test]
fn correction_increases_on_admissible_region() {
    let grid: Vec<f64> = (1..=100).map(|i| i as f64 * 0.0108 / 100.0).collect();
    let values: Vec<f64> = grid.iter().map(|&l| correction_term(l, 2).unwrap()).filter(|c| c.holds).map(|c| c.value).collect();
    assert!(values.len() > 90);
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
}
