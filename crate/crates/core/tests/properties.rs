use num_complex::Complex64 as C64;
use proptest::prelude::*;

use paraprod::dyadic::{self, haar_decompose, haar_reconstruct};
use paraprod::majorant::{self, MajorantProblem};
use paraprod::norms::{self, BmoVariant};
use paraprod::operators::{LinearMap, OperatorHandle, OperatorKind};
use paraprod::random::{random_function, random_hermitian, random_matrix, random_unitary, seeded};
use paraprod::{linalg, CMat};

fn shape() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 0usize..=5, 1usize..=3)
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), Just(f64::INFINITY)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haar_roundtrip((seed, n, dim) in shape()) {
        let f = random_function(&mut seeded(seed), n, dim, false);
        let g = haar_reconstruct(&haar_decompose(&f)).unwrap();
        prop_assert!(f.max_abs_diff(&g).unwrap() < 1e-12);
    }

    #[test]
    fn refinement_commutes_with_expectation((seed, n, dim) in shape(), extra in 0usize..=2) {
        let f = random_function(&mut seeded(seed), n, dim, false);
        let fine = dyadic::refine(&f, n + extra).unwrap();
        for k in 0..=n {
            let a = dyadic::refine(&dyadic::conditional_expectation(&f, k).unwrap(), n + extra).unwrap();
            let b = dyadic::conditional_expectation(&fine, k).unwrap();
            prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn operator_adjoints_pair((seed, n, dim) in shape()) {
        let mut rng = seeded(seed);
        let phi = random_function(&mut rng, n, dim, true);
        let f = random_function(&mut rng, n, dim, false);
        let g = random_function(&mut rng, n, dim, false);
        for kind in [OperatorKind::Paraproduct, OperatorKind::ParaproductAdjoint, OperatorKind::HaarMultiplier] {
            let op = OperatorHandle::new(kind, phi.clone());
            let a = linalg::trace_pairing(&op.apply(&f).unwrap(), &g).unwrap();
            let b = linalg::trace_pairing(&f, &op.adjoint_apply(&g).unwrap()).unwrap();
            prop_assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()));
            let via_handle = op.adjoint_handle().apply(&g).unwrap();
            prop_assert!(via_handle.max_abs_diff(&op.adjoint_apply(&g).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn schatten_norms_ordered_and_unitarily_invariant(seed in any::<u64>(), dim in 1usize..=5, p in exponent()) {
        let mut rng = seeded(seed);
        let a = random_matrix(&mut rng, dim);
        let (u, v) = (random_unitary(&mut rng, dim), random_unitary(&mut rng, dim));
        let np = linalg::schatten_norm(&a, p).unwrap();
        let rotated = linalg::schatten_norm(&(&u * &a * &v), p).unwrap();
        prop_assert!((np - rotated).abs() < 1e-10 * np.max(1.0));
        let nq = linalg::schatten_norm(&a, 2.0 * p).unwrap();
        prop_assert!(nq <= np * (1.0 + 1e-12));
    }

    #[test]
    fn bmo_ordering_and_scaling((seed, n, dim) in shape(), s in 0.1f64..10.0) {
        let phi = random_function(&mut seeded(seed), n, dim, true);
        let m = norms::bmo_m_norm(&phi).value;
        let cr = norms::bmo_norm(&phi, BmoVariant::ColumnRow).value;
        prop_assert!(cr <= m + 1e-9);
        let scaled = norms::bmo_m_norm(&phi.scale(C64::new(0.0, s))).value;
        prop_assert!((scaled - s * m).abs() < 1e-9 * (1.0 + s * m));
    }

    #[test]
    fn majorant_monotone_in_constraints(seed in any::<u64>(), dim in 1usize..=4, j in 1usize..=4) {
        let mut rng = seeded(seed);
        let cons: Vec<CMat> = (0..=j).map(|_| random_hermitian(&mut rng, dim)).collect();
        let fewer = majorant::min_trace_majorant(&MajorantProblem::new(cons[..j].to_vec()).unwrap(), 1e-9).unwrap();
        let more = majorant::min_trace_majorant(&MajorantProblem::new(cons).unwrap(), 1e-9).unwrap();
        prop_assert!(more.primal_value >= fewer.primal_value - 1e-7);
        prop_assert!(fewer.gap <= 1e-7 * fewer.primal_value.abs().max(1.0));
    }
}
