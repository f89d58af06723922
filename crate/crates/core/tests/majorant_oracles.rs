mod common;

use common::{joint_two_atom, mat2, noncommuting_oracle};
use paraprod::majorant::{self, MajorantProblem};
use paraprod::random::{random_hermitian, random_psd, seeded};
use paraprod::{linalg, CMat, DyadicMatrixFunction};

#[test]
fn noncommuting_pair_matches_oracle() {
    let oracle = noncommuting_oracle();
    // Dual side: 1 + tr((B1 - B2)_+) = 1 + 1/sqrt 2.
    assert!((oracle - (1.0 + std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-7);
    let prob = MajorantProblem::new(vec![mat2(1.0, 0.0, 0.0, 0.0), mat2(0.5, 0.5, 0.5, 0.5)]).unwrap();
    let cert = majorant::min_trace_majorant(&prob, 1e-9).unwrap();
    assert!((cert.primal_value - oracle).abs() < 1e-5, "{} vs {oracle}", cert.primal_value);
}

#[test]
fn pointwise_decoupling_matches_joint_problem() {
    let mut rng = seeded(11);
    for dim in [1, 2, 3] {
        let seq: Vec<DyadicMatrixFunction> = (0..3)
            .map(|_| DyadicMatrixFunction::from_fn(1, dim, |_| random_psd(&mut rng, dim, 1)).unwrap())
            .collect();
        let pointwise = majorant::max_norm_l1_positive_tol(&seq, 1e-10).unwrap().value;
        assert!((pointwise - joint_two_atom(&seq)).abs() < 1e-6);
    }
}

#[test]
fn selfadjoint_agrees_with_positive_on_psd_input() {
    let mut rng = seeded(12);
    let seq: Vec<DyadicMatrixFunction> = (0..4)
        .map(|_| DyadicMatrixFunction::from_fn(2, 3, |_| random_psd(&mut rng, 3, 2)).unwrap())
        .collect();
    let a = majorant::max_norm_l1_positive(&seq).unwrap().value;
    let b = majorant::max_norm_l1_selfadjoint(&seq).unwrap().value;
    assert!((a - b).abs() < 1e-6 * a.max(1.0));
}

#[test]
fn larger_random_instances_certify() {
    let mut rng = seeded(13);
    let start = std::time::Instant::now();
    for (dim, j) in [(16, 33), (8, 33), (16, 5), (12, 20)] {
        let cons: Vec<CMat> = (0..j).map(|_| random_hermitian(&mut rng, dim)).collect();
        let prob = MajorantProblem::new(cons).unwrap();
        let cert = majorant::min_trace_majorant(&prob, 1e-7).unwrap();
        assert!(cert.gap <= 1e-6 * cert.primal_value.abs().max(1.0));
        for b in prob.constraints() {
            assert!(linalg::lambda_min(&(&cert.primal - b)).unwrap() >= -1e-8);
        }
        eprintln!("N={dim} J={j}: {} newton steps, gap {:e}, {:?}", cert.newton_steps, cert.gap, start.elapsed());
    }
}
