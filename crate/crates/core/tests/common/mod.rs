//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use paraprod::majorant::{self, MajorantProblem};
use paraprod::{CMat, DyadicMatrixFunction};

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn mat2(a: f64, b: f64, c: f64, d: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[re(a), re(b), re(c), re(d)])
}

pub fn ternary(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Brute force over real `A = [[a, c], [c, b]]`: for fixed `(a, c)` the
/// smallest feasible `b` is explicit, and the remaining problem is convex.
pub fn noncommuting_oracle() -> f64 {
    let b_min = |a: f64, c: f64| (c * c / (a - 1.0)).max(0.5 + (c - 0.5).powi(2) / (a - 0.5)).max(0.5);
    let outer = |a: f64| ternary(-5.0, 5.0, |c| a + b_min(a, c)).1;
    ternary(1.0 + 1e-12, 10.0, outer).1
}

/// The two-atom problem solved jointly with block-diagonal constraints; the
/// maximal norm is the normalized trace of the optimal majorant.
pub fn joint_two_atom(seq: &[DyadicMatrixFunction]) -> f64 {
    let dim = seq[0].dim();
    let cons: Vec<CMat> = seq
        .iter()
        .map(|f| {
            let mut big = CMat::zeros(2 * dim, 2 * dim);
            big.view_mut((0, 0), (dim, dim)).copy_from(&f.atom_matrix(0));
            big.view_mut((dim, dim), (dim, dim)).copy_from(&f.atom_matrix(1));
            big
        })
        .collect();
    let cert = majorant::min_trace_majorant(&MajorantProblem::new(cons).unwrap(), 1e-10).unwrap();
    0.5 * cert.primal_value
}
