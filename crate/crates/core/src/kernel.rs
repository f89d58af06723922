//! Row-major complex kernels for the small per-atom matrices.

use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Plain,
    Adjoint,
}

#[inline]
fn at(m: &[C64], op: Op, dim: usize, i: usize, j: usize) -> C64 {
    match op {
        Op::Plain => m[i * dim + j],
        Op::Adjoint => m[j * dim + i].conj(),
    }
}

/// `out += op(a) * op(b)` for `dim x dim` row-major blocks.
pub(crate) fn gemm_acc(out: &mut [C64], a: &[C64], op_a: Op, b: &[C64], op_b: Op, dim: usize) {
    debug_assert_eq!(out.len(), dim * dim);
    if op_a == Op::Plain && op_b == Op::Plain {
        for i in 0..dim {
            let row = &mut out[i * dim..(i + 1) * dim];
            for l in 0..dim {
                let ail = a[i * dim + l];
                if ail == C64::new(0.0, 0.0) {
                    continue;
                }
                let brow = &b[l * dim..(l + 1) * dim];
                for (o, &blj) in row.iter_mut().zip(brow) {
                    *o += ail * blj;
                }
            }
        }
        return;
    }
    for i in 0..dim {
        for j in 0..dim {
            let mut s = C64::new(0.0, 0.0);
            for l in 0..dim {
                s += at(a, op_a, dim, i, l) * at(b, op_b, dim, l, j);
            }
            out[i * dim + j] += s;
        }
    }
}

pub(crate) fn add_assign(out: &mut [C64], x: &[C64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += v;
    }
}

pub(crate) fn trace(m: &[C64], dim: usize) -> C64 {
    (0..dim).map(|i| m[i * dim + i]).sum()
}

/// `tr(a^* b)` for row-major blocks, i.e. the Frobenius inner product.
pub(crate) fn frobenius_inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn adjoint(m: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[j * dim + i] = m[i * dim + j].conj();
        }
    }
    out
}
