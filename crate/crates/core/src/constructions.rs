//! Explicit matrices and functions behind the `(log N)^2` lower bound for
//! corner-projection maximal norms.
//!
//! Indices in the docs are 1-based (`e_{1,k}`, `h_k`), storage is 0-based.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dyadic::{CMat, DyadicMatrixFunction, MAX_RESOLUTION};
use crate::error::{Error, Result};
use crate::linalg;
use crate::majorant::{self, MajorantCertificate, MajorantProblem};

/// Antisymmetric Hilbert matrix `h_ij = 1/(j - i)`, zero diagonal.
pub fn hilbert_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 / (j as f64 - i as f64) })
}

/// Keeps entries with column <= row.
pub fn triangle_projection<T: ComplexField>(a: &DMatrix<T>) -> DMatrix<T> {
    let zero: T = nalgebra::convert(0.0);
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if j <= i { a[(i, j)].clone() } else { zero.clone() })
}

/// `P_n`: keeps the leading `n x n` block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CornerProjection {
    size: usize,
}

impl CornerProjection {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::range("corner size", 0.0, "1.."));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn apply<T: ComplexField>(&self, a: &DMatrix<T>) -> Result<DMatrix<T>> {
        let dim = a.nrows().min(a.ncols());
        if self.size > dim {
            return Err(Error::range("corner size", self.size as f64, format!("1..={dim}")));
        }
        let zero: T = nalgebra::convert(0.0);
        let s = self.size;
        Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
            if i < s && j < s {
                a[(i, j)].clone()
            } else {
                zero.clone()
            }
        }))
    }

    /// `P_n o P_m = P_min(n,m)`.
    pub fn compose(&self, other: &CornerProjection) -> CornerProjection {
        CornerProjection {
            size: self.size.min(other.size),
        }
    }
}

pub fn corner_projection<T: ComplexField>(a: &DMatrix<T>, n: usize) -> Result<DMatrix<T>> {
    CornerProjection::new(n)?.apply(a)
}

/// `h_k^* h_k` where `h_k` keeps only row `k` of `h`. Each is PSD of rank at most one
/// and they sum to `h^* h`.
pub fn gk_family(n: usize) -> Vec<DMatrix<f64>> {
    let h = hilbert_matrix(n);
    (0..n)
        .map(|k| {
            let row = h.row(k);
            row.transpose() * row
        })
        .collect()
}

/// The function with `d_k f = alpha_k r_k e_{1,k}`, `k = 1..N`, at resolution
/// `n = N` and matrix size `N`.
pub fn sharpness_function(alpha: &[C64]) -> Result<DyadicMatrixFunction> {
    let dim = alpha.len();
    if dim == 0 {
        return Err(Error::ShapeMismatch("empty alpha".into()));
    }
    if dim > MAX_RESOLUTION {
        return Err(Error::TooLarge {
            size: dim,
            limit: MAX_RESOLUTION,
        });
    }
    let norm = alpha.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 1.0 + 1e-12 {
        return Err(Error::range("|alpha|_2", norm, "[0, 1]"));
    }
    let n = dim;
    DyadicMatrixFunction::from_fn(n, dim, |j| {
        let mut m = CMat::zeros(dim, dim);
        for (k, a) in alpha.iter().enumerate() {
            // r_{k+1} at atom j: sign of bit k counted from the top.
            let bit = (j >> (n - 1 - k)) & 1;
            let sign = if bit == 0 { 1.0 } else { -1.0 };
            m[(0, k)] = a * sign;
        }
        m
    })
}

/// `D P_m(conj(alpha) alpha^T) D` with `D = diag(r_k(t))` at atom `atom`:
/// the expected value of `|E_m f(t)|^2` for [`sharpness_function`].
pub fn sharpness_modulus_square(alpha: &[C64], m: usize, atom: usize) -> CMat {
    let dim = alpha.len();
    let sign = |k: usize| if (atom >> (dim - 1 - k)) & 1 == 0 { 1.0 } else { -1.0 };
    CMat::from_fn(dim, dim, |k, l| {
        if k < m && l < m {
            alpha[k].conj() * alpha[l] * (sign(k) * sign(l))
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `(P_m A)_{m=1..N}` as majorant constraints.
pub fn corner_sequence(a: &CMat) -> Result<Vec<CMat>> {
    let dim = a.nrows();
    (1..=dim).map(|m| corner_projection(a, m)).collect()
}

/// `|(P_m A)_m|_{L^1(M_N, l^inf)}` with its certificate.
pub fn corner_maximal_norm(a: &CMat, tol: f64) -> Result<MajorantCertificate> {
    let prob = MajorantProblem::new(corner_sequence(a)?)?;
    majorant::min_trace_majorant(&prob, tol)
}

/// `|(|E_m f|^2)_m|_{L^1(l^inf)}` for the sharpness function of `alpha`.
/// Every atom gives the same value since `|E_m f(t)|^2` is a fixed sequence
/// conjugated by the unitary `diag(r_k(t))`, so only one atom is solved.
pub fn sharpness_maximal_value(alpha: &[C64], tol: f64) -> Result<f64> {
    let dim = alpha.len();
    if dim == 0 {
        return Err(Error::ShapeMismatch("empty alpha".into()));
    }
    let col = CMat::from_iterator(dim, 1, alpha.iter().map(|z| z.conj()));
    let a = &col * col.adjoint();
    Ok(corner_maximal_norm(&a, tol)?.primal_value)
}

/// Unit `alpha` attaining `L(N)` through the dual certificate built from
/// `g_k / |h|^2`: the top right singular vector of `T h`.
pub fn sharpness_alpha(n: usize) -> Vec<C64> {
    let th = triangle_projection(&hilbert_matrix(n));
    let g = th.transpose() * &th;
    let eig = g.symmetric_eigen();
    let (top, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    eig.eigenvectors.column(top).iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct HilbertNorms {
    pub n: usize,
    pub h_norm: f64,
    pub th_norm: f64,
    /// `|T h| / ln(N + 1)`.
    pub th_over_log: f64,
    /// `L(N) = |T h|^2 / |h|^2`, a lower bound for the best corner constant.
    pub lower_bound: f64,
}

pub fn hilbert_norms(n: usize) -> HilbertNorms {
    let h = hilbert_matrix(n);
    let h_norm = linalg::operator_norm_real(&h);
    let th_norm = linalg::operator_norm_real(&triangle_projection(&h));
    let lower_bound = if h_norm > 0.0 { th_norm * th_norm / (h_norm * h_norm) } else { 0.0 };
    HilbertNorms {
        n,
        h_norm,
        th_norm,
        th_over_log: th_norm / ((n + 1) as f64).ln(),
        lower_bound,
    }
}
