//! Matrix-valued step functions on the dyadic filtration of `[0, 1)` and the
//! martingale calculus on them.
//!
//! Atom `j` of a resolution-`n` function covers `[j 2^-n, (j+1) 2^-n)`. The
//! level-`k` interval containing atom `j` has index `j >> (n - k)`. Haar
//! differences are `+C` on the left child and `-C` on the right child.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::kernel::{self, Op};
use crate::linalg;

/// Dense complex matrix used for single matrix values.
pub type CMat = DMatrix<C64>;

/// Finest supported dyadic resolution.
pub const MAX_RESOLUTION: usize = 12;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A step function on `[0, 1)`, constant on the `2^n` atoms of level `n`,
/// valued in `N x N` complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicMatrixFunction {
    n: usize,
    dim: usize,
    /// Atom values, each block row-major.
    data: Vec<C64>,
}

impl DyadicMatrixFunction {
    pub fn zeros(n: usize, dim: usize) -> Result<Self> {
        check_shape(n, dim)?;
        Ok(Self {
            n,
            dim,
            data: vec![ZERO; (1 << n) * dim * dim],
        })
    }

    /// Builds from row-major atom blocks laid out consecutively.
    pub fn from_flat(n: usize, dim: usize, data: Vec<C64>) -> Result<Self> {
        check_shape(n, dim)?;
        let expected = (1usize << n) * dim * dim;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} entries for n={n}, N={dim}, got {}",
                data.len()
            )));
        }
        Ok(Self { n, dim, data })
    }

    pub fn from_matrices(n: usize, values: &[CMat]) -> Result<Self> {
        let dim = values.first().map(|m| m.nrows()).unwrap_or(0);
        if values.len() != 1 << n.min(63) {
            return Err(Error::ShapeMismatch(format!(
                "expected {} atom values, got {}",
                1u64 << n.min(63),
                values.len()
            )));
        }
        let mut data = Vec::with_capacity(values.len() * dim * dim);
        for m in values {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "atom value {}x{} in a function of dimension {dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            push_row_major(&mut data, m);
        }
        Self::from_flat(n, dim, data)
    }

    /// The constant function with value `value`.
    pub fn constant(n: usize, value: &CMat) -> Result<Self> {
        if value.nrows() != value.ncols() {
            return Err(Error::NotSquare {
                rows: value.nrows(),
                cols: value.ncols(),
            });
        }
        let dim = value.nrows();
        check_shape(n, dim)?;
        let mut block = Vec::with_capacity(dim * dim);
        push_row_major(&mut block, value);
        let mut data = Vec::with_capacity((1 << n) * dim * dim);
        for _ in 0..1 << n {
            data.extend_from_slice(&block);
        }
        Ok(Self { n, dim, data })
    }

    pub fn from_fn(n: usize, dim: usize, mut f: impl FnMut(usize) -> CMat) -> Result<Self> {
        check_shape(n, dim)?;
        let values: Vec<CMat> = (0..1 << n).map(&mut f).collect();
        Self::from_matrices(n, &values)
    }

    /// Scalar (`N = 1`) function from its atom values.
    pub fn scalar(n: usize, values: &[C64]) -> Result<Self> {
        Self::from_flat(n, 1, values.to_vec())
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_atoms(&self) -> usize {
        1 << self.n
    }

    pub fn block_len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    /// Row-major block of atom `j`.
    pub fn atom(&self, j: usize) -> &[C64] {
        let b = self.block_len();
        &self.data[j * b..(j + 1) * b]
    }

    pub(crate) fn atom_mut(&mut self, j: usize) -> &mut [C64] {
        let b = self.block_len();
        &mut self.data[j * b..(j + 1) * b]
    }

    pub fn atom_matrix(&self, j: usize) -> CMat {
        CMat::from_row_slice(self.dim, self.dim, self.atom(j))
    }

    pub fn matrices(&self) -> Vec<CMat> {
        (0..self.num_atoms()).map(|j| self.atom_matrix(j)).collect()
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "(n={}, N={}) vs (n={}, N={})",
                self.n, self.dim, other.n, other.dim
            )));
        }
        Ok(())
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_entries(|z| z * s)
    }

    pub fn map_entries(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C64, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            n: self.n,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// Pointwise conjugate transpose `t -> f(t)^*`.
    pub fn adjoint(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.num_atoms() {
            data.extend(kernel::adjoint(self.atom(j), self.dim));
        }
        Self {
            n: self.n,
            dim: self.dim,
            data,
        }
    }

    /// Pointwise matrix product `t -> f(t) g(t)`.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = Self::zeros(self.n, self.dim)?;
        for j in 0..self.num_atoms() {
            kernel::gemm_acc(
                out.atom_mut(j),
                self.atom(j),
                Op::Plain,
                other.atom(j),
                Op::Plain,
                self.dim,
            );
        }
        Ok(out)
    }

    pub fn map_atoms(&self, mut f: impl FnMut(usize, CMat) -> CMat) -> Result<Self> {
        let values: Vec<CMat> = (0..self.num_atoms())
            .map(|j| f(j, self.atom_matrix(j)))
            .collect();
        Self::from_matrices(self.n, &values)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `L^2(T, S^2_N)` norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s / self.num_atoms() as f64).sqrt()
    }

    /// Integral over `[0, 1)`, i.e. the mean of the atom values.
    pub fn mean(&self) -> CMat {
        let means = self.level_mean(0);
        CMat::from_row_slice(self.dim, self.dim, &means)
    }

    /// `t -> s(t) M` for a scalar function `s`.
    pub fn tensor_matrix(&self, m: &CMat) -> Result<Self> {
        if self.dim != 1 {
            return Err(Error::ShapeMismatch("tensor_matrix needs a scalar function".into()));
        }
        let values: Vec<CMat> = self.data.iter().map(|&z| m * z).collect();
        Self::from_matrices(self.n, &values)
    }

    /// Whether every atom value is Hermitian to `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.num_atoms()).all(|j| {
            let a = self.atom(j);
            (0..self.dim).all(|r| {
                (0..self.dim).all(|c| (a[r * self.dim + c] - a[c * self.dim + r].conj()).norm() <= tol)
            })
        })
    }

    /// Means over the `2^k` level-`k` intervals, blocks laid out consecutively.
    pub(crate) fn level_mean(&self, k: usize) -> Vec<C64> {
        let b = self.block_len();
        let mut cur = self.data.clone();
        for level in (k..self.n).rev() {
            let count = 1 << level;
            let mut next = vec![ZERO; count * b];
            for i in 0..count {
                let (l, r) = (&cur[2 * i * b..(2 * i + 1) * b], &cur[(2 * i + 1) * b..(2 * i + 2) * b]);
                for ((o, x), y) in next[i * b..(i + 1) * b].iter_mut().zip(l).zip(r) {
                    *o = (x + y) * 0.5;
                }
            }
            cur = next;
        }
        cur
    }

    /// Means at every level `0..=n`; entry `k` holds `2^k` blocks.
    pub(crate) fn mean_pyramid(&self) -> Vec<Vec<C64>> {
        let b = self.block_len();
        let mut levels = vec![self.data.clone()];
        for level in (0..self.n).rev() {
            let cur = levels.last().expect("non-empty");
            let count = 1 << level;
            let mut next = vec![ZERO; count * b];
            for i in 0..count {
                for t in 0..b {
                    next[i * b + t] = (cur[2 * i * b + t] + cur[(2 * i + 1) * b + t]) * 0.5;
                }
            }
            levels.push(next);
        }
        levels.reverse();
        levels
    }

    /// Expands `2^k` level-`k` blocks to a resolution-`n` function.
    pub(crate) fn expand_level(n: usize, dim: usize, k: usize, blocks: &[C64]) -> Self {
        let b = dim * dim;
        let mut data = Vec::with_capacity((1 << n) * b);
        let shift = n - k;
        for j in 0..1usize << n {
            let i = j >> shift;
            data.extend_from_slice(&blocks[i * b..(i + 1) * b]);
        }
        Self { n, dim, data }
    }

    /// Sums per-level piecewise constants: `terms[k]` holds `2^k` blocks and the
    /// result at atom `j` is `sum_k terms[k][j >> (n - k)]`.
    pub(crate) fn accumulate_levels(n: usize, dim: usize, terms: &[Vec<C64>]) -> Self {
        debug_assert_eq!(terms.len(), n + 1);
        let b = dim * dim;
        let mut acc = terms[0].clone();
        for (k, term) in terms.iter().enumerate().skip(1) {
            let mut next = term.clone();
            for i in 0..1usize << k {
                kernel::add_assign(&mut next[i * b..(i + 1) * b], &acc[(i / 2) * b..(i / 2 + 1) * b]);
            }
            acc = next;
        }
        Self { n, dim, data: acc }
    }
}

fn check_shape(n: usize, dim: usize) -> Result<()> {
    if n > MAX_RESOLUTION {
        return Err(Error::range("resolution", n as f64, format!("0..={MAX_RESOLUTION}")));
    }
    if dim == 0 {
        return Err(Error::range("dimension", 0.0, "1.."));
    }
    Ok(())
}

pub(crate) fn push_row_major(out: &mut Vec<C64>, m: &CMat) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
}

/// `E_k f`: averages over level-`k` intervals, returned at the resolution of `f`.
pub fn conditional_expectation(f: &DyadicMatrixFunction, k: usize) -> Result<DyadicMatrixFunction> {
    if k > f.n {
        return Err(Error::range("level", k as f64, format!("0..={}", f.n)));
    }
    Ok(DyadicMatrixFunction::expand_level(f.n, f.dim, k, &f.level_mean(k)))
}

/// `d_k f = E_k f - E_{k-1} f` for `1 <= k <= n`.
pub fn martingale_difference(f: &DyadicMatrixFunction, k: usize) -> Result<DyadicMatrixFunction> {
    if k == 0 || k > f.n {
        return Err(Error::range("level", k as f64, format!("1..={}", f.n)));
    }
    let fine = f.level_mean(k);
    let b = f.block_len();
    let mut blocks = fine.clone();
    let coarse = f.level_mean(k - 1);
    for i in 0..1usize << k {
        for t in 0..b {
            blocks[i * b + t] = fine[i * b + t] - coarse[(i / 2) * b + t];
        }
    }
    Ok(DyadicMatrixFunction::expand_level(f.n, f.dim, k, &blocks))
}

/// Lossless Haar representation: the global mean plus one coefficient per
/// interval per level.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarExpansion {
    pub resolution: usize,
    pub dim: usize,
    pub mean: CMat,
    /// `diffs[k - 1][i]` is the coefficient of level `k` on level-`(k-1)`
    /// interval `i`; there are `2^(k-1)` of them.
    pub diffs: Vec<Vec<CMat>>,
}

pub fn haar_decompose(f: &DyadicMatrixFunction) -> HaarExpansion {
    let pyramid = f.mean_pyramid();
    let (dim, b) = (f.dim, f.block_len());
    let mean = CMat::from_row_slice(dim, dim, &pyramid[0]);
    let diffs = (1..=f.n)
        .map(|k| {
            let level = &pyramid[k];
            (0..1usize << (k - 1))
                .map(|i| {
                    let l = &level[2 * i * b..(2 * i + 1) * b];
                    let r = &level[(2 * i + 1) * b..(2 * i + 2) * b];
                    let c: Vec<C64> = l.iter().zip(r).map(|(x, y)| (x - y) * 0.5).collect();
                    CMat::from_row_slice(dim, dim, &c)
                })
                .collect()
        })
        .collect();
    HaarExpansion {
        resolution: f.n,
        dim,
        mean,
        diffs,
    }
}

pub fn haar_reconstruct(h: &HaarExpansion) -> Result<DyadicMatrixFunction> {
    let dim = h.dim;
    if h.mean.nrows() != dim || h.mean.ncols() != dim {
        return Err(Error::ShapeMismatch("mean coefficient".into()));
    }
    if h.diffs.len() != h.resolution {
        return Err(Error::ShapeMismatch(format!(
            "{} diff levels for resolution {}",
            h.diffs.len(),
            h.resolution
        )));
    }
    let mut level = vec![h.mean.clone()];
    for (k, coeffs) in h.diffs.iter().enumerate() {
        if coeffs.len() != 1 << k {
            return Err(Error::ShapeMismatch(format!(
                "level {} has {} coefficients, expected {}",
                k + 1,
                coeffs.len(),
                1 << k
            )));
        }
        let mut next = Vec::with_capacity(2 * level.len());
        for (parent, c) in level.iter().zip(coeffs) {
            if c.nrows() != dim || c.ncols() != dim {
                return Err(Error::ShapeMismatch("diff coefficient".into()));
            }
            next.push(parent + c);
            next.push(parent - c);
        }
        level = next;
    }
    DyadicMatrixFunction::from_matrices(h.resolution, &level)
}

/// The `k`-th Rademacher function at resolution `n`: `+1` on left children
/// of level-`(k-1)` intervals, `-1` on right children.
pub fn rademacher(k: usize, n: usize) -> Result<DyadicMatrixFunction> {
    if k == 0 || k > n {
        return Err(Error::range("level", k as f64, format!("1..={n}")));
    }
    let values: Vec<C64> = (0..1usize << n)
        .map(|j| {
            let bit = (j >> (n - k)) & 1;
            C64::new(if bit == 0 { 1.0 } else { -1.0 }, 0.0)
        })
        .collect();
    DyadicMatrixFunction::scalar(n, &values)
}

/// Per-level blocks of `(d_k f)^* (d_k f)`, which is constant on level-`(k-1)`
/// intervals. Entry `k - 1` holds `2^(k-1)` blocks.
pub(crate) fn difference_gram_levels(f: &DyadicMatrixFunction) -> Vec<Vec<C64>> {
    let h = haar_decompose(f);
    let dim = f.dim;
    h.diffs
        .iter()
        .map(|coeffs| {
            let mut out = Vec::with_capacity(coeffs.len() * dim * dim);
            for c in coeffs {
                push_row_major(&mut out, &(c.adjoint() * c));
            }
            out
        })
        .collect()
}

/// `S(f) = (sum_k |d_k f|^2)^(1/2)`, pointwise.
pub fn square_function(f: &DyadicMatrixFunction) -> DyadicMatrixFunction {
    let sq = square_function_squared(f);
    sq.map_atoms(|_, m| linalg::psd_sqrt(&m))
        .expect("shape preserved")
}

/// `S(f)^2 = sum_k (d_k f)^* (d_k f)`, pointwise.
pub fn square_function_squared(f: &DyadicMatrixFunction) -> DyadicMatrixFunction {
    // The level-k term is constant on level-(k-1) intervals.
    let mut terms = difference_gram_levels(f);
    terms.push(vec![ZERO; f.num_atoms() * f.block_len()]);
    DyadicMatrixFunction::accumulate_levels(f.n, f.dim, &terms)
}

/// Same function at a finer resolution.
pub fn refine(f: &DyadicMatrixFunction, n_fine: usize) -> Result<DyadicMatrixFunction> {
    if n_fine < f.n {
        return Err(Error::range("resolution", n_fine as f64, format!("{}..", f.n)));
    }
    check_shape(n_fine, f.dim)?;
    Ok(DyadicMatrixFunction::expand_level(n_fine, f.dim, f.n, &f.data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_function, seeded};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn scalar_values(f: &DyadicMatrixFunction) -> Vec<f64> {
        f.data().iter().map(|z| z.re).collect()
    }

    #[test]
    fn expectation_of_constant_is_constant() {
        let m = CMat::from_fn(2, 2, |i, j| C64::new(i as f64 + 1.0, j as f64));
        let f = DyadicMatrixFunction::constant(3, &m).unwrap();
        for k in 0..=3 {
            assert!(conditional_expectation(&f, k).unwrap().max_abs_diff(&f).unwrap() < 1e-15);
        }
    }

    #[test]
    fn two_point_averages() {
        let f = DyadicMatrixFunction::scalar(2, &[c(1.0), c(3.0), c(5.0), c(7.0)]).unwrap();
        assert_eq!(scalar_values(&conditional_expectation(&f, 1).unwrap()), vec![2.0, 2.0, 6.0, 6.0]);
        assert_eq!(conditional_expectation(&f, 2).unwrap(), f);
        assert!(conditional_expectation(&f, 3).is_err());
    }

    #[test]
    fn rademacher_values() {
        assert_eq!(scalar_values(&rademacher(1, 2).unwrap()), vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(scalar_values(&rademacher(2, 2).unwrap()), vec![1.0, -1.0, 1.0, -1.0]);
        assert!(rademacher(0, 2).is_err());
        assert!(rademacher(3, 2).is_err());
        let r1 = rademacher(1, 3).unwrap();
        assert!(conditional_expectation(&r1, 0).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn rademacher_orthonormal() {
        let n = 4;
        for j in 1..=n {
            for k in 1..=n {
                let rj = rademacher(j, n).unwrap();
                let rk = rademacher(k, n).unwrap();
                let ip = crate::linalg::trace_pairing(&rj, &rk).unwrap();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((ip - c(expected)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn differences_of_rademacher() {
        let n = 4;
        for j in 1..=n {
            let r = rademacher(j, n).unwrap();
            for k in 1..=n {
                let d = martingale_difference(&r, k).unwrap();
                if k == j {
                    assert!(d.max_abs_diff(&r).unwrap() < 1e-15);
                } else {
                    assert!(d.max_abs() < 1e-15);
                }
            }
        }
        assert!(martingale_difference(&rademacher(1, 2).unwrap(), 0).is_err());
    }

    #[test]
    fn telescoping_reconstruction() {
        let mut rng = seeded(5);
        let f = random_function(&mut rng, 5, 3, false);
        let mut acc = conditional_expectation(&f, 0).unwrap();
        for k in 1..=5 {
            acc = acc.add(&martingale_difference(&f, k).unwrap()).unwrap();
        }
        assert!(acc.max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn haar_of_rademacher_and_constant() {
        let h = haar_decompose(&rademacher(1, 1).unwrap());
        assert!(h.mean[(0, 0)].norm() < 1e-15);
        assert_eq!(h.diffs.len(), 1);
        assert_eq!(h.diffs[0][0][(0, 0)], c(1.0));

        let m = CMat::identity(2, 2) * c(3.0);
        let h = haar_decompose(&DyadicMatrixFunction::constant(3, &m).unwrap());
        assert_eq!(h.mean, m);
        for (k, level) in h.diffs.iter().enumerate() {
            assert_eq!(level.len(), 1 << k);
            assert!(level.iter().all(|d| d.norm() == 0.0));
        }
    }

    #[test]
    fn haar_diffs_match_martingale_differences() {
        let mut rng = seeded(11);
        let f = random_function(&mut rng, 4, 2, false);
        let h = haar_decompose(&f);
        for k in 1..=4 {
            let d = martingale_difference(&f, k).unwrap();
            for j in 0..16 {
                let interval = j >> (4 - k + 1);
                let left = (j >> (4 - k)) & 1 == 0;
                let c = &h.diffs[k - 1][interval];
                let expected = if left { c.clone() } else { -c };
                assert!((d.atom_matrix(j) - expected).norm() < 1e-14);
            }
        }
        assert!(haar_reconstruct(&h).unwrap().max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn haar_reconstruct_rejects_bad_levels() {
        let mut h = haar_decompose(&rademacher(2, 2).unwrap());
        h.diffs[1].pop();
        assert!(haar_reconstruct(&h).is_err());
    }

    #[test]
    fn square_function_cases() {
        let m = CMat::identity(2, 2);
        let f = DyadicMatrixFunction::constant(3, &m).unwrap();
        assert!(square_function(&f).max_abs() < 1e-15);

        let coeff = CMat::from_row_slice(2, 2, &[c(1.0), C64::new(0.0, 2.0), c(0.0), c(-1.0)]);
        let r = rademacher(2, 3).unwrap();
        let g = r.tensor_matrix(&coeff).unwrap();
        let s = square_function(&g);
        let expected = crate::linalg::modulus(&coeff);
        for j in 0..8 {
            assert!((s.atom_matrix(j) - &expected).norm() < 1e-12);
        }
    }

    #[test]
    fn square_function_l2_identity() {
        let mut rng = seeded(3);
        let f = random_function(&mut rng, 5, 3, false);
        let s = square_function(&f);
        let lhs = s.l2_norm().powi(2);
        let rhs: f64 = (1..=5).map(|k| martingale_difference(&f, k).unwrap().l2_norm().powi(2)).sum();
        assert!((lhs - rhs).abs() < 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn square_function_at_resolution_zero() {
        let f = DyadicMatrixFunction::constant(0, &CMat::identity(3, 3)).unwrap();
        assert_eq!(square_function(&f).resolution(), 0);
        assert!(square_function(&f).max_abs() == 0.0);
    }

    #[test]
    fn refine_cases() {
        let f = DyadicMatrixFunction::scalar(0, &[c(5.0)]).unwrap();
        assert_eq!(scalar_values(&refine(&f, 1).unwrap()), vec![5.0, 5.0]);
        assert_eq!(refine(&f, 0).unwrap(), f);
        let g = DyadicMatrixFunction::scalar(1, &[c(1.0), c(2.0)]).unwrap();
        assert!(refine(&g, 0).is_err());
        let mut rng = seeded(1);
        let h = random_function(&mut rng, 3, 2, false);
        assert!((refine(&h, 6).unwrap().l2_norm() - h.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn shape_limits() {
        assert!(DyadicMatrixFunction::zeros(MAX_RESOLUTION + 1, 1).is_err());
        assert!(DyadicMatrixFunction::zeros(2, 0).is_err());
        assert!(DyadicMatrixFunction::from_flat(1, 2, vec![ZERO; 7]).is_err());
    }
}
