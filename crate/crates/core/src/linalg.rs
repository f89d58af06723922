//! Dense Hermitian spectral calculus, Schatten norms and the trace pairing on
//! matrix-valued functions.
//!
//! Every spectral quantity goes through [`hermitian_eig`]. Singular values of
//! a general `A` are read off the Hermitian dilation `[[0, A], [A^*, 0]]`,
//! whose spectrum is `{+s_i, -s_i}`; this keeps tiny singular values accurate
//! to `eps * |A|` where the `A^*A` route would only give `sqrt(eps) * |A|`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::dyadic::{CMat, DyadicMatrixFunction};
use crate::error::{Error, Result};
use crate::kernel;

/// Relative asymmetry accepted by [`hermitian_eig`] before it refuses input.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigenvalues in descending order with the matching unitary eigenvector matrix
/// (eigenvector `i` is column `i`).
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

impl HermitianSpectrum {
    /// `V diag(f(lambda)) V^*`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMat {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(j).scale_mut(s);
        }
        &scaled * v.adjoint()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn check_square(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn symmetrized(a: &CMat) -> Result<CMat> {
    check_square(a)?;
    let adj = a.adjoint();
    let asym = (a - &adj).norm();
    let scale = a.norm();
    if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(Error::NotHermitian {
            asymmetry: asym / scale.max(f64::MIN_POSITIVE),
        });
    }
    Ok((a + adj) * C64::new(0.5, 0.0))
}

pub fn hermitian_eig(a: &CMat) -> Result<HermitianSpectrum> {
    let h = symmetrized(a)?;
    let n = h.nrows();
    if n == 0 {
        return Ok(HermitianSpectrum {
            eigenvalues: vec![],
            eigenvectors: h,
        });
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let h = symmetrized(a)?;
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

pub fn lambda_min(a: &CMat) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.last().copied().unwrap_or(0.0))
}

pub fn lambda_max(a: &CMat) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?.first().copied().unwrap_or(0.0))
}

/// Square root of a Hermitian matrix that is PSD up to rounding; negative
/// eigenvalues are clamped to zero.
pub fn psd_sqrt(a: &CMat) -> CMat {
    match hermitian_eig(a) {
        Ok(s) => s.apply_fn(|x| x.max(0.0).sqrt()),
        Err(_) => panic!("psd_sqrt called on a non-Hermitian matrix"),
    }
}

/// Positive part `A_+` of a Hermitian matrix.
pub fn positive_part(a: &CMat) -> Result<CMat> {
    Ok(hermitian_eig(a)?.apply_fn(|x| x.max(0.0)))
}

/// `|A| = (A^* A)^(1/2)`.
pub fn modulus(a: &CMat) -> CMat {
    psd_sqrt(&(a.adjoint() * a))
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let k = m.min(n);
    if k == 0 {
        return vec![];
    }
    let mut dil = CMat::zeros(m + n, m + n);
    dil.view_mut((0, m), (m, n)).copy_from(a);
    dil.view_mut((m, 0), (n, m)).copy_from(&a.adjoint());
    let ev: Vec<f64> = dil.symmetric_eigenvalues().iter().copied().collect();
    let mut ev = ev;
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.truncate(k);
    ev.into_iter().map(|s| s.max(0.0)).collect()
}

/// Largest singular value.
pub fn operator_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = a.adjoint() * a;
    let ev = g.symmetric_eigenvalues();
    ev.iter().copied().fold(0.0, f64::max).sqrt()
}

/// Largest singular value of a real matrix.
pub fn operator_norm_real(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let g = a.transpose() * a;
    g.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max).sqrt()
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::range("p", p, "[1, inf]"));
    }
    Ok(())
}

/// `|A|_p = (sum s_i^p)^(1/p)`; `p = f64::INFINITY` gives the operator norm.
pub fn schatten_norm(a: &CMat, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(schatten_unchecked(a, p))
}

pub(crate) fn schatten_unchecked(a: &CMat, p: f64) -> f64 {
    if p.is_infinite() {
        operator_norm(a)
    } else if p == 2.0 {
        a.norm()
    } else {
        schatten_from_singular(&singular_values(a), p)
    }
}

pub(crate) fn schatten_from_singular(sv: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return sv.iter().copied().fold(0.0, f64::max);
    }
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    // Scaled to avoid overflow for large p.
    let s: f64 = sv.iter().map(|&x| (x / top).powf(p)).sum();
    top * s.powf(1.0 / p)
}

/// Default slack for [`psd_dominates`]: `1e-9 * max(1, |A| + |B|)`.
pub fn default_psd_tol(a: &CMat, b: &CMat) -> f64 {
    1e-9 * (1.0f64).max(operator_norm(a) + operator_norm(b))
}

/// `A >= B` in the Loewner order, up to `tol` on the smallest eigenvalue.
pub fn psd_dominates(a: &CMat, b: &CMat, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(lambda_min(&(a - b))? >= -tol)
}

/// `(2^-n sum_atoms |f_atom|_p^p)^(1/p)`, or the largest atom operator norm for
/// `p = inf`.
pub fn lp_function_norm(f: &DyadicMatrixFunction, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let atoms = f.num_atoms();
    if p.is_infinite() {
        return Ok((0..atoms)
            .map(|j| operator_norm(&f.atom_matrix(j)))
            .fold(0.0, f64::max));
    }
    if p == 2.0 {
        return Ok(f.l2_norm());
    }
    let norms: Vec<f64> = (0..atoms)
        .map(|j| schatten_unchecked(&f.atom_matrix(j), p))
        .collect();
    Ok(scalar_lp(&norms, p))
}

/// `L^p` norm of a step function given by its atom values, uniform weights.
pub(crate) fn scalar_lp(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let top = values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|&x| (x / top).powf(p)).sum::<f64>() / values.len() as f64;
    top * s.powf(1.0 / p)
}

/// `tau int g^* f dt = 2^-n sum_atoms tr(g_atom^* f_atom)`.
pub fn trace_pairing(f: &DyadicMatrixFunction, g: &DyadicMatrixFunction) -> Result<C64> {
    f.same_shape(g)?;
    let s = kernel::frobenius_inner(g.data(), f.data());
    Ok(s / f.num_atoms() as f64)
}

/// Column square function `(sum_k |a_k|^2)^(1/2)`.
pub fn column_square(a: &[CMat]) -> CMat {
    let dim = a.first().map(|m| m.nrows()).unwrap_or(0);
    let mut s = CMat::zeros(dim, dim);
    for m in a {
        s += m.adjoint() * m;
    }
    psd_sqrt(&s)
}

/// Row square function `(sum_k |a_k^*|^2)^(1/2)`.
pub fn row_square(a: &[CMat]) -> CMat {
    let dim = a.first().map(|m| m.nrows()).unwrap_or(0);
    let mut s = CMat::zeros(dim, dim);
    for m in a {
        s += m * m.adjoint();
    }
    psd_sqrt(&s)
}

/// Hoelder conjugate of `p`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `Y |Y|^(p-2) = U diag(s^(p-1)) V^*`, the derivative direction of
/// `|Y|_p^p / p`. Singular directions with `s = 0` are dropped.
pub(crate) fn duality_map(y: &CMat, p: f64) -> CMat {
    if p == 2.0 {
        return y.clone();
    }
    let g = y.adjoint() * y;
    let spec = hermitian_eig(&g).expect("Gram matrix is Hermitian");
    let top = spec.max().max(0.0);
    let cutoff = top * 1e-24;
    let w = spec.apply_fn(|lam| if lam > cutoff { lam.powf((p - 2.0) / 2.0) } else { 0.0 });
    y * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_matrix, random_unitary, seeded};

    fn diag(v: &[f64]) -> CMat {
        CMat::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn eig_examples() {
        let s = hermitian_eig(&CMat::identity(3, 3)).unwrap();
        assert!(s.eigenvalues.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let s = hermitian_eig(&diag(&[1.0, 3.0])).unwrap();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-14 && (s.eigenvalues[1] - 1.0).abs() < 1e-14);
        let x = CMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| C64::new(v, 0.0)));
        let s = hermitian_eig(&x).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14 && (s.eigenvalues[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(hermitian_eig(&CMat::zeros(2, 3)), Err(Error::NotSquare { .. })));
        let a = CMat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0].map(|v| C64::new(v, 0.0)));
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_invariants_on_random_hermitian() {
        let mut rng = seeded(7);
        for dim in [1, 2, 5, 9] {
            let g = random_matrix(&mut rng, dim);
            let a = &g + g.adjoint();
            let s = hermitian_eig(&a).unwrap();
            let v = &s.eigenvectors;
            let unit_err = (v.adjoint() * v - CMat::identity(dim, dim)).norm();
            assert!(unit_err < 1e-10);
            let scale = operator_norm(&a);
            for i in 0..dim {
                let col = v.column(i);
                let r = &a * col - col * C64::new(s.eigenvalues[i], 0.0);
                assert!(r.norm() < 1e-10 * scale);
            }
            assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn modulus_cases() {
        let m = modulus(&diag(&[-2.0, 3.0]));
        assert!((m - diag(&[2.0, 3.0])).norm() < 1e-14);
        let mut rng = seeded(2);
        let u = random_unitary(&mut rng, 4);
        assert!((modulus(&u) - CMat::identity(4, 4)).norm() < 1e-10);
        let a = random_matrix(&mut rng, 5);
        let m = modulus(&a);
        assert!((&m * &m - a.adjoint() * &a).norm() < 1e-10);
    }

    #[test]
    fn schatten_cases() {
        assert!((schatten_norm(&CMat::identity(3, 3), 1.0).unwrap() - 3.0).abs() < 1e-13);
        let mut rng = seeded(9);
        let u = random_unitary(&mut rng, 4).column(0).into_owned();
        let v = random_unitary(&mut rng, 4).column(1).into_owned();
        let r1 = &u * v.adjoint();
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            assert!((schatten_norm(&r1, p).unwrap() - 1.0).abs() < 1e-12, "p={p}");
        }
        let a = random_matrix(&mut rng, 6);
        let frob: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((schatten_from_singular(&singular_values(&a), 2.0) - frob).abs() < 1e-12 * frob);
        assert!(schatten_norm(&a, 0.5).is_err());
        assert!(schatten_norm(&a, f64::NAN).is_err());
    }

    #[test]
    fn schatten_unitary_invariance_and_monotonicity() {
        let mut rng = seeded(4);
        let a = random_matrix(&mut rng, 5);
        let u = random_unitary(&mut rng, 5);
        let v = random_unitary(&mut rng, 5);
        let b = &u * &a * &v;
        let mut prev = f64::INFINITY;
        for p in [1.0, 4.0 / 3.0, 2.0, 3.0, 4.0, f64::INFINITY] {
            let x = schatten_norm(&a, p).unwrap();
            assert!((x - schatten_norm(&b, p).unwrap()).abs() < 1e-10 * x);
            assert!(x <= prev + 1e-12);
            prev = x;
        }
    }

    #[test]
    fn psd_order_examples() {
        let i2 = CMat::identity(2, 2);
        assert!(psd_dominates(&(i2.clone() * C64::new(2.0, 0.0)), &i2, 1e-12).unwrap());
        assert!(!psd_dominates(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]), 1e-12).unwrap());
        assert!(psd_dominates(&i2, &CMat::identity(3, 3), 0.0).is_err());
    }

    #[test]
    fn lp_norm_of_constant() {
        let mut rng = seeded(12);
        let c = random_matrix(&mut rng, 3);
        let f = DyadicMatrixFunction::constant(3, &c).unwrap();
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let expected = schatten_norm(&c, p).unwrap();
            assert!((lp_function_norm(&f, p).unwrap() - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn pairing_of_identity() {
        let f = DyadicMatrixFunction::constant(2, &CMat::identity(3, 3)).unwrap();
        let v = trace_pairing(&f, &f).unwrap();
        assert!((v - C64::new(3.0, 0.0)).norm() < 1e-14);
        let g = DyadicMatrixFunction::constant(1, &CMat::identity(3, 3)).unwrap();
        assert!(trace_pairing(&f, &g).is_err());
    }

    #[test]
    fn duality_map_matches_definition() {
        let mut rng = seeded(21);
        let y = random_matrix(&mut rng, 4);
        for p in [1.5, 3.0] {
            let d = duality_map(&y, p);
            // <Y, J(Y)> = |Y|_p^p
            let ip: C64 = y.iter().zip(d.iter()).map(|(a, b)| a.conj() * b).sum();
            let np = schatten_norm(&y, p).unwrap().powf(p);
            assert!((ip.re - np).abs() < 1e-10 * np && ip.im.abs() < 1e-10 * np);
        }
    }

    #[test]
    fn real_operator_norm() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((operator_norm_real(&a) - 1.0).abs() < 1e-14);
    }
}
