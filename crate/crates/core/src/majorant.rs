//! Noncommutative maximal norms `L^1(M_N, l^inf)` as min-trace majorant
//! semidefinite programs.
//!
//! Primal: minimize `tr(A)` subject to `A >= B_j` for every constraint.
//! Dual: maximize `sum_j tr(B_j Z_j)` subject to `Z_j >= 0`, `sum_j Z_j = I`.
//! For any feasible pair `tr(A) - sum_j tr(B_j Z_j) = sum_j tr((A - B_j) Z_j) >= 0`,
//! so every certificate carries a duality gap that bounds its suboptimality.
//!
//! The solver follows the central path of
//! `tr(A)/mu - sum_j log det(A - B_j)` with damped Newton steps over the real
//! vector space of Hermitian matrices. At the end of each centering the dual
//! `Z_j = mu (A - B_j)^-1` is rescaled by `(sum Z)^(-1/2)` on both sides so it
//! is exactly feasible.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{self, CMat, DyadicMatrixFunction};
use crate::error::{Error, Result};
use crate::linalg;

pub const MAX_DIM: usize = 64;
pub const MAX_CONSTRAINTS: usize = 256;

/// Default relative duality-gap target.
pub const DEFAULT_TOL: f64 = 1e-7;

const HERMITIAN_INPUT_TOL: f64 = 1e-10;

/// `min tr(A)` over `A >= B_j`. When no constraint is itself PSD, `A >= 0` is
/// imposed as an extra constraint `B = 0` whose multiplier is reported in
/// [`MajorantCertificate::psd_multiplier`].
#[derive(Clone, Debug)]
pub struct MajorantProblem {
    dim: usize,
    constraints: Vec<CMat>,
    psd_slack: bool,
}

impl MajorantProblem {
    pub fn new(constraints: Vec<CMat>) -> Result<Self> {
        let dim = validate(&constraints)?;
        let implied = constraints
            .iter()
            .any(|b| linalg::lambda_min(b).map(|l| l >= -1e-12 * (1.0 + linalg::operator_norm(b))).unwrap_or(false));
        Ok(Self {
            dim,
            constraints,
            psd_slack: !implied,
        })
    }

    /// Constraints `A >= X` and `A >= -X` for every `X` given. `A >= 0` is
    /// implied and not added.
    pub fn symmetric(constraints: &[CMat]) -> Result<Self> {
        let dim = validate(constraints)?;
        let mut all = Vec::with_capacity(2 * constraints.len());
        for x in constraints {
            if x.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                continue;
            }
            all.push(x.clone());
            all.push(-x);
        }
        if all.is_empty() {
            all.push(CMat::zeros(dim, dim));
        }
        if all.len() > MAX_CONSTRAINTS {
            return Err(Error::TooLarge {
                size: all.len(),
                limit: MAX_CONSTRAINTS,
            });
        }
        Ok(Self {
            dim,
            constraints: all,
            psd_slack: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[CMat] {
        &self.constraints
    }

    pub fn has_psd_slack(&self) -> bool {
        self.psd_slack
    }
}

fn validate(constraints: &[CMat]) -> Result<usize> {
    let first = constraints
        .first()
        .ok_or_else(|| Error::Invalid("majorant problem needs at least one constraint".into()))?;
    let dim = first.nrows();
    if dim == 0 {
        return Err(Error::Invalid("zero-dimensional constraint".into()));
    }
    if dim > MAX_DIM {
        return Err(Error::TooLarge { size: dim, limit: MAX_DIM });
    }
    if constraints.len() > MAX_CONSTRAINTS {
        return Err(Error::TooLarge {
            size: constraints.len(),
            limit: MAX_CONSTRAINTS,
        });
    }
    for b in constraints {
        if b.nrows() != dim || b.ncols() != dim {
            return Err(Error::ShapeMismatch(format!("constraint {}x{} in dimension {dim}", b.nrows(), b.ncols())));
        }
        let asym = (b - b.adjoint()).norm();
        if asym > HERMITIAN_INPUT_TOL * b.norm().max(1.0) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
    }
    Ok(dim)
}

#[derive(Clone, Debug, Serialize)]
pub struct MajorantCertificate {
    #[serde(skip)]
    pub primal: CMat,
    /// One multiplier per constraint.
    #[serde(skip)]
    pub dual: Vec<CMat>,
    /// Multiplier of the implicit `A >= 0` constraint, if it was added.
    #[serde(skip)]
    pub psd_multiplier: Option<CMat>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub newton_steps: usize,
}

impl MajorantCertificate {
    /// `sum_j Z_j` including the PSD multiplier.
    pub fn dual_sum(&self) -> CMat {
        let dim = self.primal.nrows();
        let mut s = CMat::zeros(dim, dim);
        for z in self.dual.iter().chain(self.psd_multiplier.iter()) {
            s += z;
        }
        s
    }
}

/// Real orthonormal coordinates on `N x N` Hermitian matrices: the diagonal,
/// then `sqrt 2 Re X_ij` and `sqrt 2 Im X_ij` for `i < j`.
struct HermitianBasis {
    dim: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianBasis {
    fn new(dim: usize) -> Self {
        let pairs = (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect();
        Self { dim, pairs }
    }

    fn len(&self) -> usize {
        self.dim * self.dim
    }

    fn coords(&self, x: &CMat) -> Vec<f64> {
        let s2 = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.len());
        out.extend((0..self.dim).map(|i| x[(i, i)].re));
        for &(i, j) in &self.pairs {
            // Symmetrized so slightly non-Hermitian inputs map to their Hermitian part.
            let z = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            out.push(s2 * z.re);
            out.push(s2 * z.im);
        }
        out
    }

    fn matrix(&self, c: &[f64]) -> CMat {
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = CMat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            x[(i, i)] = C64::new(c[i], 0.0);
        }
        for (t, &(i, j)) in self.pairs.iter().enumerate() {
            let z = C64::new(c[self.dim + 2 * t], c[self.dim + 2 * t + 1]) * r2;
            x[(i, j)] = z;
            x[(j, i)] = z.conj();
        }
        x
    }

    /// Nonzero entries `(row, col, value)` of every basis element.
    fn entries(&self) -> Vec<Vec<(usize, usize, C64)>> {
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut out: Vec<Vec<(usize, usize, C64)>> = (0..self.dim).map(|i| vec![(i, i, C64::new(1.0, 0.0))]).collect();
        for &(i, j) in &self.pairs {
            out.push(vec![(i, j, C64::new(r2, 0.0)), (j, i, C64::new(r2, 0.0))]);
            // Dual to the coordinate sqrt 2 Im X_ij.
            out.push(vec![(i, j, C64::new(0.0, r2)), (j, i, C64::new(0.0, -r2))]);
        }
        out
    }
}

/// `H_ab = sum_j tr(E_a W_j E_b W_j)` from `K[(q,r),(s,p)] = sum_j W_j[q,r] W_j[s,p]`.
fn hessian(basis: &[Vec<(usize, usize, C64)>], inv: &[CMat], dim: usize) -> DMatrix<f64> {
    let nn = dim * dim;
    let v = CMat::from_fn(nn, inv.len(), |qr, j| inv[j][(qr / dim, qr % dim)]);
    let k = &v * v.transpose();
    let m = basis.len();
    let mut h = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = C64::new(0.0, 0.0);
            for &(p, q, x) in &basis[a] {
                for &(r, s, y) in &basis[b] {
                    acc += x * y * k[(q * dim + r, s * dim + p)];
                }
            }
            h[(a, b)] = acc.re;
            h[(b, a)] = acc.re;
        }
    }
    h
}

fn cholesky_ok(m: &CMat) -> bool {
    m.clone().cholesky().is_some()
}

fn inverse_hermitian(m: &CMat) -> Option<CMat> {
    let inv = m.clone().cholesky()?.inverse();
    Some((&inv + inv.adjoint()) * C64::new(0.5, 0.0))
}

struct Barrier<'a> {
    basis: HermitianBasis,
    entries: Vec<Vec<(usize, usize, C64)>>,
    constraints: &'a [CMat],
}

impl Barrier<'_> {
    fn slacks(&self, a: &CMat) -> Vec<CMat> {
        self.constraints.iter().map(|b| a - b).collect()
    }

    fn feasible(&self, a: &CMat) -> bool {
        self.constraints.iter().all(|b| cholesky_ok(&(a - b)))
    }

    fn inverses(&self, a: &CMat) -> Option<Vec<CMat>> {
        self.slacks(a).iter().map(inverse_hermitian).collect()
    }

    /// Exact minimizer along `A + t D` of the barrier, kept inside the
    /// feasible region: with `lambda` the eigenvalues of `L^-1 D L^-*` for each
    /// factor `S_j = L L^*`, the restriction is `t tr(D)/mu - sum log(1 + t lambda)`.
    fn line_search(&self, a: &CMat, delta: &CMat, mu: f64) -> Option<f64> {
        let mut lambdas = Vec::with_capacity(self.constraints.len() * self.basis.dim);
        for b in self.constraints {
            let l = (a - b).cholesky()?.l();
            let inv_l = l.solve_lower_triangular(&CMat::identity(self.basis.dim, self.basis.dim))?;
            let m = &inv_l * delta * inv_l.adjoint();
            lambdas.extend(linalg::hermitian_eigenvalues(&((&m + m.adjoint()) * C64::new(0.5, 0.0))).ok()?);
        }
        let c = delta.trace().re / mu;
        let t_max = lambdas
            .iter()
            .filter(|&&l| l < 0.0)
            .map(|&l| -1.0 / l)
            .fold(f64::INFINITY, f64::min);
        let slope = |t: f64| c - lambdas.iter().map(|&l| l / (1.0 + t * l)).sum::<f64>();
        let curv = |t: f64| lambdas.iter().map(|&l| (l / (1.0 + t * l)).powi(2)).sum::<f64>();
        if slope(0.0) >= 0.0 {
            return Some(0.0);
        }
        // Safeguarded Newton on the convex restriction's derivative.
        let cap = 0.99 * t_max;
        let (mut lo, mut hi) = (0.0, if cap.is_finite() { cap } else { f64::INFINITY });
        if hi.is_finite() && slope(hi) <= 0.0 {
            return Some(hi);
        }
        let mut t = 1.0f64.min(0.5 * hi);
        for _ in 0..100 {
            let s = slope(t);
            if s < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - s / curv(t);
            if !(next > lo && next < hi) {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * t };
            }
            if (next - t).abs() <= 1e-12 * t.max(1e-300) {
                t = next;
                break;
            }
            t = next;
        }
        Some(t)
    }

    /// Newton step for `tr(A)/mu - sum log det(A - B_j)` and its decrement squared.
    fn newton(&self, a: &CMat, mu: f64) -> Option<(CMat, f64)> {
        let dim = self.basis.dim;
        let inv = self.inverses(a)?;
        let mut grad = CMat::identity(dim, dim) * C64::new(1.0 / mu, 0.0);
        for w in &inv {
            grad -= w;
        }
        let g = self.basis.coords(&grad);
        let m = self.basis.len();
        let h = hessian(&self.entries, &inv, dim);
        // Jacobi scaling before factorization.
        let d: Vec<f64> = (0..m).map(|i| h[(i, i)].max(f64::MIN_POSITIVE).sqrt().recip()).collect();
        let scaled = DMatrix::from_fn(m, m, |r, c| h[(r, c)] * d[r] * d[c]);
        let rhs = nalgebra::DVector::from_iterator(m, g.iter().enumerate().map(|(i, v)| -v * d[i]));
        let step = match scaled.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let reg = scaled + DMatrix::identity(m, m) * 1e-12;
                reg.cholesky()?.solve(&rhs)
            }
        };
        let dx: Vec<f64> = step.iter().enumerate().map(|(i, v)| v * d[i]).collect();
        let dec2: f64 = -g.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
        Some((self.basis.matrix(&dx), dec2.max(0.0)))
    }
}

/// Dual recovered from a (near-)central point and rescaled so that it sums to `I`.
fn dual_certificate(a: &CMat, constraints: &[CMat], mu: f64) -> Option<(Vec<CMat>, f64, f64)> {
    let dim = a.nrows();
    let mut zs: Vec<CMat> = constraints
        .iter()
        .map(|b| inverse_hermitian(&(a - b)).map(|w| w * C64::new(mu, 0.0)))
        .collect::<Option<_>>()?;
    let mut total = CMat::zeros(dim, dim);
    for z in &zs {
        total += z;
    }
    let spec = linalg::hermitian_eig(&total).ok()?;
    if spec.min() <= 0.0 {
        return None;
    }
    let isqrt = spec.apply_fn(|x| x.powf(-0.5));
    for z in zs.iter_mut() {
        let t = &isqrt * &*z * &isqrt;
        *z = (&t + t.adjoint()) * C64::new(0.5, 0.0);
    }
    let primal = a.trace().re;
    let dual: f64 = constraints.iter().zip(&zs).map(|(b, z)| (b * z).trace().re).sum();
    Some((zs, primal, dual))
}

const MAX_NEWTON_STEPS: usize = 3000;
const MU_REDUCTION: f64 = 0.05;

/// Solves the min-trace majorant problem to relative gap `tol`, i.e.
/// `gap <= tol * max(1, |tr A|)`.
pub fn min_trace_majorant(prob: &MajorantProblem, tol: f64) -> Result<MajorantCertificate> {
    let dim = prob.dim;
    let scale = prob
        .constraints
        .iter()
        .map(linalg::operator_norm)
        .fold(0.0, f64::max)
        .max(1.0);
    let inv_scale = C64::new(1.0 / scale, 0.0);
    let mut cons: Vec<CMat> = prob
        .constraints
        .iter()
        .map(|b| {
            let h = (b + b.adjoint()) * C64::new(0.5, 0.0);
            h * inv_scale
        })
        .collect();
    if prob.psd_slack {
        cons.push(CMat::zeros(dim, dim));
    }

    let top = cons
        .iter()
        .map(linalg::lambda_max)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut a = CMat::identity(dim, dim) * C64::new(1.0 + top, 0.0);
    let basis = HermitianBasis::new(dim);
    let barrier = Barrier {
        entries: basis.entries(),
        basis,
        constraints: &cons,
    };

    let trace_inv: f64 = barrier
        .inverses(&a)
        .expect("initial point is strictly feasible")
        .iter()
        .map(|w| w.trace().re)
        .sum();
    let mut mu = dim as f64 / trace_inv;
    let mut steps = 0usize;
    let mut best: Option<MajorantCertificate> = None;

    loop {
        // Centering.
        let mut centered = false;
        for _ in 0..100 {
            if steps >= MAX_NEWTON_STEPS {
                break;
            }
            let Some((delta, dec2)) = barrier.newton(&a, mu) else {
                break;
            };
            steps += 1;
            let Some(t) = barrier.line_search(&a, &delta, mu) else {
                break;
            };
            let next = &a + &delta * C64::new(t, 0.0);
            if !barrier.feasible(&next) {
                break;
            }
            a = (&next + next.adjoint()) * C64::new(0.5, 0.0);
            if dec2 < 1e-3 {
                centered = true;
                break;
            }
        }

        if let Some((zs, primal, dual)) = dual_certificate(&a, &cons, mu) {
            let gap = primal - dual;
            let cert = assemble(prob, &a, zs, primal, dual, scale, steps);
            let better = best.as_ref().is_none_or(|b| cert.gap < b.gap);
            if better {
                best = Some(cert);
            }
            if gap <= tol * primal.abs().max(1.0 / scale) {
                return Ok(best.expect("just set"));
            }
        }
        if steps >= MAX_NEWTON_STEPS || (!centered && mu < 1e-14) {
            break;
        }
        mu *= MU_REDUCTION;
    }
    match best {
        Some(cert) => Err(Error::SolverStalled(Box::new(cert))),
        None => Err(Error::Invalid("majorant solver found no dual certificate".into())),
    }
}

fn assemble(
    prob: &MajorantProblem,
    a: &CMat,
    mut zs: Vec<CMat>,
    primal: f64,
    dual: f64,
    scale: f64,
    steps: usize,
) -> MajorantCertificate {
    let psd_multiplier = if prob.psd_slack { zs.pop() } else { None };
    MajorantCertificate {
        primal: a * C64::new(scale, 0.0),
        dual: zs,
        psd_multiplier,
        primal_value: primal * scale,
        dual_value: dual * scale,
        gap: (primal - dual) * scale,
        newton_steps: steps,
    }
}

/// Per-atom values and the aggregate of a function-sequence maximal norm.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalNormReport {
    pub value: f64,
    pub per_atom: Vec<f64>,
    pub max_gap: f64,
}

fn check_sequence(seq: &[DyadicMatrixFunction]) -> Result<(usize, usize)> {
    let first = seq
        .first()
        .ok_or_else(|| Error::Invalid("empty sequence".into()))?;
    for f in seq {
        first.same_shape(f)?;
    }
    Ok((first.resolution(), first.dim()))
}

fn solve_atoms(
    n: usize,
    build: impl Fn(usize) -> Result<MajorantProblem> + Sync,
    tol: f64,
) -> Result<MaximalNormReport> {
    let certs: Vec<MajorantCertificate> = (0..1usize << n)
        .into_par_iter()
        .map(|j| build(j).and_then(|p| min_trace_majorant(&p, tol)))
        .collect::<Result<_>>()?;
    let per_atom: Vec<f64> = certs.iter().map(|c| c.primal_value).collect();
    let value = per_atom.iter().sum::<f64>() / per_atom.len() as f64;
    let max_gap = certs.iter().map(|c| c.gap).fold(0.0, f64::max);
    Ok(MaximalNormReport { value, per_atom, max_gap })
}

/// `|(a_k)_k|_{L^1(l^inf)}` for PSD-valued `a_k`: the integral of the
/// per-atom minimal majorant trace.
pub fn max_norm_l1_positive(seq: &[DyadicMatrixFunction]) -> Result<MaximalNormReport> {
    max_norm_l1_positive_tol(seq, DEFAULT_TOL)
}

pub fn max_norm_l1_positive_tol(seq: &[DyadicMatrixFunction], tol: f64) -> Result<MaximalNormReport> {
    let (n, _) = check_sequence(seq)?;
    for f in seq {
        for m in f.matrices() {
            let lmin = linalg::lambda_min(&m)?;
            if lmin < -1e-9 * linalg::operator_norm(&m).max(1.0) {
                return Err(Error::NotPositive { min_eigenvalue: lmin });
            }
        }
    }
    solve_atoms(n, |j| MajorantProblem::new(seq.iter().map(|f| f.atom_matrix(j)).collect()), tol)
}

/// Real and imaginary parts `((a^* + a)/2, i(a^* - a)/2)`.
fn hermitian_parts(a: &CMat) -> (CMat, CMat) {
    let adj = a.adjoint();
    let re = (&adj + a) * C64::new(0.5, 0.0);
    let im = (&adj - a) * C64::new(0.0, 0.5);
    (re, im)
}

/// `|(a_k)_k|_{L^1(l^inf)}` for general `a_k`: `A` must dominate `+-` the real
/// and imaginary parts of each `a_k`.
pub fn max_norm_l1_selfadjoint(seq: &[DyadicMatrixFunction]) -> Result<MaximalNormReport> {
    max_norm_l1_selfadjoint_tol(seq, DEFAULT_TOL)
}

pub fn max_norm_l1_selfadjoint_tol(seq: &[DyadicMatrixFunction], tol: f64) -> Result<MaximalNormReport> {
    let (n, _) = check_sequence(seq)?;
    solve_atoms(
        n,
        |j| {
            let mut parts = Vec::with_capacity(2 * seq.len());
            for f in seq {
                let (re, im) = hermitian_parts(&f.atom_matrix(j));
                parts.push(re);
                parts.push(im);
            }
            MajorantProblem::symmetric(&parts)
        },
        tol,
    )
}

/// `|f|_{H^1_ncm} = |(E_m f)_{m=0..n}|_{L^1(l^inf)}`.
pub fn ncm_hardy_norm(f: &DyadicMatrixFunction) -> Result<f64> {
    let seq = (0..=f.resolution())
        .map(|m| dyadic::conditional_expectation(f, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(max_norm_l1_selfadjoint(&seq)?.value)
}

/// Lower bound for the dual norm of `H^1_ncm`:
/// `max_f |tau int phi^* f| / |f|_{H^1_ncm}` over the candidates.
pub fn dual_h1ncm_lower(phi: &DyadicMatrixFunction, candidates: &[DyadicMatrixFunction]) -> Result<f64> {
    let ratios = candidates
        .par_iter()
        .map(|f| {
            phi.same_shape(f)?;
            let denom = ncm_hardy_norm(f)?;
            if denom == 0.0 {
                return Ok(0.0);
            }
            Ok(linalg::trace_pairing(f, phi)?.norm() / denom)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// A default candidate family for [`dual_h1ncm_lower`]: `phi` itself, its
/// martingale differences, and seeded random functions.
pub fn dual_h1ncm_candidates(phi: &DyadicMatrixFunction, random: usize, seed: u64) -> Result<Vec<DyadicMatrixFunction>> {
    let mut out = vec![phi.clone()];
    for k in 1..=phi.resolution() {
        out.push(dyadic::martingale_difference(phi, k)?);
    }
    let mut rng = crate::random::seeded(seed);
    for _ in 0..random {
        out.push(crate::random::random_function(&mut rng, phi.resolution(), phi.dim(), true));
    }
    Ok(out)
}
