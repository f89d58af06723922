//! Paraproducts, their adjoints and the Haar multiplier as linear maps on
//! matrix-valued dyadic functions, plus norm estimators.
//!
//! All three operators are sums of products of level-`k` quantities, so each
//! summand is constant on level-`k` (or level-`(k-1)`) intervals. They are
//! evaluated on the mean pyramid and summed down the tree, which costs
//! `O(2^n N^3)` per application.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, haar_decompose, CMat, DyadicMatrixFunction, HaarExpansion};
use crate::error::{Error, Result};
use crate::kernel::{self, Op};
use crate::linalg;
use crate::random;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Largest matricization dimension `2^n N^2`.
pub const MATRICIZE_LIMIT: usize = 4096;

/// Haar basis vectors are added to the `p`-norm restart set up to this many.
pub const HAAR_CANDIDATE_LIMIT: usize = 1024;

/// A linear map on dyadic functions of a fixed shape together with its
/// adjoint for the trace pairing.
pub trait LinearMap: Sync {
    /// `(resolution, dim)` of inputs and outputs.
    fn shape(&self) -> (usize, usize);
    fn apply(&self, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction>;
    fn adjoint_apply(&self, g: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// `pi_phi(f) = sum_k (d_k phi)(E_{k-1} f)`.
    #[serde(rename = "pi")]
    Paraproduct,
    /// `(pi_phi)^*(g) = sum_k (d_k phi)^* (d_k g)`.
    #[serde(rename = "pistar")]
    ParaproductAdjoint,
    /// `Lambda_phi(f) = sum_k (d_k phi)(E_k f)`.
    #[serde(rename = "lambda")]
    HaarMultiplier,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Paraproduct => "pi",
            OperatorKind::ParaproductAdjoint => "pistar",
            OperatorKind::HaarMultiplier => "lambda",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pi" => Ok(OperatorKind::Paraproduct),
            "pistar" => Ok(OperatorKind::ParaproductAdjoint),
            "lambda" => Ok(OperatorKind::HaarMultiplier),
            other => Err(Error::Invalid(format!("unknown operator kind `{other}`"))),
        }
    }
}

/// Precomputed level data of a symbol `phi`.
#[derive(Clone, Debug)]
struct SymbolLevels {
    n: usize,
    dim: usize,
    /// `steps[k]`: `d_k phi` on the `2^k` level-`k` intervals (`steps[0]` empty).
    steps: Vec<Vec<C64>>,
    /// `haar[k]`: Haar coefficient of level `k + 1` on the `2^k` level-`k` intervals.
    haar: Vec<Vec<C64>>,
}

impl SymbolLevels {
    fn new(phi: &DyadicMatrixFunction) -> Self {
        let (n, dim, b) = (phi.resolution(), phi.dim(), phi.block_len());
        let pyramid = phi.mean_pyramid();
        let mut steps = vec![Vec::new()];
        for k in 1..=n {
            let mut blocks = pyramid[k].clone();
            for i in 0..1usize << k {
                for t in 0..b {
                    blocks[i * b + t] -= pyramid[k - 1][(i / 2) * b + t];
                }
            }
            steps.push(blocks);
        }
        let haar = haar_blocks(&pyramid, n, b);
        Self { n, dim, steps, haar }
    }
}

fn haar_blocks(pyramid: &[Vec<C64>], n: usize, b: usize) -> Vec<Vec<C64>> {
    (1..=n)
        .map(|k| {
            let fine = &pyramid[k];
            let mut out = vec![ZERO; (1 << (k - 1)) * b];
            for i in 0..1usize << (k - 1) {
                for t in 0..b {
                    out[i * b + t] = (fine[2 * i * b + t] - fine[(2 * i + 1) * b + t]) * 0.5;
                }
            }
            out
        })
        .collect()
}

fn shape_check(levels: &SymbolLevels, f: &DyadicMatrixFunction) -> Result<()> {
    if f.resolution() != levels.n || f.dim() != levels.dim {
        return Err(Error::ShapeMismatch(format!(
            "symbol (n={}, N={}) vs argument (n={}, N={})",
            levels.n,
            levels.dim,
            f.resolution(),
            f.dim()
        )));
    }
    Ok(())
}

/// `sum_k D_k F_k` where `D_k = d_k phi` and `F_k` is `E_{k-lag} f` on level-`k` intervals.
fn step_times_mean(levels: &SymbolLevels, f: &DyadicMatrixFunction, lag: usize) -> DyadicMatrixFunction {
    let (n, dim) = (levels.n, levels.dim);
    let b = dim * dim;
    let pyramid = f.mean_pyramid();
    let mut terms = vec![vec![ZERO; b]];
    for k in 1..=n {
        let mut out = vec![ZERO; (1 << k) * b];
        let d = &levels.steps[k];
        for i in 0..1usize << k {
            let src = &pyramid[k - lag][(i >> lag) * b..((i >> lag) + 1) * b];
            kernel::gemm_acc(&mut out[i * b..(i + 1) * b], &d[i * b..(i + 1) * b], Op::Plain, src, Op::Plain, dim);
        }
        terms.push(out);
    }
    DyadicMatrixFunction::accumulate_levels(n, dim, &terms)
}

/// `sum_k op(d_k phi) op(d_k g)` style products of two level-`k` differences,
/// constant on level-`(k-1)` intervals: `(C_phi)^{op_a} (C_g)^{op_b}`.
fn difference_products(
    n: usize,
    dim: usize,
    a: &[Vec<C64>],
    op_a: Op,
    b_haar: &[Vec<C64>],
    op_b: Op,
) -> DyadicMatrixFunction {
    let b = dim * dim;
    let mut terms = Vec::with_capacity(n + 1);
    for k in 0..n {
        let mut out = vec![ZERO; (1 << k) * b];
        for i in 0..1usize << k {
            kernel::gemm_acc(
                &mut out[i * b..(i + 1) * b],
                &a[k][i * b..(i + 1) * b],
                op_a,
                &b_haar[k][i * b..(i + 1) * b],
                op_b,
                dim,
            );
        }
        terms.push(out);
    }
    terms.push(vec![ZERO; (1 << n) * b]);
    DyadicMatrixFunction::accumulate_levels(n, dim, &terms)
}

fn haar_levels_of(f: &DyadicMatrixFunction) -> Vec<Vec<C64>> {
    haar_blocks(&f.mean_pyramid(), f.resolution(), f.block_len())
}

fn paraproduct_with(levels: &SymbolLevels, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    shape_check(levels, f)?;
    Ok(step_times_mean(levels, f, 1))
}

fn paraproduct_adjoint_with(levels: &SymbolLevels, g: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    shape_check(levels, g)?;
    // (d_k phi)^*(d_k g) = (+-C_phi)^*(+-C_g) = C_phi^* C_g on the parent interval.
    Ok(difference_products(levels.n, levels.dim, &levels.haar, Op::Adjoint, &haar_levels_of(g), Op::Plain))
}

fn haar_multiplier_with(levels: &SymbolLevels, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    shape_check(levels, f)?;
    Ok(step_times_mean(levels, f, 0))
}

pub fn paraproduct_apply(phi: &DyadicMatrixFunction, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    paraproduct_with(&SymbolLevels::new(phi), f)
}

pub fn paraproduct_adjoint_apply(phi: &DyadicMatrixFunction, g: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    paraproduct_adjoint_with(&SymbolLevels::new(phi), g)
}

pub fn haar_multiplier_apply(phi: &DyadicMatrixFunction, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
    haar_multiplier_with(&SymbolLevels::new(phi), f)
}

/// One of the three operators attached to a symbol. Immutable.
#[derive(Clone, Debug)]
pub struct OperatorHandle {
    symbol: DyadicMatrixFunction,
    kind: OperatorKind,
    levels: SymbolLevels,
    /// Levels of `phi^*`, needed for the adjoint of the Haar multiplier.
    adjoint_levels: Option<SymbolLevels>,
}

impl OperatorHandle {
    pub fn new(kind: OperatorKind, symbol: DyadicMatrixFunction) -> Self {
        let levels = SymbolLevels::new(&symbol);
        let adjoint_levels = (kind == OperatorKind::HaarMultiplier).then(|| SymbolLevels::new(&symbol.adjoint()));
        Self {
            symbol,
            kind,
            levels,
            adjoint_levels,
        }
    }

    pub fn paraproduct(symbol: DyadicMatrixFunction) -> Self {
        Self::new(OperatorKind::Paraproduct, symbol)
    }

    pub fn haar_multiplier(symbol: DyadicMatrixFunction) -> Self {
        Self::new(OperatorKind::HaarMultiplier, symbol)
    }

    pub fn symbol(&self) -> &DyadicMatrixFunction {
        &self.symbol
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    /// The adjoint operator as a handle of its own.
    pub fn adjoint_handle(&self) -> OperatorHandle {
        match self.kind {
            OperatorKind::Paraproduct => Self::new(OperatorKind::ParaproductAdjoint, self.symbol.clone()),
            OperatorKind::ParaproductAdjoint => Self::new(OperatorKind::Paraproduct, self.symbol.clone()),
            OperatorKind::HaarMultiplier => Self::new(OperatorKind::HaarMultiplier, self.symbol.adjoint()),
        }
    }
}

impl LinearMap for OperatorHandle {
    fn shape(&self) -> (usize, usize) {
        (self.symbol.resolution(), self.symbol.dim())
    }

    fn apply(&self, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
        match self.kind {
            OperatorKind::Paraproduct => paraproduct_with(&self.levels, f),
            OperatorKind::ParaproductAdjoint => paraproduct_adjoint_with(&self.levels, f),
            OperatorKind::HaarMultiplier => haar_multiplier_with(&self.levels, f),
        }
    }

    fn adjoint_apply(&self, g: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
        match self.kind {
            OperatorKind::Paraproduct => paraproduct_adjoint_with(&self.levels, g),
            OperatorKind::ParaproductAdjoint => paraproduct_with(&self.levels, g),
            // (Lambda_phi)^* = Lambda_{phi^*}
            OperatorKind::HaarMultiplier => {
                haar_multiplier_with(self.adjoint_levels.as_ref().expect("built for Haar multipliers"), g)
            }
        }
    }
}

/// Orthonormal basis of `L^2(T, S^2_N)` at resolution `n`: normalized Haar
/// functions tensor matrix units, ordered by (level, interval, i, j) with the
/// constant function as level 0.
fn basis_function(n: usize, dim: usize, index: usize) -> DyadicMatrixFunction {
    let b = dim * dim;
    let (slot, entry) = (index / b, index % b);
    let mut unit = CMat::zeros(dim, dim);
    unit[(entry / dim, entry % dim)] = C64::new(1.0, 0.0);
    let mut h = HaarExpansion {
        resolution: n,
        dim,
        mean: CMat::zeros(dim, dim),
        diffs: (1..=n).map(|k| vec![CMat::zeros(dim, dim); 1 << (k - 1)]).collect(),
    };
    if slot == 0 {
        h.mean = unit;
    } else {
        // slot = 2^(k-1) + interval
        let k = usize::BITS as usize - slot.leading_zeros() as usize;
        let interval = slot - (1 << (k - 1));
        h.diffs[k - 1][interval] = unit * C64::new(2f64.powf((k as f64 - 1.0) / 2.0), 0.0);
    }
    dyadic::haar_reconstruct(&h).expect("well-formed basis expansion")
}

fn basis_coordinates(g: &DyadicMatrixFunction) -> Vec<C64> {
    let h = haar_decompose(g);
    let mut out = Vec::with_capacity(g.num_atoms() * g.block_len());
    dyadic::push_row_major(&mut out, &h.mean);
    for (level, coeffs) in h.diffs.iter().enumerate() {
        let s = 2f64.powf(-(level as f64) / 2.0);
        for c in coeffs {
            dyadic::push_row_major(&mut out, &(c * C64::new(s, 0.0)));
        }
    }
    out
}

/// Matrix of `op` in the orthonormal Haar tensor matrix-unit basis.
pub fn matricize(op: &dyn LinearMap) -> Result<CMat> {
    let (n, dim) = op.shape();
    let d = (1usize << n) * dim * dim;
    if d > MATRICIZE_LIMIT {
        return Err(Error::TooLarge {
            size: d,
            limit: MATRICIZE_LIMIT,
        });
    }
    let columns: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|j| op.apply(&basis_function(n, dim, j)).map(|g| basis_coordinates(&g)))
        .collect::<Result<_>>()?;
    Ok(CMat::from_fn(d, d, |r, c| columns[c][r]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Number of consecutive small relative changes required by power iteration.
const STABLE_STEPS: usize = 3;

/// `L^2 -> L^2` norm by power iteration on `op^* op`. Each iterate `|op x|`
/// with `|x| = 1` is a valid lower bound; non-convergence returns the best one
/// inside [`Error::NoConvergence`].
pub fn operator_norm_2(op: &dyn LinearMap, opts: PowerOptions) -> Result<SpectralEstimate> {
    let (n, dim) = op.shape();
    let mut rng = random::seeded(opts.seed);
    let mut x = random::random_function(&mut rng, n, dim, false);
    normalize(&mut x);
    let mut prev = f64::NAN;
    let mut best = 0.0f64;
    let mut stable = 0;
    for it in 1..=opts.max_iter {
        let y = op.apply(&x)?;
        let sigma = y.l2_norm();
        best = best.max(sigma);
        if sigma == 0.0 {
            return Ok(SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            });
        }
        if (sigma - prev).abs() <= opts.tol * sigma {
            stable += 1;
            if stable >= STABLE_STEPS {
                return Ok(SpectralEstimate {
                    value: best,
                    iterations: it,
                    converged: true,
                });
            }
        } else {
            stable = 0;
        }
        prev = sigma;
        x = op.adjoint_apply(&y)?;
        normalize(&mut x);
    }
    Err(Error::NoConvergence {
        best,
        iterations: opts.max_iter,
    })
}

fn normalize(x: &mut DyadicMatrixFunction) {
    let norm = x.l2_norm();
    if norm > 0.0 {
        let s = 1.0 / norm;
        for z in x.data_mut() {
            *z *= s;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 500,
            tol: 1e-12,
        }
    }
}

fn pointwise_duality_map(f: &DyadicMatrixFunction, p: f64) -> DyadicMatrixFunction {
    if p == 2.0 {
        return f.clone();
    }
    f.map_atoms(|_, m| linalg::duality_map(&m, p)).expect("shape preserved")
}

fn lp_ratio(op: &dyn LinearMap, x: &DyadicMatrixFunction, p: f64) -> Result<(f64, DyadicMatrixFunction)> {
    let y = op.apply(x)?;
    let nx = linalg::lp_function_norm(x, p)?;
    if nx == 0.0 {
        return Ok((0.0, y));
    }
    Ok((linalg::lp_function_norm(&y, p)? / nx, y))
}

/// Nonlinear power ascent for `sup |op x|_p / |x|_p`:
/// `x <- J_q(op^* J_p(op x))`, with `J_p(Y) = Y|Y|^(p-2)` atomwise. At `p = 2`
/// this is plain power iteration. Returns the best ratio seen.
fn ascend(op: &dyn LinearMap, start: DyadicMatrixFunction, p: f64, opts: &AscentOptions) -> Result<f64> {
    let q = linalg::conjugate_exponent(p);
    let mut x = start;
    let mut best = 0.0f64;
    let mut stable = 0;
    for _ in 0..opts.max_iter {
        let (ratio, y) = lp_ratio(op, &x, p)?;
        if ratio == 0.0 {
            break;
        }
        if ratio <= best * (1.0 + opts.tol) {
            stable += 1;
            if stable >= STABLE_STEPS {
                best = best.max(ratio);
                break;
            }
        } else {
            stable = 0;
        }
        best = best.max(ratio);
        let z = op.adjoint_apply(&pointwise_duality_map(&y, p))?;
        let mut next = pointwise_duality_map(&z, q);
        let norm = linalg::lp_function_norm(&next, p)?;
        if norm == 0.0 {
            break;
        }
        for v in next.data_mut() {
            *v /= norm;
        }
        x = next;
    }
    Ok(best)
}

/// Certified lower bound for the `L^p(T, S^p_N) -> L^p(T, S^p_N)` norm:
/// every reported value is `|op x|_p / |x|_p` for an explicit `x`. Restart `r`
/// draws from stream `r` of `seed`, so more restarts never lower the result.
pub fn operator_norm_p_lower(op: &dyn LinearMap, p: f64, opts: AscentOptions) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::range("p", p, "(1, inf)"));
    }
    let (n, dim) = op.shape();
    let d = (1usize << n) * dim * dim;
    let mut best = 0.0f64;
    if d <= HAAR_CANDIDATE_LIMIT {
        let haar_best = (0..d)
            .into_par_iter()
            .map(|j| lp_ratio(op, &basis_function(n, dim, j), p).map(|(r, _)| r))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        best = best.max(haar_best);
    }
    let restart_best = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = random::derived(opts.seed, r as u64);
            let start = random::random_function(&mut rng, n, dim, false);
            ascend(op, start, p, &opts)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(best.max(restart_best))
}

/// Partial sums `sum_{k <= m} (d_k f)(d_k g)^*` for `m = 1..=n`.
pub fn difference_product_sums(f: &DyadicMatrixFunction, g: &DyadicMatrixFunction) -> Result<Vec<DyadicMatrixFunction>> {
    f.same_shape(g)?;
    let mut acc = DyadicMatrixFunction::zeros(f.resolution(), f.dim())?;
    let mut out = Vec::with_capacity(f.resolution());
    for k in 1..=f.resolution() {
        let df = dyadic::martingale_difference(f, k)?;
        let dg = dyadic::martingale_difference(g, k)?;
        acc = acc.add(&df.pointwise_mul(&dg.adjoint())?)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// `E sup_m |sum_{k<=m} (d_k f)(d_k g)^*|_1`.
pub fn maximal_difference_product(f: &DyadicMatrixFunction, g: &DyadicMatrixFunction) -> Result<f64> {
    let sums = difference_product_sums(f, g)?;
    let atoms = f.num_atoms();
    let total: f64 = (0..atoms)
        .map(|j| {
            sums.iter()
                .map(|s| linalg::schatten_unchecked(&s.atom_matrix(j), 1.0))
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / atoms as f64)
}

/// Both sides of the finite-level identity
/// `sum_{k<=m} (E_{k-1} f)(d_k g)^* + (d_k f)(E_{k-1} g)^*
///   = (E_m f)(E_m g)^* - (E_0 f)(E_0 g)^* - sum_{k<=m} (d_k f)(d_k g)^*`.
pub fn product_rule_sides(
    f: &DyadicMatrixFunction,
    g: &DyadicMatrixFunction,
    m: usize,
) -> Result<(DyadicMatrixFunction, DyadicMatrixFunction)> {
    f.same_shape(g)?;
    if m > f.resolution() {
        return Err(Error::range("level", m as f64, format!("0..={}", f.resolution())));
    }
    let mut lhs = DyadicMatrixFunction::zeros(f.resolution(), f.dim())?;
    let mut diag = DyadicMatrixFunction::zeros(f.resolution(), f.dim())?;
    for k in 1..=m {
        let ef = dyadic::conditional_expectation(f, k - 1)?;
        let eg = dyadic::conditional_expectation(g, k - 1)?;
        let df = dyadic::martingale_difference(f, k)?;
        let dg = dyadic::martingale_difference(g, k)?;
        lhs = lhs
            .add(&ef.pointwise_mul(&dg.adjoint())?)?
            .add(&df.pointwise_mul(&eg.adjoint())?)?;
        diag = diag.add(&df.pointwise_mul(&dg.adjoint())?)?;
    }
    let emf = dyadic::conditional_expectation(f, m)?;
    let emg = dyadic::conditional_expectation(g, m)?;
    let e0f = dyadic::conditional_expectation(f, 0)?;
    let e0g = dyadic::conditional_expectation(g, 0)?;
    let rhs = emf
        .pointwise_mul(&emg.adjoint())?
        .sub(&e0f.pointwise_mul(&e0g.adjoint())?)?
        .sub(&diag)?;
    Ok((lhs, rhs))
}

/// Dense matrix as a [`LinearMap`] on functions via the Haar basis; used to
/// cross-check estimators against dense linear algebra.
pub struct DenseMap {
    pub n: usize,
    pub dim: usize,
    pub matrix: CMat,
}

impl LinearMap for DenseMap {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.dim)
    }

    fn apply(&self, f: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
        let x = CMat::from_column_slice(self.matrix.ncols(), 1, &basis_coordinates(f));
        from_coordinates(self.n, self.dim, (&self.matrix * x).as_slice())
    }

    fn adjoint_apply(&self, g: &DyadicMatrixFunction) -> Result<DyadicMatrixFunction> {
        let x = CMat::from_column_slice(self.matrix.nrows(), 1, &basis_coordinates(g));
        from_coordinates(self.n, self.dim, (self.matrix.adjoint() * x).as_slice())
    }
}

fn from_coordinates(n: usize, dim: usize, coords: &[C64]) -> Result<DyadicMatrixFunction> {
    let mut acc = DyadicMatrixFunction::zeros(n, dim)?;
    for (j, &c) in coords.iter().enumerate() {
        if c != ZERO {
            acc = acc.axpy(c, &basis_function(n, dim, j))?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{conditional_expectation, martingale_difference, rademacher};
    use crate::linalg::trace_pairing;
    use crate::random::{random_function, random_matrix, seeded};

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    /// Direct evaluation from the defining sums, one level at a time.
    fn naive(kind: OperatorKind, phi: &DyadicMatrixFunction, f: &DyadicMatrixFunction) -> DyadicMatrixFunction {
        let n = phi.resolution();
        let mut acc = DyadicMatrixFunction::zeros(n, phi.dim()).unwrap();
        for k in 1..=n {
            let dphi = martingale_difference(phi, k).unwrap();
            let term = match kind {
                OperatorKind::Paraproduct => dphi.pointwise_mul(&conditional_expectation(f, k - 1).unwrap()),
                OperatorKind::HaarMultiplier => dphi.pointwise_mul(&conditional_expectation(f, k).unwrap()),
                OperatorKind::ParaproductAdjoint => dphi.adjoint().pointwise_mul(&martingale_difference(f, k).unwrap()),
            };
            acc = acc.add(&term.unwrap()).unwrap();
        }
        acc
    }

    #[test]
    fn fast_paths_match_defining_sums() {
        let mut rng = seeded(1);
        for (n, dim) in [(1, 1), (3, 2), (4, 3)] {
            let phi = random_function(&mut rng, n, dim, false);
            let f = random_function(&mut rng, n, dim, false);
            for kind in [OperatorKind::Paraproduct, OperatorKind::ParaproductAdjoint, OperatorKind::HaarMultiplier] {
                let fast = OperatorHandle::new(kind, phi.clone()).apply(&f).unwrap();
                assert!(fast.max_abs_diff(&naive(kind, &phi, &f)).unwrap() < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn constant_symbol_gives_zero() {
        let mut rng = seeded(2);
        let c = random_matrix(&mut rng, 2);
        let phi = DyadicMatrixFunction::constant(3, &c).unwrap();
        let f = random_function(&mut rng, 3, 2, false);
        assert!(paraproduct_apply(&phi, &f).unwrap().max_abs() < 1e-14);
        assert!(paraproduct_adjoint_apply(&phi, &f).unwrap().max_abs() < 1e-14);
        assert!(haar_multiplier_apply(&phi, &f).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn paraproduct_of_identity_is_oscillation() {
        let mut rng = seeded(3);
        let phi = random_function(&mut rng, 4, 2, false);
        let one = DyadicMatrixFunction::constant(4, &CMat::identity(2, 2)).unwrap();
        let out = paraproduct_apply(&phi, &one).unwrap();
        let expected = phi.sub(&conditional_expectation(&phi, 0).unwrap()).unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn single_level_hand_expansion() {
        // n = 1, phi = A r_1, f = B + C r_1: pi_phi f = (A B) r_1.
        let mut rng = seeded(4);
        let (a, b, c) = (random_matrix(&mut rng, 2), random_matrix(&mut rng, 2), random_matrix(&mut rng, 2));
        let r1 = rademacher(1, 1).unwrap();
        let phi = r1.tensor_matrix(&a).unwrap();
        let f = DyadicMatrixFunction::from_matrices(1, &[&b + &c, &b - &c]).unwrap();
        let out = paraproduct_apply(&phi, &f).unwrap();
        let expected = r1.tensor_matrix(&(&a * &b)).unwrap();
        assert!(out.max_abs_diff(&expected).unwrap() < 1e-13);
    }

    #[test]
    fn scalar_one_level_adjoint() {
        // phi = r_1, N = 1: the adjoint sends g to its level-1 Haar coefficient.
        let phi = rademacher(1, 1).unwrap();
        let g = DyadicMatrixFunction::scalar(1, &[C64::new(3.0, 1.0), C64::new(-1.0, 2.0)]).unwrap();
        let out = paraproduct_adjoint_apply(&phi, &g).unwrap();
        let coeff = (C64::new(3.0, 1.0) - C64::new(-1.0, 2.0)) * 0.5;
        assert!((out.data()[0] - coeff).norm() < 1e-15 && (out.data()[1] - coeff).norm() < 1e-15);
        let f = DyadicMatrixFunction::scalar(1, &[re(0.5), re(2.0)]).unwrap();
        let lhs = trace_pairing(&paraproduct_apply(&phi, &f).unwrap(), &g).unwrap();
        let rhs = trace_pairing(&f, &out).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn adjoint_pairing_identity() {
        let mut rng = seeded(5);
        for kind in [OperatorKind::Paraproduct, OperatorKind::ParaproductAdjoint, OperatorKind::HaarMultiplier] {
            let phi = random_function(&mut rng, 4, 3, false);
            let op = OperatorHandle::new(kind, phi);
            let f = random_function(&mut rng, 4, 3, false);
            let g = random_function(&mut rng, 4, 3, false);
            let lhs = trace_pairing(&op.apply(&f).unwrap(), &g).unwrap();
            let rhs = trace_pairing(&f, &op.adjoint_apply(&g).unwrap()).unwrap();
            assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn multiplier_by_rademacher() {
        let phi = rademacher(1, 1).unwrap();
        let f = DyadicMatrixFunction::scalar(1, &[C64::new(2.0, -1.0), re(5.0)]).unwrap();
        let out = haar_multiplier_apply(&phi, &f).unwrap();
        assert!(out.max_abs_diff(&phi.pointwise_mul(&f).unwrap()).unwrap() < 1e-15);
        let norm = operator_norm_2(&OperatorHandle::haar_multiplier(phi), PowerOptions::default()).unwrap();
        assert!((norm.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn multiplier_decomposition() {
        let mut rng = seeded(6);
        let phi = random_function(&mut rng, 5, 2, false);
        let f = random_function(&mut rng, 5, 2, false);
        let lam = haar_multiplier_apply(&phi, &f).unwrap();
        let pi = paraproduct_apply(&phi, &f).unwrap();
        let star = paraproduct_adjoint_apply(&phi.adjoint(), &f).unwrap();
        let resid = lam.sub(&pi).unwrap().sub(&star).unwrap();
        assert!(resid.l2_norm() <= 1e-10 * f.l2_norm());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let phi = rademacher(1, 2).unwrap();
        let f = rademacher(1, 3).unwrap();
        assert!(matches!(paraproduct_apply(&phi, &f), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn matricize_is_consistent() {
        let mut rng = seeded(7);
        let phi = random_function(&mut rng, 3, 2, false);
        for kind in [OperatorKind::Paraproduct, OperatorKind::HaarMultiplier] {
            let op = OperatorHandle::new(kind, phi.clone());
            let m = matricize(&op).unwrap();
            let madj = matricize(&op.adjoint_handle()).unwrap();
            assert!((m.adjoint() - madj).norm() < 1e-10);
            let sigma = linalg::operator_norm(&m);
            let est = operator_norm_2(&op, PowerOptions { tol: 1e-13, ..Default::default() }).unwrap();
            assert!((est.value - sigma).abs() < 1e-8 * sigma.max(1.0), "{} vs {}", est.value, sigma);
        }
        let zero = OperatorHandle::paraproduct(DyadicMatrixFunction::zeros(2, 2).unwrap());
        assert!(matricize(&zero).unwrap().norm() == 0.0);
        let big = OperatorHandle::paraproduct(DyadicMatrixFunction::zeros(7, 6).unwrap());
        assert!(matches!(matricize(&big), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn dense_map_roundtrip() {
        let mut rng = seeded(8);
        let phi = random_function(&mut rng, 2, 2, false);
        let op = OperatorHandle::haar_multiplier(phi);
        let dense = DenseMap {
            n: 2,
            dim: 2,
            matrix: matricize(&op).unwrap(),
        };
        let f = random_function(&mut rng, 2, 2, false);
        assert!(dense.apply(&f).unwrap().max_abs_diff(&op.apply(&f).unwrap()).unwrap() < 1e-12);
        assert!(dense.adjoint_apply(&f).unwrap().max_abs_diff(&op.adjoint_apply(&f).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn p_lower_bound_cases() {
        let mut rng = seeded(9);
        let phi = DyadicMatrixFunction::constant(3, &random_matrix(&mut rng, 2)).unwrap();
        let op = OperatorHandle::paraproduct(phi);
        assert_eq!(operator_norm_p_lower(&op, 3.0, AscentOptions::default()).unwrap(), 0.0);
        assert!(operator_norm_p_lower(&op, 1.0, AscentOptions::default()).is_err());
        assert!(operator_norm_p_lower(&op, f64::INFINITY, AscentOptions::default()).is_err());

        let phi = random_function(&mut rng, 3, 2, true);
        let op = OperatorHandle::paraproduct(phi);
        let exact = operator_norm_2(&op, PowerOptions { tol: 1e-14, ..Default::default() }).unwrap().value;
        let lower = operator_norm_p_lower(&op, 2.0, AscentOptions::default()).unwrap();
        assert!(lower <= exact * (1.0 + 1e-12));
        assert!((lower - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn p_lower_bound_monotone_in_restarts() {
        let mut rng = seeded(10);
        let op = OperatorHandle::paraproduct(random_function(&mut rng, 3, 2, true));
        let mut prev = 0.0;
        for restarts in [1, 2, 4] {
            let v = operator_norm_p_lower(&op, 3.0, AscentOptions { restarts, ..Default::default() }).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn scalar_p_bound_dominates_haar_candidates() {
        let mut rng = seeded(11);
        let op = OperatorHandle::paraproduct(random_function(&mut rng, 4, 1, true));
        for p in [1.5, 4.0] {
            let v = operator_norm_p_lower(&op, p, AscentOptions { restarts: 1, ..Default::default() }).unwrap();
            for j in 0..16 {
                let b = basis_function(4, 1, j);
                let r = linalg::lp_function_norm(&op.apply(&b).unwrap(), p).unwrap()
                    / linalg::lp_function_norm(&b, p).unwrap();
                assert!(v >= r);
            }
        }
    }

    #[test]
    fn product_rule_identity() {
        let mut rng = seeded(12);
        let f = random_function(&mut rng, 4, 2, false);
        let g = random_function(&mut rng, 4, 2, false);
        for m in 0..=4 {
            let (l, r) = product_rule_sides(&f, &g, m).unwrap();
            assert!(l.max_abs_diff(&r).unwrap() < 1e-12);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let (n, dim) = (2, 2);
        let d = 16;
        for a in 0..d {
            for b in 0..d {
                let ip = trace_pairing(&basis_function(n, dim, a), &basis_function(n, dim, b)).unwrap();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - re(expect)).norm() < 1e-14);
            }
        }
    }
}
