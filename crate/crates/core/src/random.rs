//! Seeded random ensembles.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dyadic::{haar_reconstruct, CMat, DyadicMatrixFunction, HaarExpansion};

pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for sub-task `stream` of a run seeded with `seed`.
pub fn derived(seed: u64, stream: u64) -> Rng64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian, `E|z|^2 = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |_, _| complex_normal(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let g = random_matrix(rng, dim);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// `G^* G` for a Gaussian `G`, optionally of reduced rank.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> CMat {
    let g = CMat::from_fn(rank.max(1), dim, |_, _| complex_normal(rng));
    g.adjoint() * g
}

/// Haar-distributed unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMat {
    let g = random_matrix(rng, dim);
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Random function with independent complex Gaussian Haar coefficients. With
/// `level_decay` the level-`k` coefficients have scale `2^(-k/2)`, which keeps
/// BMO-type norms of order one as the resolution grows.
pub fn random_function<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dim: usize,
    level_decay: bool,
) -> DyadicMatrixFunction {
    let mean = random_matrix(rng, dim);
    let diffs = (1..=n)
        .map(|k| {
            let scale = if level_decay { 2f64.powf(-(k as f64) / 2.0) } else { 1.0 };
            (0..1usize << (k - 1))
                .map(|_| random_matrix(rng, dim) * C64::new(scale, 0.0))
                .collect()
        })
        .collect();
    haar_reconstruct(&HaarExpansion {
        resolution: n,
        dim,
        mean,
        diffs,
    })
    .expect("well-formed expansion")
}

/// [`random_function`] scaled to unit `L^2` norm.
pub fn random_unit_function<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> DyadicMatrixFunction {
    let f = random_function(rng, n, dim, false);
    let norm = f.l2_norm();
    f.scale(C64::new(1.0 / norm, 0.0))
}

pub fn random_real_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}
