//! Operator-valued BMO norms, the `H^1_max` norm and the ratio checks built on
//! them.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, CMat, DyadicMatrixFunction};
use crate::error::{Error, Result};
use crate::kernel;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    BmoC,
    BmoR,
    BmoCr,
    #[serde(rename = "bmo_M")]
    BmoM,
    H1Max,
    Lp,
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bmo_c" => NormKind::BmoC,
            "bmo_r" => NormKind::BmoR,
            "bmo_cr" => NormKind::BmoCr,
            "bmo_m" | "bmo_M" => NormKind::BmoM,
            "h1max" | "h1_max" => NormKind::H1Max,
            "lp" => NormKind::Lp,
            other => return Err(Error::Invalid(format!("unknown norm kind `{other}`"))),
        })
    }
}

/// The dyadic interval (or conditioning level) at which a supremum is attained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub level: usize,
    pub interval: usize,
    /// For `bmo_cr`: whether the row norm attained the maximum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub name: NormKind,
    pub value: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BmoVariant {
    Column,
    Row,
    ColumnRow,
}

/// Column BMO: `sup_m |E_m sum_{k>m} (d_k phi)^*(d_k phi)|^(1/2)`, with the
/// supremum over `m = 0..n-1` and the level-`m` intervals.
pub fn bmo_norm(phi: &DyadicMatrixFunction, variant: BmoVariant) -> NormReport {
    match variant {
        BmoVariant::Column => bmo_column(phi, NormKind::BmoC, None),
        BmoVariant::Row => bmo_column(&phi.adjoint(), NormKind::BmoR, None),
        BmoVariant::ColumnRow => {
            let c = bmo_column(phi, NormKind::BmoCr, Some(false));
            let r = bmo_column(&phi.adjoint(), NormKind::BmoCr, Some(true));
            if r.value > c.value {
                r
            } else {
                c
            }
        }
    }
}

fn bmo_column(phi: &DyadicMatrixFunction, name: NormKind, row: Option<bool>) -> NormReport {
    let (n, dim) = (phi.resolution(), phi.dim());
    let b = dim * dim;
    // grams[k-1]: (d_k phi)^* (d_k phi) on level-(k-1) intervals.
    let grams = dyadic::difference_gram_levels(phi);
    // tail[m] = E_m sum_{k>m} (d_k phi)^*(d_k phi), built from the finest level up.
    let mut best = (0.0f64, None);
    let mut tail: Vec<C64> = Vec::new();
    for m in (0..n).rev() {
        let count = 1usize << m;
        let mut cur = grams[m].clone();
        if !tail.is_empty() {
            for i in 0..count {
                for t in 0..b {
                    cur[i * b + t] += (tail[2 * i * b + t] + tail[(2 * i + 1) * b + t]) * 0.5;
                }
            }
        }
        let values: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|i| linalg::operator_norm(&CMat::from_row_slice(dim, dim, &cur[i * b..(i + 1) * b])))
            .collect();
        for (i, v) in values.into_iter().enumerate() {
            if v > best.0 || best.1.is_none() && v >= best.0 {
                best = (v, Some(Witness { level: m, interval: i, row }));
            }
        }
        tail = cur;
    }
    NormReport {
        name,
        value: best.0.max(0.0).sqrt(),
        witness: best.1,
    }
}

/// Interval form of column BMO, `sup_I |(1/|I|) int_I |phi - phi_I|^2|^(1/2)`.
/// Agrees with the martingale form of [`bmo_norm`].
pub fn bmo_column_interval_form(phi: &DyadicMatrixFunction) -> f64 {
    let (n, dim) = (phi.resolution(), phi.dim());
    let mut best = 0.0f64;
    for level in 0..=n {
        let means = phi.level_mean(level);
        let width = 1usize << (n - level);
        for i in 0..1usize << level {
            let mi = CMat::from_row_slice(dim, dim, &means[i * dim * dim..(i + 1) * dim * dim]);
            let mut acc = CMat::zeros(dim, dim);
            for j in i * width..(i + 1) * width {
                let d = phi.atom_matrix(j) - &mi;
                acc += d.adjoint() * d;
            }
            acc /= C64::new(width as f64, 0.0);
            best = best.max(linalg::operator_norm(&acc));
        }
    }
    best.sqrt()
}

/// `sup_I ((1/|I|) int_I |phi - phi_I|_M^2 dt)^(1/2)` with the operator norm
/// pointwise.
pub fn bmo_m_norm(phi: &DyadicMatrixFunction) -> NormReport {
    let (n, dim) = (phi.resolution(), phi.dim());
    let b = dim * dim;
    let pyramid = phi.mean_pyramid();
    let per_level: Vec<(f64, usize)> = (0..=n)
        .into_par_iter()
        .map(|level| {
            let width = 1usize << (n - level);
            let means = &pyramid[level];
            let mut best = (0.0f64, 0usize);
            let mut diff = vec![C64::new(0.0, 0.0); b];
            for i in 0..1usize << level {
                let mi = &means[i * b..(i + 1) * b];
                let mut acc = 0.0;
                for j in i * width..(i + 1) * width {
                    for ((d, x), m) in diff.iter_mut().zip(phi.atom(j)).zip(mi) {
                        *d = x - m;
                    }
                    acc += linalg::operator_norm(&CMat::from_row_slice(dim, dim, &diff)).powi(2);
                }
                let v = acc / width as f64;
                if v > best.0 {
                    best = (v, i);
                }
            }
            (best.0, best.1)
        })
        .collect();
    let (mut value, mut witness) = (0.0f64, Witness { level: 0, interval: 0, row: None });
    for (level, &(v, i)) in per_level.iter().enumerate() {
        if v > value {
            value = v;
            witness = Witness { level, interval: i, row: None };
        }
    }
    NormReport {
        name: NormKind::BmoM,
        value: value.sqrt(),
        witness: Some(witness),
    }
}

/// `int sup_m |E_m f(t)|_1 dt`.
pub fn h1_max_norm(f: &DyadicMatrixFunction) -> NormReport {
    let maximal = maximal_function(f, 1.0);
    NormReport {
        name: NormKind::H1Max,
        value: maximal.iter().sum::<f64>() / maximal.len() as f64,
        witness: None,
    }
}

/// `t -> max_m |E_m f(t)|_p` on the atoms.
pub fn maximal_function(f: &DyadicMatrixFunction, p: f64) -> Vec<f64> {
    let (n, dim) = (f.resolution(), f.dim());
    let b = dim * dim;
    let pyramid = f.mean_pyramid();
    let level_norms: Vec<Vec<f64>> = pyramid
        .par_iter()
        .map(|blocks| {
            blocks
                .chunks(b)
                .map(|blk| linalg::schatten_unchecked(&CMat::from_row_slice(dim, dim, blk), p))
                .collect()
        })
        .collect();
    (0..1usize << n)
        .map(|j| {
            (0..=n)
                .map(|level| level_norms[level][j >> (n - level)])
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `L^p` norm as a [`NormReport`].
pub fn lp_report(f: &DyadicMatrixFunction, p: f64) -> Result<NormReport> {
    Ok(NormReport {
        name: NormKind::Lp,
        value: linalg::lp_function_norm(f, p)?,
        witness: None,
    })
}

/// `|tau E phi f^*| / (|phi|_BMO_M |f|_H1max)`.
pub fn bg_pairing_check(phi: &DyadicMatrixFunction, f: &DyadicMatrixFunction) -> Result<f64> {
    phi.same_shape(f)?;
    let bmo = bmo_m_norm(phi).value;
    let h1 = h1_max_norm(f).value;
    if bmo == 0.0 || h1 == 0.0 {
        return Err(Error::Degenerate(format!(
            "BMO_M norm {bmo} and H1_max norm {h1} must both be nonzero"
        )));
    }
    // tau E phi f^* = tau E f^* phi
    let num = linalg::trace_pairing(phi, f)?.norm();
    Ok(num / (bmo * h1))
}

/// `| sup_m |E_m f|_p |_{L^p(T)} / |f|_{L^p}` for `1 < p <= inf`.
pub fn doob_check(f: &DyadicMatrixFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::range("p", p, "(1, inf]"));
    }
    let denom = linalg::lp_function_norm(f, p)?;
    if denom == 0.0 {
        return Err(Error::Degenerate("zero function".into()));
    }
    let maximal = maximal_function(f, p);
    Ok(linalg::scalar_lp(&maximal, p) / denom)
}

/// `|f|_2^2 - |E_0 f|_2^2 - |S(f)|_2^2`.
pub fn burkholder_gundy_defect(f: &DyadicMatrixFunction) -> f64 {
    let total = f.l2_norm().powi(2);
    let mean = f.mean();
    let mean_sq: f64 = mean.iter().map(|z| z.norm_sqr()).sum();
    let s2 = dyadic::square_function_squared(f);
    let sq: f64 = (0..s2.num_atoms())
        .map(|j| kernel::trace(s2.atom(j), s2.dim()).re)
        .sum::<f64>()
        / s2.num_atoms() as f64;
    total - mean_sq - sq
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::rademacher;
    use crate::random::{random_function, random_hermitian, random_matrix, random_unitary, seeded};

    #[test]
    fn constants_have_zero_bmo() {
        let mut rng = seeded(1);
        let c = random_matrix(&mut rng, 3);
        let phi = DyadicMatrixFunction::constant(3, &c).unwrap();
        for v in [BmoVariant::Column, BmoVariant::Row, BmoVariant::ColumnRow] {
            assert_eq!(bmo_norm(&phi, v).value, 0.0);
        }
        assert!(bmo_m_norm(&phi).value < 1e-14);
    }

    #[test]
    fn rademacher_norms() {
        for n in 1..=4 {
            let r = rademacher(1, n).unwrap();
            let c = bmo_norm(&r, BmoVariant::Column);
            assert!((c.value - 1.0).abs() < 1e-14);
            assert_eq!(c.witness.unwrap().level, 0);
            assert!((bmo_m_norm(&r).value - 1.0).abs() < 1e-14);
            assert!((h1_max_norm(&r).value - 1.0).abs() < 1e-14);
            assert!((bg_pairing_check(&r, &r).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_symbols_have_equal_row_and_column_norms() {
        let mut rng = seeded(2);
        let phi = DyadicMatrixFunction::from_fn(3, 3, |_| random_hermitian(&mut rng, 3)).unwrap();
        let c = bmo_norm(&phi, BmoVariant::Column).value;
        let r = bmo_norm(&phi, BmoVariant::Row).value;
        assert!((c - r).abs() < 1e-12 * c);
    }

    #[test]
    fn witness_attains_value() {
        let mut rng = seeded(3);
        let phi = random_function(&mut rng, 4, 2, false);
        let rep = bmo_norm(&phi, BmoVariant::Column);
        let w = rep.witness.unwrap();
        let tail = (w.level + 1..=4).fold(DyadicMatrixFunction::zeros(4, 2).unwrap(), |acc, k| {
            let d = dyadic::martingale_difference(&phi, k).unwrap();
            acc.add(&d.adjoint().pointwise_mul(&d).unwrap()).unwrap()
        });
        let cond = dyadic::conditional_expectation(&tail, w.level).unwrap();
        let atom = w.interval << (4 - w.level);
        let v = linalg::operator_norm(&cond.atom_matrix(atom)).sqrt();
        assert!((v - rep.value).abs() < 1e-10);

        let rep = bmo_m_norm(&phi);
        let w = rep.witness.unwrap();
        let width = 1 << (4 - w.level);
        let means = phi.level_mean(w.level);
        let mi = CMat::from_row_slice(2, 2, &means[w.interval * 4..(w.interval + 1) * 4]);
        let v: f64 = (w.interval * width..(w.interval + 1) * width)
            .map(|j| linalg::operator_norm(&(phi.atom_matrix(j) - &mi)).powi(2))
            .sum::<f64>()
            / width as f64;
        assert!((v.sqrt() - rep.value).abs() < 1e-10);
    }

    #[test]
    fn martingale_and_interval_forms_agree() {
        let mut rng = seeded(4);
        for _ in 0..5 {
            let phi = random_function(&mut rng, 4, 3, false);
            let a = bmo_norm(&phi, BmoVariant::Column).value;
            let b = bmo_column_interval_form(&phi);
            assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn bmo_ordering_and_invariance() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let phi = random_function(&mut rng, 4, 2, true);
            let m = bmo_m_norm(&phi).value;
            assert!(bmo_norm(&phi, BmoVariant::ColumnRow).value <= m + 1e-9);
            let shift = DyadicMatrixFunction::constant(4, &random_matrix(&mut rng, 2)).unwrap();
            let shifted = phi.add(&shift).unwrap();
            assert!((bmo_m_norm(&shifted).value - m).abs() < 1e-10);
            let u = random_unitary(&mut rng, 2);
            let v = random_unitary(&mut rng, 2);
            let rotated = phi.map_atoms(|_, a| &u * a * &v).unwrap();
            assert!((bmo_m_norm(&rotated).value - m).abs() < 1e-10);
        }
    }

    #[test]
    fn h1_max_cases() {
        let mut rng = seeded(6);
        let c = random_matrix(&mut rng, 3);
        let f = DyadicMatrixFunction::constant(2, &c).unwrap();
        assert!((h1_max_norm(&f).value - linalg::schatten_norm(&c, 1.0).unwrap()).abs() < 1e-12);
        let g = random_function(&mut rng, 4, 2, false);
        assert!(linalg::lp_function_norm(&g, 1.0).unwrap() <= h1_max_norm(&g).value + 1e-12);
    }

    #[test]
    fn degenerate_pairing_rejected() {
        let phi = DyadicMatrixFunction::constant(2, &CMat::identity(2, 2)).unwrap();
        let f = DyadicMatrixFunction::constant(2, &CMat::identity(2, 2)).unwrap();
        assert!(matches!(bg_pairing_check(&phi, &f), Err(Error::Degenerate(_))));
    }

    #[test]
    fn doob_cases() {
        let mut rng = seeded(7);
        let f = DyadicMatrixFunction::constant(3, &random_matrix(&mut rng, 2)).unwrap();
        assert!((doob_check(&f, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let g = random_function(&mut rng, 5, 2, false);
        assert!((doob_check(&g, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        let r = doob_check(&g, 2.0).unwrap();
        assert!((1.0..=4.0).contains(&r));
        assert!(doob_check(&g, 1.0).is_err());
        assert!(doob_check(&DyadicMatrixFunction::zeros(2, 2).unwrap(), 2.0).is_err());
    }

    #[test]
    fn burkholder_gundy_at_two() {
        let mut rng = seeded(8);
        let f = random_function(&mut rng, 6, 3, false);
        assert!(burkholder_gundy_defect(&f).abs() < 1e-10 * f.l2_norm().powi(2));
    }
}
