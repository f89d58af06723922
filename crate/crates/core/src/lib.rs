//! Matrix-valued dyadic harmonic analysis at finite resolution: martingale
//! calculus, paraproducts and Haar multipliers, operator-valued BMO and Hardy
//! norms, noncommutative maximal norms via semidefinite programming, and the
//! Hilbert-matrix constructions used for sharpness experiments.

pub mod constructions;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod io;
mod kernel;
pub mod linalg;
pub mod majorant;
pub mod norms;
pub mod operators;
pub mod random;

pub use dyadic::{CMat, DyadicMatrixFunction};
pub use error::{Error, Result};
pub use majorant::{MajorantCertificate, MajorantProblem};
pub use operators::{LinearMap, OperatorHandle, OperatorKind};
