//! Executable checks for level-set quasiconvexity and weak/strong Morrey
//! quasiconvexity of `L^inf` densities, with exact witnesses for the
//! square-boundary counterexample in `R^4`.

pub mod checkers;
pub mod cli;
pub mod constructions;
pub mod density;
pub mod error;
pub mod functionals;
pub mod mesh;
pub mod scalar;
pub mod verdict;

pub use error::{Error, Result};
pub use scalar::{ArithmeticMode, Rational, Scalar};
