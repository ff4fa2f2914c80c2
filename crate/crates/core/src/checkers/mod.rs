//! Definition-level checkers: bounded searches for violations of weak and
//! strong Morrey quasiconvexity, the scalar-case equivalence harness and
//! the end-to-end counterexample pipeline.
//!
//! Searches run in `f64` on dyadic nodal values, which convert to rationals
//! without rounding; in rational mode every candidate violation is
//! re-evaluated exactly before it is reported.

mod candidates;
mod reproduce;
mod strong;
mod suite;
mod weak;
mod witness;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ArithmeticMode, Rational, Scalar, FLOAT_TOLERANCE};

pub use reproduce::{reproduce_paper_counterexample, ReproduceConfig, ReproduceReport, ReproduceStatus, StageReport};
pub use strong::{dyadic_deltas, falsify_strong_mqc, StrongConfig};
pub use suite::{scalar_equivalence_suite, ScalarSuiteConfig, ScalarSuiteReport, SuiteStatus};
pub use weak::{falsify_weak_mqc, SearchConfig};
pub use witness::{verify_witness, WitnessCheck};

/// Recorded in every witness.
pub const NORM_CONVENTIONS: &str = "grad_norm: max over simplices of the max absolute entry of D phi; \
boundary_sup: max over boundary nodes of the Euclidean norm of phi (exact value is boundary_sup_squared)";

/// Candidate families for the strong search, tried in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    ZigZag,
    Laminate,
    Random,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::ZigZag, Family::Laminate, Family::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::ZigZag => "zigzag",
            Family::Laminate => "laminate",
            Family::Random => "random",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zigzag" => Ok(Family::ZigZag),
            "laminate" => Ok(Family::Laminate),
            "random" => Ok(Family::Random),
            other => Err(Error::invalid("families", format!("unknown family `{other}`"))),
        }
    }
}

/// Deterministic per-candidate generator.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `fa > value + margin`, exactly or beyond the float tolerance.
pub(crate) fn beats<S: Scalar>(fa: &S, value: &S, margin: &S) -> bool {
    match S::MODE {
        ArithmeticMode::Rational => *fa > value.clone() + margin.clone(),
        ArithmeticMode::Float => fa.to_f64() - value.to_f64() - margin.to_f64() > FLOAT_TOLERANCE,
    }
}

pub(crate) fn format_rationals(v: &[Rational]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
