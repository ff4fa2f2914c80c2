//! Machine-readable records of violations and bounded searches.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::scalar::ArithmeticMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Violated,
    #[serde(alias = "no_violation", alias = "no-violation")]
    NoViolationWithinBudget,
    Inconclusive,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Violated => "violated",
            VerdictStatus::NoViolationWithinBudget => "no_violation_within_budget",
            VerdictStatus::Inconclusive => "inconclusive",
        }
    }
}

impl std::str::FromStr for VerdictStatus {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.replace('-', "_").as_str() {
            "violated" => Ok(VerdictStatus::Violated),
            "no_violation" | "no_violation_within_budget" => {
                Ok(VerdictStatus::NoViolationWithinBudget)
            }
            "inconclusive" => Ok(VerdictStatus::Inconclusive),
            other => Err(crate::Error::invalid(
                "expect",
                format!("expected violated|no-violation|inconclusive, got `{other}`"),
            )),
        }
    }
}

/// How the test map of a witness can be rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Construction {
    /// A named construction (`zigzag(eps)`, `laminate(axis,b..,eps)`) on a
    /// uniform mesh with `mesh_k` subdivisions per axis.
    Family { id: String, mesh_k: usize },
    /// A serialized piecewise-affine map.
    Map { map: Value },
}

/// Record of a violation of one of the Morrey inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqcWitness {
    pub density_id: String,
    pub n: usize,
    pub m: usize,
    /// Base point, flattened component-major.
    pub a: Vec<Value>,
    pub construction: Construction,
    pub ess_sup: Value,
    pub f_at_a: Value,
    pub argmax_simplex: usize,
    /// Euclidean boundary sup; only approximate when the square is not a
    /// perfect square, the exact quantity is `boundary_sup_squared`.
    pub boundary_sup: f64,
    pub boundary_sup_squared: Value,
    pub grad_norm: Value,
    pub norm_conventions: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_def: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_bound: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Value>,
    pub rng_seed: u64,
    pub arithmetic_mode: ArithmeticMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelWitness {
    pub density_id: String,
    pub s: Value,
    pub x: Vec<Value>,
    pub y: Vec<Value>,
    pub midpoint: Vec<Value>,
    pub f_x: Value,
    pub f_y: Value,
    pub f_midpoint: Value,
    /// `vertex_pair`, `set_sample` or `box_sample`.
    pub source: String,
    pub worker: usize,
    pub draw_index: usize,
    pub rng_seed: u64,
    pub arithmetic_mode: ArithmeticMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    WeakViolation(MqcWitness),
    StrongFalsification(MqcWitness),
    NonconvexSublevel(SublevelWitness),
}

impl Witness {
    pub fn mqc(&self) -> Option<&MqcWitness> {
        match self {
            Witness::WeakViolation(w) | Witness::StrongFalsification(w) => Some(w),
            Witness::NonconvexSublevel(_) => None,
        }
    }

    pub fn sublevel(&self) -> Option<&SublevelWitness> {
        match self {
            Witness::NonconvexSublevel(w) => Some(w),
            _ => None,
        }
    }
}

/// Three-valued outcome of a bounded search. `witness` is present iff the
/// status is `violated`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub budget_spent: u64,
    pub budget: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Supporting witnesses, e.g. one per delta for a strong falsification.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<Witness>,
    pub note: String,
}

impl Verdict {
    pub fn violated(witness: Witness, budget_spent: u64, budget: String) -> Self {
        Verdict {
            status: VerdictStatus::Violated,
            budget_spent,
            budget,
            witness: Some(witness),
            evidence: Vec::new(),
            note: "violation found; witness attached".into(),
        }
    }

    pub fn no_violation(budget_spent: u64, budget: String) -> Self {
        let note = format!("no violation found within budget ({budget}); this is not a verification");
        Verdict {
            status: VerdictStatus::NoViolationWithinBudget,
            budget_spent,
            budget,
            witness: None,
            evidence: Vec::new(),
            note,
        }
    }

    pub fn inconclusive(budget_spent: u64, budget: String, reason: impl Into<String>) -> Self {
        Verdict {
            status: VerdictStatus::Inconclusive,
            budget_spent,
            budget,
            witness: None,
            evidence: Vec::new(),
            note: reason.into(),
        }
    }

    pub fn is_violated(&self) -> bool {
        self.status == VerdictStatus::Violated
    }
}
