//! Recomputes every number stored in a witness from its serialized
//! construction and re-checks the inequalities it claims.

use serde::Serialize;
use serde_json::Value;

use super::beats;
use crate::constructions::ConstructionId;
use crate::density::{Density, GradientPoint};
use crate::error::{Error, Result};
use crate::functionals::ess_sup_shifted;
use crate::mesh::PwAffineMap;
use crate::scalar::{ArithmeticMode, Rational, Scalar};
use crate::verdict::{Construction, MqcWitness, SublevelWitness, Witness};

/// Float witnesses must be reproduced to this absolute error.
pub const FLOAT_REPRODUCTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessCheck {
    /// Stored values agree with the recomputed ones.
    pub reproduced: bool,
    /// The inequalities the witness claims hold for the recomputed values.
    pub invariants_hold: bool,
    pub issues: Vec<String>,
}

impl WitnessCheck {
    pub fn ok(&self) -> bool {
        self.reproduced && self.invariants_hold
    }
}

struct Checker {
    reproduced: bool,
    invariants_hold: bool,
    issues: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Checker { reproduced: true, invariants_hold: true, issues: Vec::new() }
    }

    fn agree<S: Scalar>(&mut self, field: &str, stored: &Value, fresh: &S) -> Result<()> {
        let stored_v = S::from_json(stored)?;
        let same = match S::MODE {
            ArithmeticMode::Rational => stored_v == *fresh,
            ArithmeticMode::Float => (stored_v.to_f64() - fresh.to_f64()).abs() <= FLOAT_REPRODUCTION_TOLERANCE,
        };
        if !same {
            self.reproduced = false;
            self.issues.push(format!("{field}: stored {stored}, recomputed {}", fresh.to_json()));
        }
        Ok(())
    }

    fn require(&mut self, holds: bool, what: &str) {
        if !holds {
            self.invariants_hold = false;
            self.issues.push(format!("claimed inequality fails: {what}"));
        }
    }

    fn finish(self) -> WitnessCheck {
        WitnessCheck { reproduced: self.reproduced, invariants_hold: self.invariants_hold, issues: self.issues }
    }
}

fn parse_list<S: Scalar>(values: &[Value]) -> Result<Vec<S>> {
    values.iter().map(S::from_json).collect()
}

fn rebuild<S: Scalar>(w: &MqcWitness) -> Result<PwAffineMap<S>> {
    match &w.construction {
        Construction::Family { id, mesh_k } => ConstructionId::parse(id)?.build(w.n, *mesh_k),
        Construction::Map { map } => PwAffineMap::from_json(map),
    }
}

fn check_mqc<S: Scalar>(d: &Density, w: &MqcWitness, strong: bool) -> Result<WitnessCheck> {
    let mut c = Checker::new();
    if w.density_id != d.id() || w.n != d.n() || w.m != d.m() {
        return Err(Error::Incompatible(format!(
            "witness is for {} ({}x{}), density is {} ({}x{})",
            w.density_id,
            w.n,
            w.m,
            d.id(),
            d.n(),
            d.m()
        )));
    }
    let a = GradientPoint::new(parse_list::<S>(&w.a)?, w.n, w.m)?;
    let phi = rebuild::<S>(w)?;
    let res = ess_sup_shifted(d, &a, &phi)?;
    let fa = d.eval_slice(a.entries())?;
    let bsq = phi.boundary_sup_sq();
    let grad = phi.grad_sup_norm();
    c.agree("ess_sup", &w.ess_sup, &res.value)?;
    c.agree("f_at_a", &w.f_at_a, &fa)?;
    c.agree("boundary_sup_squared", &w.boundary_sup_squared, &bsq)?;
    c.agree("grad_norm", &w.grad_norm, &grad)?;
    c.agree("boundary_sup", &Value::from(w.boundary_sup), &phi.boundary_sup())?;
    if res.argmax_simplex != w.argmax_simplex {
        c.reproduced = false;
        c.issues.push(format!("argmax_simplex: stored {}, recomputed {}", w.argmax_simplex, res.argmax_simplex));
    }
    if strong {
        let field = |v: &Option<Value>, name: &str| -> Result<S> {
            v.as_ref()
                .ok_or_else(|| Error::invalid(name, "missing from strong witness"))
                .and_then(S::from_json)
        };
        let eps = field(&w.epsilon_def, "epsilon_def")?;
        let k = field(&w.k_bound, "k_bound")?;
        let delta = field(&w.delta, "delta")?;
        c.require(grad <= k, "grad_norm <= K");
        c.require(bsq <= delta.clone() * delta, "boundary_sup <= delta");
        c.require(beats(&fa, &res.value, &eps), "f(A) > ess_sup + epsilon_def");
    } else {
        c.require(phi.zero_boundary(), "map vanishes on the boundary");
        c.require(beats(&fa, &res.value, &S::zero()), "f(A) > ess_sup");
    }
    Ok(c.finish())
}

fn check_sublevel<S: Scalar>(d: &Density, w: &SublevelWitness) -> Result<WitnessCheck> {
    let mut c = Checker::new();
    if w.density_id != d.id() {
        return Err(Error::Incompatible(format!("witness is for {}, density is {}", w.density_id, d.id())));
    }
    let s = S::from_json(&w.s)?;
    let x = parse_list::<S>(&w.x)?;
    let y = parse_list::<S>(&w.y)?;
    let two = S::from_int(2);
    let mid: Vec<S> = x.iter().zip(&y).map(|(a, b)| (a.clone() + b.clone()) / two.clone()).collect();
    let (fx, fy, fm) = (d.eval_slice(&x)?, d.eval_slice(&y)?, d.eval_slice(&mid)?);
    for (i, (stored, fresh)) in w.midpoint.iter().zip(&mid).enumerate() {
        c.agree(&format!("midpoint[{i}]"), stored, fresh)?;
    }
    if w.midpoint.len() != mid.len() {
        c.reproduced = false;
        c.issues.push("midpoint length".into());
    }
    c.agree("f_x", &w.f_x, &fx)?;
    c.agree("f_y", &w.f_y, &fy)?;
    c.agree("f_midpoint", &w.f_midpoint, &fm)?;
    c.require(fx <= s && fy <= s, "f(x) <= s and f(y) <= s");
    c.require(fm > s, "f(midpoint) > s");
    Ok(c.finish())
}

/// Rebuilds the witness's map or points in its own arithmetic mode and
/// compares every stored number: exactly in rational mode, to `1e-12` in
/// float mode.
pub fn verify_witness(d: &Density, w: &Witness) -> Result<WitnessCheck> {
    let mode = match w {
        Witness::WeakViolation(m) | Witness::StrongFalsification(m) => m.arithmetic_mode,
        Witness::NonconvexSublevel(s) => s.arithmetic_mode,
    };
    match (w, mode) {
        (Witness::WeakViolation(m), ArithmeticMode::Rational) => check_mqc::<Rational>(d, m, false),
        (Witness::WeakViolation(m), ArithmeticMode::Float) => check_mqc::<f64>(d, m, false),
        (Witness::StrongFalsification(m), ArithmeticMode::Rational) => check_mqc::<Rational>(d, m, true),
        (Witness::StrongFalsification(m), ArithmeticMode::Float) => check_mqc::<f64>(d, m, true),
        (Witness::NonconvexSublevel(s), ArithmeticMode::Rational) => check_sublevel::<Rational>(d, s),
        (Witness::NonconvexSublevel(s), ArithmeticMode::Float) => check_sublevel::<f64>(d, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers::{falsify_strong_mqc, StrongConfig};
    use crate::density::{make_square_boundary_4d, sublevel_midpoint_convexity, SampleBudget};
    use serde_json::json;

    fn r(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn strong_witness() -> Witness {
        let d = make_square_boundary_4d();
        let p = GradientPoint::new(vec![r(1, 2), r(0, 1), r(1, 2), r(0, 1)], 2, 2).unwrap();
        let cfg = StrongConfig { deltas: vec![r(1, 4)], ..StrongConfig::default() };
        falsify_strong_mqc(&d, &p, &cfg).unwrap().witness.unwrap()
    }

    #[test]
    fn strong_witness_round_trips_through_json() {
        let d = make_square_boundary_4d();
        let w = strong_witness();
        let text = serde_json::to_string(&w).unwrap();
        let back: Witness = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        assert!(verify_witness(&d, &back).unwrap().ok());
    }

    #[test]
    fn tampered_values_are_caught() {
        let d = make_square_boundary_4d();
        let Witness::StrongFalsification(mut m) = strong_witness() else { panic!() };
        m.ess_sup = json!("1");
        let check = verify_witness(&d, &Witness::StrongFalsification(m.clone())).unwrap();
        assert!(!check.reproduced);
        assert!(check.invariants_hold);

        let Witness::StrongFalsification(mut m2) = strong_witness() else { panic!() };
        m2.delta = Some(json!("1/1024"));
        let check = verify_witness(&d, &Witness::StrongFalsification(m2)).unwrap();
        assert!(check.reproduced);
        assert!(!check.invariants_hold);

        // a strong witness is not zero-boundary, so it fails as a weak one
        let Witness::StrongFalsification(m3) = strong_witness() else { panic!() };
        let check = verify_witness(&d, &Witness::WeakViolation(m3)).unwrap();
        assert!(!check.invariants_hold);
    }

    #[test]
    fn sublevel_witness_verifies_in_both_modes() {
        let d = make_square_boundary_4d();
        for mode in [ArithmeticMode::Rational, ArithmeticMode::Float] {
            let v = sublevel_midpoint_convexity(&d, &r(1, 2), &SampleBudget::new(16), 0, mode).unwrap();
            let w = v.witness.unwrap();
            assert!(verify_witness(&d, &w).unwrap().ok());
            let Witness::NonconvexSublevel(mut s) = w else { panic!() };
            s.f_midpoint = s.f_x.clone();
            assert!(!verify_witness(&d, &Witness::NonconvexSublevel(s)).unwrap().ok());
        }
    }

    #[test]
    fn wrong_density_is_rejected() {
        let d = crate::density::make_segment_indicator_2d([r(0, 1), r(0, 1)], [r(1, 1), r(0, 1)]).unwrap();
        assert!(verify_witness(&d, &strong_witness()).is_err());
    }
}
