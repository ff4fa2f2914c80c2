//! Bounded search for zero-boundary maps with `ess sup f(A + D phi) < f(A)`.

use std::cmp::Ordering;
use std::sync::Arc;

use num::traits::Zero;
use rand::Rng;
use rayon::prelude::*;

use super::candidates::{laminate_candidates, scaled, RandomMaps};
use super::{beats, stream_rng, witness, NORM_CONVENTIONS};
use crate::constructions::ZigZagProfile;
use crate::density::{Density, GradientPoint};
use crate::error::{Error, Result};
use crate::functionals::{ess_sup_shifted, simplex_values, EssSupResult};
use crate::mesh::{build_kuhn_mesh, PwAffineMap};
use crate::scalar::{ArithmeticMode, Rational, Scalar};
use crate::verdict::{Construction, MqcWitness, Verdict, Witness};

/// Budget and knobs of the weak search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Subdivisions per axis of the search mesh.
    pub k: usize,
    /// Random zero-boundary candidates.
    pub trials: usize,
    /// Best random candidates refined by coordinate descent.
    pub local_starts: usize,
    pub local_steps: usize,
    /// Cap on the max-abs-entry gradient norm of random candidates.
    pub k_search: Rational,
    pub seed: u64,
    pub mode: ArithmeticMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k: 8,
            trials: 10_000,
            local_starts: 8,
            local_steps: 64,
            k_search: Rational::from_int(4),
            seed: 0,
            mode: ArithmeticMode::Rational,
        }
    }
}

impl SearchConfig {
    pub fn describe(&self) -> String {
        format!(
            "mesh k={}, zero map + laminates (n=1) + {} random trials + {} local starts x {} steps, gradient cap {}, seed {}",
            self.k, self.trials, self.local_starts, self.local_steps, self.k_search, self.seed
        )
    }
}

/// Lexicographic search objective: ess sup, then how many simplices attain
/// it, then the mean value.
#[derive(Debug, Clone, Copy)]
struct Objective {
    ess: f64,
    at_max: usize,
    mean: f64,
}

impl Objective {
    fn of(values: &[f64]) -> Self {
        let ess = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at_max = values.iter().filter(|&&v| v == ess).count();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Objective { ess, at_max, mean }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.ess
            .total_cmp(&other.ess)
            .then(self.at_max.cmp(&other.at_max))
            .then(self.mean.total_cmp(&other.mean))
    }
}

struct Search<'a, S: Scalar> {
    d: &'a Density,
    a: GradientPoint<S>,
    a_f: GradientPoint<f64>,
    fa: S,
    fa_f: f64,
    cfg: &'a SearchConfig,
}

impl<S: Scalar> Search<'_, S> {
    fn objective(&self, map: &PwAffineMap<f64>) -> Result<Objective> {
        Ok(Objective::of(&simplex_values(self.d, &self.a_f, map)?))
    }

    /// Re-evaluates a float candidate in the target arithmetic.
    fn confirm(&self, map: &PwAffineMap<f64>, obj: &Objective) -> Result<Option<(PwAffineMap<S>, EssSupResult<S>)>> {
        if obj.ess >= self.fa_f && S::MODE == ArithmeticMode::Rational {
            return Ok(None);
        }
        let exact: PwAffineMap<S> = map.to_scalar()?;
        self.check(exact)
    }

    fn check(&self, phi: PwAffineMap<S>) -> Result<Option<(PwAffineMap<S>, EssSupResult<S>)>> {
        let res = ess_sup_shifted(self.d, &self.a, &phi)?;
        Ok(beats(&self.fa, &res.value, &S::zero()).then_some((phi, res)))
    }

    fn witness(&self, phi: &PwAffineMap<S>, res: &EssSupResult<S>, construction: Construction) -> MqcWitness {
        MqcWitness {
            density_id: self.d.id().to_string(),
            n: self.d.n(),
            m: self.d.m(),
            a: self.a.to_json(),
            construction,
            ess_sup: res.value.to_json(),
            f_at_a: self.fa.to_json(),
            argmax_simplex: res.argmax_simplex,
            boundary_sup: phi.boundary_sup(),
            boundary_sup_squared: phi.boundary_sup_sq().to_json(),
            grad_norm: phi.grad_sup_norm().to_json(),
            norm_conventions: NORM_CONVENTIONS.to_string(),
            epsilon_def: None,
            k_bound: None,
            delta: None,
            rng_seed: self.cfg.seed,
            arithmetic_mode: S::MODE,
        }
    }

    /// The weak witness read under the strong definition with `delta = 0`,
    /// `K = grad_norm` and `eps_def = (f(A) - ess sup)/2`.
    fn strong_shadow(&self, phi: &PwAffineMap<S>, res: &EssSupResult<S>, weak: &MqcWitness) -> Result<Witness> {
        let eps_def = (self.fa.clone() - res.value.clone()) / S::from_int(2);
        let mut w = weak.clone();
        w.epsilon_def = Some(eps_def.to_json());
        w.k_bound = Some(phi.grad_sup_norm().to_json());
        w.delta = Some(S::zero().to_json());
        let shadow = Witness::StrongFalsification(w);
        let check = witness::verify_witness(self.d, &shadow)?;
        if !check.ok() {
            return Err(Error::Incompatible(format!(
                "weak violation does not yield a strong falsification: {}",
                check.issues.join("; ")
            )));
        }
        Ok(shadow)
    }

    fn report(
        &self,
        phi: &PwAffineMap<S>,
        res: &EssSupResult<S>,
        construction: Construction,
        spent: u64,
    ) -> Result<Verdict> {
        let w = self.witness(phi, res, construction);
        let shadow = self.strong_shadow(phi, res, &w)?;
        let mut verdict = Verdict::violated(Witness::WeakViolation(w), spent, self.cfg.describe());
        verdict.evidence.push(shadow);
        Ok(verdict)
    }

    fn run(&self) -> Result<Verdict> {
        let cfg = self.cfg;
        let mesh = Arc::new(build_kuhn_mesh(self.d.n(), cfg.k)?);
        let mut spent = 0u64;

        spent += 1;
        if let Some((phi, res)) = self.check(PwAffineMap::zero(mesh.clone(), self.d.m()))? {
            return self.report(&phi, &res, Construction::Map { map: phi.to_json() }, spent);
        }

        // In one dimension laminates vanish on the boundary.
        if self.d.n() == 1 && cfg.k.is_multiple_of(4) {
            let a_exact = self.a.to_rational_point()?;
            let profile = ZigZagProfile::from_half_period_count(1)?;
            for cand in laminate_candidates(self.d, &a_exact, true, true) {
                if cand.grad_norm() > cfg.k_search {
                    continue;
                }
                spent += 1;
                let predicted = cand.predicted_ess_sup(self.d, &self.a)?;
                if !beats(&self.fa, &predicted, &S::zero()) {
                    continue;
                }
                let id = cand.construction(1, profile.clone());
                if let Some((phi, res)) = self.check(id.build(1, cfg.k)?)? {
                    let construction = Construction::Family { id: id.id(), mesh_k: cfg.k };
                    return self.report(&phi, &res, construction, spent);
                }
            }
        }

        let cap = Scalar::to_f64(&cfg.k_search);
        let gen = RandomMaps::new(mesh.clone(), self.d.m(), cap, None);
        type Hit<S> = (PwAffineMap<S>, EssSupResult<S>);
        let outcomes: Vec<(Objective, Option<Hit<S>>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let map = gen.draw(&mut stream_rng(cfg.seed, t as u64))?;
                let obj = self.objective(&map)?;
                let hit = self.confirm(&map, &obj)?;
                Ok((obj, hit))
            })
            .collect::<Result<_>>()?;
        spent += cfg.trials as u64;
        if let Some((_, Some((phi, res)))) = outcomes.iter().find(|(_, hit)| hit.is_some()) {
            return self.report(phi, res, Construction::Map { map: phi.to_json() }, spent);
        }

        let mut order: Vec<usize> = (0..outcomes.len()).collect();
        order.sort_by(|&i, &j| outcomes[i].0.cmp(&outcomes[j].0).then(i.cmp(&j)));
        order.truncate(cfg.local_starts);
        let refined: Vec<(u64, Option<Hit<S>>)> = order
            .par_iter()
            .enumerate()
            .map(|(rank, &t)| {
                let start = gen.draw(&mut stream_rng(cfg.seed, t as u64))?;
                self.descend(&gen, start, outcomes[t].0, rank)
            })
            .collect::<Result<_>>()?;
        for (steps, hit) in refined {
            spent += steps;
            if let Some((phi, res)) = hit {
                return self.report(&phi, &res, Construction::Map { map: phi.to_json() }, spent);
            }
        }
        Ok(Verdict::no_violation(spent, cfg.describe()))
    }

    /// Coordinate descent on one interior value at a time with dyadic steps
    /// that halve after repeated failures.
    #[allow(clippy::type_complexity)]
    fn descend(
        &self,
        gen: &RandomMaps,
        mut current: PwAffineMap<f64>,
        mut obj: Objective,
        rank: usize,
    ) -> Result<(u64, Option<(PwAffineMap<S>, EssSupResult<S>)>)> {
        let interior = gen.interior();
        if interior.is_empty() || self.cfg.local_steps == 0 {
            return Ok((0, None));
        }
        let cap = Scalar::to_f64(&self.cfg.k_search);
        let m = current.m();
        let mut rng = stream_rng(self.cfg.seed, (1 << 40) + rank as u64);
        let mut h = 0.125;
        let mut failures = 0;
        let mut evals = 0u64;
        for _ in 0..self.cfg.local_steps {
            let node = interior[rng.random_range(0..interior.len())];
            let c = rng.random_range(0..m);
            let mut moved = false;
            for sign in [1.0, -1.0] {
                let mut values = current.nodal_values().to_vec();
                values[node * m + c] += sign * h;
                let trial = PwAffineMap::new(gen.mesh().clone(), m, values)?;
                if trial.grad_sup_norm() > cap {
                    continue;
                }
                evals += 1;
                let t_obj = self.objective(&trial)?;
                if t_obj.cmp(&obj) == Ordering::Less {
                    if let Some(hit) = self.confirm(&trial, &t_obj)? {
                        return Ok((evals, Some(hit)));
                    }
                    current = trial;
                    obj = t_obj;
                    moved = true;
                    break;
                }
            }
            if !moved {
                failures += 1;
                if failures % 8 == 0 {
                    h /= 2.0;
                    if h < 1.0 / 4096.0 {
                        current = scaled(&current, 0.5)?;
                        obj = self.objective(&current)?;
                        h = 0.125;
                    }
                }
            }
        }
        Ok((evals, None))
    }
}

trait ToRationalPoint {
    fn to_rational_point(&self) -> Result<GradientPoint<Rational>>;
}

impl<S: Scalar> ToRationalPoint for GradientPoint<S> {
    fn to_rational_point(&self) -> Result<GradientPoint<Rational>> {
        let entries = self
            .entries()
            .iter()
            .map(|v| v.to_rational().ok_or_else(|| Error::invalid("A", "non-finite entry")))
            .collect::<Result<Vec<_>>>()?;
        GradientPoint::new(entries, self.n(), self.m())
    }
}

fn run_in<S: Scalar>(d: &Density, a: &GradientPoint<Rational>, cfg: &SearchConfig) -> Result<Verdict> {
    let a_s: GradientPoint<S> = a.to_scalar();
    let a_f: GradientPoint<f64> = a.to_scalar();
    let fa = d.eval_slice(a_s.entries())?;
    let fa_f = d.eval_slice(a_f.entries())?;
    Search { d, a: a_s, a_f, fa, fa_f, cfg }.run()
}

/// Searches for a zero-boundary piecewise-affine `phi` with
/// `ess sup_Q f(A + D phi) < f(A)`.
///
/// Candidates, in order: the zero map, zero-boundary laminates when `n = 1`,
/// random dyadic maps under the gradient cap, then coordinate descent from
/// the best random maps. The first violation in that order is reported; a
/// `no_violation_within_budget` verdict proves nothing.
pub fn falsify_weak_mqc(d: &Density, a: &GradientPoint<Rational>, cfg: &SearchConfig) -> Result<Verdict> {
    if a.n() != d.n() || a.m() != d.m() {
        return Err(Error::DimensionMismatch { context: "A vs density shape", expected: d.dim(), got: a.entries().len() });
    }
    if cfg.k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    if cfg.k_search <= Rational::zero() {
        return Err(Error::invalid("K_search", "must be positive"));
    }
    match cfg.mode {
        ArithmeticMode::Rational => run_in::<Rational>(d, a, cfg),
        ArithmeticMode::Float => run_in::<f64>(d, a, cfg),
    }
}
