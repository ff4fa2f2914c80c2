//! Bounded search for maps with small boundary values, bounded gradient and
//! `f(A) > ess sup f(A + D phi) + eps_def`, repeated along a decreasing
//! sequence of boundary bounds.

use num::traits::{One, Zero};
use num::BigInt;
use rayon::prelude::*;

use super::candidates::{boundary_scale_for, laminate_candidates, LaminateCandidate, RandomMaps};
use super::{beats, format_rationals, stream_rng, Family, NORM_CONVENTIONS};
use crate::constructions::ZigZagProfile;
use crate::density::{Density, GradientPoint};
use crate::error::{Error, Result};
use crate::functionals::{ess_sup_shifted, simplex_values};
use crate::mesh::{build_kuhn_mesh, PwAffineMap, MAX_SIMPLICES};
use crate::scalar::{ArithmeticMode, Rational, Scalar};
use crate::verdict::{Construction, MqcWitness, Verdict, Witness};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct StrongConfig {
    pub eps_def: Rational,
    /// Gradient bound `K` (max-abs-entry norm).
    pub k_bound: Rational,
    /// Strictly decreasing boundary bounds.
    pub deltas: Vec<Rational>,
    pub families: Vec<Family>,
    /// Random small-boundary maps per delta.
    pub random_trials: usize,
    /// Mesh for the random maps.
    pub random_k: usize,
    pub include_zero_map: bool,
    pub seed: u64,
    pub mode: ArithmeticMode,
}

/// `2^-1, ..., 2^-count`.
pub fn dyadic_deltas(count: u32) -> Vec<Rational> {
    (1..=count)
        .map(|j| Rational::new(BigInt::one(), BigInt::from(2).pow(j)))
        .collect()
}

impl Default for StrongConfig {
    fn default() -> Self {
        StrongConfig {
            eps_def: Rational::new(1.into(), 2.into()),
            k_bound: Rational::one(),
            deltas: dyadic_deltas(10),
            families: Family::ALL.to_vec(),
            random_trials: 256,
            random_k: 8,
            include_zero_map: true,
            seed: 0,
            mode: ArithmeticMode::Rational,
        }
    }
}

impl StrongConfig {
    pub fn describe(&self) -> String {
        let fams: Vec<&str> = self.families.iter().map(|f| f.as_str()).collect();
        format!(
            "eps_def={}, K={}, deltas=[{}], families=[{}], {} random maps per delta on k={}, zero map {}, seed {}",
            self.eps_def,
            self.k_bound,
            format_rationals(&self.deltas),
            fams.join(","),
            self.random_trials,
            self.random_k,
            if self.include_zero_map { "included" } else { "excluded" },
            self.seed
        )
    }

    fn validate(&self) -> Result<()> {
        if self.eps_def <= Rational::zero() {
            return Err(Error::invalid("eps_def", "must be positive"));
        }
        if self.k_bound <= Rational::zero() {
            return Err(Error::invalid("K", "must be positive"));
        }
        if self.deltas.is_empty() {
            return Err(Error::invalid("deltas", "must be non-empty"));
        }
        if self.deltas.iter().any(|d| *d <= Rational::zero()) {
            return Err(Error::invalid("deltas", "must be positive"));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("deltas", "must be strictly decreasing"));
        }
        if self.families.is_empty() {
            return Err(Error::invalid("families", "must be non-empty"));
        }
        if self.random_k == 0 {
            return Err(Error::invalid("random_k", "must be positive"));
        }
        Ok(())
    }
}

/// Smallest `q >= 1` with `(1/(2q)) |b| / 4 <= delta`, i.e. the largest
/// profile `eps = 1/(2q)` whose laminate boundary sup stays within `delta`.
/// In one dimension the boundary values vanish and `q = 1`.
pub(crate) fn half_period_count(n: usize, amplitude_sq: &Rational, delta: &Rational) -> u64 {
    if n == 1 {
        return 1;
    }
    let fits = |q: u64| Rational::from_int(64) * Rational::from_int(q as i64).pow(2) * delta * delta >= *amplitude_sq;
    let guess = (Scalar::to_f64(amplitude_sq).sqrt() / (8.0 * Scalar::to_f64(delta))).ceil().max(1.0) as u64;
    let mut q = guess.max(1);
    while q > 1 && fits(q - 1) {
        q -= 1;
    }
    while !fits(q) {
        q += 1;
    }
    q
}

struct Strong<'a, S: Scalar> {
    d: &'a Density,
    a: GradientPoint<S>,
    a_f: GradientPoint<f64>,
    fa: S,
    fa_f: f64,
    cfg: &'a StrongConfig,
    eps: S,
    k_bound: S,
}

impl<S: Scalar> Strong<'_, S> {
    fn qualifies(&self, phi: &PwAffineMap<S>, delta: &Rational) -> Result<Option<MqcWitness>> {
        let delta_s = S::from_rational(delta);
        let bsq = phi.boundary_sup_sq();
        if bsq > delta_s.clone() * delta_s.clone() {
            return Ok(None);
        }
        let grad = phi.grad_sup_norm();
        if grad > self.k_bound {
            return Ok(None);
        }
        let res = ess_sup_shifted(self.d, &self.a, phi)?;
        if !beats(&self.fa, &res.value, &self.eps) {
            return Ok(None);
        }
        Ok(Some(MqcWitness {
            density_id: self.d.id().to_string(),
            n: self.d.n(),
            m: self.d.m(),
            a: self.a.to_json(),
            construction: Construction::Map { map: serde_json::Value::Null },
            ess_sup: res.value.to_json(),
            f_at_a: self.fa.to_json(),
            argmax_simplex: res.argmax_simplex,
            boundary_sup: phi.boundary_sup(),
            boundary_sup_squared: bsq.to_json(),
            grad_norm: grad.to_json(),
            norm_conventions: NORM_CONVENTIONS.to_string(),
            epsilon_def: Some(self.eps.to_json()),
            k_bound: Some(self.k_bound.to_json()),
            delta: Some(delta_s.to_json()),
            rng_seed: self.cfg.seed,
            arithmetic_mode: S::MODE,
        }))
    }

    fn laminate_witness(&self, cand: &LaminateCandidate, delta: &Rational) -> Result<Option<MqcWitness>> {
        let (n, m) = (self.d.n(), self.d.m());
        let q = half_period_count(n, &cand.amplitude_sq(), delta);
        let k = 4 * q as usize;
        let simplices = (k as u128).pow(n as u32) * (1..=n as u128).product::<u128>();
        if simplices > MAX_SIMPLICES {
            return Ok(None);
        }
        let id = cand.construction(n, ZigZagProfile::from_half_period_count(q)?);
        let phi: PwAffineMap<S> = id.build(n, k)?;
        debug_assert_eq!(phi.m(), m);
        Ok(self.qualifies(&phi, delta)?.map(|mut w| {
            w.construction = Construction::Family { id: id.id(), mesh_k: k };
            w
        }))
    }

    fn random_witness(&self, j: usize, delta: &Rational) -> Result<(u64, Option<MqcWitness>)> {
        let cfg = self.cfg;
        let mesh = Arc::new(build_kuhn_mesh(self.d.n(), cfg.random_k)?);
        let beta = boundary_scale_for(delta, self.d.m());
        let gen = RandomMaps::new(mesh, self.d.m(), Scalar::to_f64(&cfg.k_bound), Some(beta));
        let eps_f = Scalar::to_f64(&cfg.eps_def);
        let salt = (j as u64 + 1) << 32;
        let hits: Vec<Option<MqcWitness>> = (0..cfg.random_trials)
            .into_par_iter()
            .map(|t| {
                let map = gen.draw(&mut stream_rng(cfg.seed, salt + t as u64))?;
                let values = simplex_values(self.d, &self.a_f, &map)?;
                let ess = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // loose float screen, then the exact test
                if self.fa_f - ess - eps_f < -1e-6 {
                    return Ok(None);
                }
                let phi: PwAffineMap<S> = map.to_scalar()?;
                Ok(self.qualifies(&phi, delta)?.map(|mut w| {
                    w.construction = Construction::Map { map: phi.to_json() };
                    w
                }))
            })
            .collect::<Result<_>>()?;
        Ok((cfg.random_trials as u64, hits.into_iter().flatten().next()))
    }

    fn run(&self) -> Result<Verdict> {
        let cfg = self.cfg;
        let a_exact = rational_point(&self.a)?;
        let zz = cfg.families.contains(&Family::ZigZag);
        let lam = cfg.families.contains(&Family::Laminate);
        let mut laminates = Vec::new();
        let mut spent = 0u64;
        for cand in laminate_candidates(self.d, &a_exact, zz, lam) {
            if S::from_rational(&cand.grad_norm()) > self.k_bound {
                continue;
            }
            spent += 1;
            if beats(&self.fa, &cand.predicted_ess_sup(self.d, &self.a)?, &self.eps) {
                laminates.push(cand);
            }
        }

        let mut evidence = Vec::new();
        for (j, delta) in cfg.deltas.iter().enumerate() {
            let mut found = None;
            if cfg.include_zero_map {
                spent += 1;
                let zero = PwAffineMap::zero(Arc::new(build_kuhn_mesh(self.d.n(), 1)?), self.d.m());
                found = self.qualifies(&zero, delta)?.map(|mut w| {
                    w.construction = Construction::Map { map: zero.to_json() };
                    w
                });
            }
            for cand in &laminates {
                if found.is_some() {
                    break;
                }
                spent += 1;
                found = self.laminate_witness(cand, delta)?;
            }
            if found.is_none() && cfg.families.contains(&Family::Random) {
                let (used, hit) = self.random_witness(j, delta)?;
                spent += used;
                found = hit;
            }
            match found {
                Some(w) => evidence.push(Witness::StrongFalsification(w)),
                None => {
                    let mut v = Verdict::no_violation(spent, cfg.describe());
                    v.note = format!(
                        "{}; no witness for delta={} after witnesses for {} larger deltas",
                        v.note, delta, j
                    );
                    return Ok(v);
                }
            }
        }
        let last = evidence.last().cloned().expect("deltas are non-empty");
        let mut v = Verdict::violated(last, spent, cfg.describe());
        v.note = format!(
            "witness for every delta in the finite sequence ({} values); evidence that no delta works, not a proof",
            evidence.len()
        );
        v.evidence = evidence;
        Ok(v)
    }
}

fn rational_point<S: Scalar>(a: &GradientPoint<S>) -> Result<GradientPoint<Rational>> {
    let entries = a
        .entries()
        .iter()
        .map(|v| v.to_rational().ok_or_else(|| Error::invalid("A", "non-finite entry")))
        .collect::<Result<Vec<_>>>()?;
    GradientPoint::new(entries, a.n(), a.m())
}

fn run_in<S: Scalar>(d: &Density, a: &GradientPoint<Rational>, cfg: &StrongConfig) -> Result<Verdict> {
    let a_s: GradientPoint<S> = a.to_scalar();
    let a_f: GradientPoint<f64> = a.to_scalar();
    let fa = d.eval_slice(a_s.entries())?;
    let fa_f = d.eval_slice(a_f.entries())?;
    Strong {
        d,
        a: a_s,
        a_f,
        fa,
        fa_f,
        cfg,
        eps: S::from_rational(&cfg.eps_def),
        k_bound: S::from_rational(&cfg.k_bound),
    }
    .run()
}

/// Searches, for each `delta` in turn, for a map with
/// `||D phi|| <= K`, `max_dQ |phi| <= delta` and
/// `f(A) > ess sup_Q f(A + D phi) + eps_def`.
///
/// Returns `violated` only when every delta admits a witness; the verdict
/// then carries one witness per delta as evidence. The search stops at the
/// first delta without a witness.
pub fn falsify_strong_mqc(d: &Density, a: &GradientPoint<Rational>, cfg: &StrongConfig) -> Result<Verdict> {
    if a.n() != d.n() || a.m() != d.m() {
        return Err(Error::DimensionMismatch { context: "A vs density shape", expected: d.dim(), got: a.entries().len() });
    }
    cfg.validate()?;
    match cfg.mode {
        ArithmeticMode::Rational => run_in::<Rational>(d, a, cfg),
        ArithmeticMode::Float => run_in::<f64>(d, a, cfg),
    }
}
