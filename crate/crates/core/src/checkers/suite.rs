//! Cross-checks the three notions on scalar-case densities (`n = 1` or
//! `m = 1`), where for lower semicontinuous `f` they coincide. Any
//! disagreement the searches expose is flagged.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::{falsify_strong_mqc, falsify_weak_mqc, stream_rng, verify_witness, SearchConfig, StrongConfig};
use crate::density::{sublevel_midpoint_convexity, Density, GradientPoint, SampleBudget};
use crate::error::{Error, Result};
use crate::scalar::{ArithmeticMode, Rational, Scalar};
use crate::verdict::{Verdict, VerdictStatus, Witness};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSuiteConfig {
    /// Sublevel thresholds; defaults to the indicator values and their
    /// midpoint, or to sampled values of `f`.
    pub s_values: Option<Vec<Rational>>,
    /// Total convexity pairs, split across the thresholds.
    pub convexity_pairs: usize,
    pub sampled_a: usize,
    /// Half-width of the box from which off-set base points are drawn.
    pub a_box_radius: Rational,
    pub weak: SearchConfig,
    pub strong: StrongConfig,
    pub seed: u64,
    pub mode: ArithmeticMode,
}

impl Default for ScalarSuiteConfig {
    fn default() -> Self {
        ScalarSuiteConfig {
            s_values: None,
            convexity_pairs: 1000,
            sampled_a: 1000,
            a_box_radius: Rational::from_int(2),
            weak: SearchConfig { trials: 16, local_starts: 1, local_steps: 16, ..SearchConfig::default() },
            strong: StrongConfig { random_trials: 8, ..StrongConfig::default() },
            seed: 0,
            mode: ArithmeticMode::Rational,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteStatus {
    Consistent,
    /// A nonconvex sublevel set was found but neither Morrey search found a
    /// violation; search incompleteness, not a contradiction.
    InconclusiveTension,
    Inconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityEntry {
    pub s: Value,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointEntry {
    pub a: Vec<Value>,
    pub f_at_a: Value,
    pub weak: VerdictStatus,
    pub strong: VerdictStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalarSuiteReport {
    pub density_id: String,
    pub n: usize,
    pub m: usize,
    pub status: SuiteStatus,
    pub convexity_pairs_tested: u64,
    pub convexity: Vec<ConvexityEntry>,
    pub sampled_a: usize,
    pub weak_violations: usize,
    pub strong_falsifications: usize,
    /// Points at which a Morrey search found something, in sampling order.
    pub flagged_points: Vec<PointEntry>,
    pub inconsistencies: Vec<String>,
    pub tensions: Vec<String>,
    pub weak_budget: String,
    pub strong_budget: String,
}

fn default_levels(d: &Density, seed: u64) -> Result<Vec<Rational>> {
    if let Some(ind) = d.as_indicator() {
        let mid = (ind.on_value() + ind.off_value()) / Rational::from_int(2);
        return Ok(vec![ind.on_value().clone(), mid, ind.off_value().clone()]);
    }
    let mut rng = stream_rng(seed, 1 << 48);
    let mut levels = Vec::new();
    for _ in 0..9 {
        let x: Vec<Rational> = (0..d.dim()).map(|_| Rational::ratio(rng.random_range(-64..=64), 32)).collect();
        let v: Rational = d.eval_slice(&x)?;
        if !levels.contains(&v) {
            levels.push(v);
        }
    }
    levels.sort();
    Ok(levels)
}

fn sample_points(d: &Density, cfg: &ScalarSuiteConfig) -> Vec<Vec<Rational>> {
    let mut rng = stream_rng(cfg.seed, 1 << 49);
    let dyadic = |rng: &mut rand_chacha::ChaCha8Rng| Rational::ratio(rng.random_range(-1024..=1024), 1024);
    (0..cfg.sampled_a)
        .map(|i| match d.as_indicator() {
            Some(ind) if i % 2 == 0 => {
                let segs = ind.set().segments();
                let seg = &segs[rng.random_range(0..segs.len())];
                let t = Rational::ratio(rng.random_range(0..=1024), 1024);
                seg.a.iter().zip(&seg.b).map(|(a, b)| a + &t * (b - a)).collect()
            }
            _ => (0..d.dim()).map(|_| dyadic(&mut rng) * &cfg.a_box_radius).collect(),
        })
        .collect()
}

/// Sublevel convexity over a grid of thresholds, then weak and strong
/// searches at sampled base points, then a consistency verdict.
pub fn scalar_equivalence_suite(d: &Density, cfg: &ScalarSuiteConfig) -> Result<ScalarSuiteReport> {
    if !d.is_scalar_case() {
        return Err(Error::invalid("density", format!("{} is {}x{}; need n = 1 or m = 1", d.id(), d.n(), d.m())));
    }
    if !d.claimed_lsc() {
        return Err(Error::invalid("density", format!("{} is not claimed lower semicontinuous", d.id())));
    }
    if cfg.convexity_pairs == 0 {
        return Err(Error::invalid("convexity_pairs", "must be positive"));
    }
    let levels = match &cfg.s_values {
        Some(v) if !v.is_empty() => v.clone(),
        Some(_) => return Err(Error::invalid("s_values", "must be non-empty")),
        None => default_levels(d, cfg.seed)?,
    };

    let mut convexity = Vec::new();
    let mut pairs_tested = 0u64;
    let mut nonconvex_midpoint: Option<Vec<Rational>> = None;
    for (i, s) in levels.iter().enumerate() {
        let share = cfg.convexity_pairs / levels.len() + usize::from(i < cfg.convexity_pairs % levels.len());
        let verdict = sublevel_midpoint_convexity(d, s, &SampleBudget::new(share.max(1)), cfg.seed, cfg.mode)?;
        pairs_tested += verdict.budget_spent;
        if let (None, Some(w)) = (&nonconvex_midpoint, verdict.witness.as_ref().and_then(Witness::sublevel)) {
            let mid = w.midpoint.iter().map(Rational::from_json).collect::<Result<Vec<_>>>()?;
            nonconvex_midpoint = Some(mid);
        }
        convexity.push(ConvexityEntry { s: cfg_value(s, cfg.mode), verdict });
    }

    let mut points = sample_points(d, cfg);
    if let Some(mid) = &nonconvex_midpoint {
        points.insert(0, mid.clone());
    }
    let weak_cfg = SearchConfig { seed: cfg.seed, mode: cfg.mode, ..cfg.weak.clone() };
    let strong_cfg = StrongConfig { seed: cfg.seed, mode: cfg.mode, ..cfg.strong.clone() };
    let outcomes: Vec<(Vec<Rational>, Verdict, Verdict)> = points
        .into_par_iter()
        .map(|entries| {
            let a = GradientPoint::new(entries.clone(), d.n(), d.m())?;
            let weak = falsify_weak_mqc(d, &a, &weak_cfg)?;
            let strong = falsify_strong_mqc(d, &a, &strong_cfg)?;
            Ok((entries, weak, strong))
        })
        .collect::<Result<_>>()?;

    let quasiconvex_by_sampling = nonconvex_midpoint.is_none();
    let mut inconsistencies = Vec::new();
    let mut flagged = Vec::new();
    let (mut weak_hits, mut strong_hits) = (0, 0);
    for (entries, weak, strong) in &outcomes {
        if !weak.is_violated() && !strong.is_violated() {
            continue;
        }
        let a_text = entries.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        let fa: Rational = d.eval_slice(entries)?;
        flagged.push(PointEntry {
            a: entries.iter().map(|v| cfg_value(v, cfg.mode)).collect(),
            f_at_a: cfg_value(&fa, cfg.mode),
            weak: weak.status,
            strong: strong.status,
        });
        if weak.is_violated() {
            weak_hits += 1;
            if quasiconvex_by_sampling {
                inconsistencies.push(format!("quasiconvex by sampling but weak violation at A=({a_text})"));
            }
            for w in weak.witness.iter().chain(&weak.evidence) {
                if !verify_witness(d, w)?.ok() {
                    inconsistencies.push(format!("weak witness at A=({a_text}) does not verify"));
                }
            }
        }
        if strong.is_violated() {
            strong_hits += 1;
            if quasiconvex_by_sampling {
                inconsistencies.push(format!("quasiconvex by sampling but strong falsification at A=({a_text})"));
            }
        }
    }
    let mut tensions = Vec::new();
    if !quasiconvex_by_sampling && weak_hits == 0 && strong_hits == 0 {
        tensions.push(
            "nonconvex sublevel set found but no weak or strong violation within budget \
             (search incompleteness, not a contradiction)"
                .to_string(),
        );
    }
    let status = if !inconsistencies.is_empty() {
        SuiteStatus::Inconsistent
    } else if !tensions.is_empty() {
        SuiteStatus::InconclusiveTension
    } else {
        SuiteStatus::Consistent
    };
    Ok(ScalarSuiteReport {
        density_id: d.id().to_string(),
        n: d.n(),
        m: d.m(),
        status,
        convexity_pairs_tested: pairs_tested,
        convexity,
        sampled_a: outcomes.len(),
        weak_violations: weak_hits,
        strong_falsifications: strong_hits,
        flagged_points: flagged,
        inconsistencies,
        tensions,
        weak_budget: weak_cfg.describe(),
        strong_budget: strong_cfg.describe(),
    })
}

fn cfg_value(v: &Rational, mode: ArithmeticMode) -> Value {
    match mode {
        ArithmeticMode::Rational => v.to_json(),
        ArithmeticMode::Float => Scalar::to_f64(v).to_json(),
    }
}
