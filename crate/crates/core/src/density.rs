//! Pointwise-defined densities on gradient space, segment-union indicator
//! sets, and the sampled sublevel-set convexity check.
//!
//! A [`Density`] is always built from a total rule that can be evaluated at
//! every point. There is no way to construct one from an "almost everywhere"
//! description: changing the value on a null set changes the density.

use std::fmt;
use std::sync::Arc;

use num::traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalar::{convert, parse_rational_list, ArithmeticMode, Rational, Scalar, FLOAT_TOLERANCE};
use crate::verdict::{SublevelWitness, Verdict, Witness};

/// A point of gradient space `R^{n x m}`.
///
/// Viewed as an `n x m` matrix whose column `c` is the gradient of the
/// `c`-th component of a map `Q -> R^m`. Entries are stored column by column
/// (component-major), so `P = (P_1, P_2)` splits into contiguous halves.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPoint<S> {
    entries: Vec<S>,
    n: usize,
    m: usize,
}

impl<S: Scalar> GradientPoint<S> {
    pub fn new(entries: Vec<S>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("shape", "n and m must be positive"));
        }
        if entries.len() != n * m {
            return Err(Error::DimensionMismatch {
                context: "gradient point",
                expected: n * m,
                got: entries.len(),
            });
        }
        Ok(GradientPoint { entries, n, m })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        GradientPoint {
            entries: vec![S::zero(); n * m],
            n,
            m,
        }
    }

    pub fn entries(&self) -> &[S] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<S> {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry `(row, col)` of the `n x m` matrix, i.e. `d phi_col / d x_row`.
    pub fn get(&self, row: usize, col: usize) -> &S {
        &self.entries[col * self.n + row]
    }

    /// The `c`-th column: the gradient of component `c`.
    pub fn component(&self, c: usize) -> &[S] {
        &self.entries[c * self.n..(c + 1) * self.n]
    }

    pub fn to_matrix(&self) -> Vec<Vec<S>> {
        (0..self.n)
            .map(|row| (0..self.m).map(|col| self.get(row, col).clone()).collect())
            .collect()
    }

    pub fn from_matrix(rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("matrix", "ragged rows"));
        }
        let mut entries = Vec::with_capacity(n * m);
        for col in 0..m {
            for row in rows {
                entries.push(row[col].clone());
            }
        }
        Self::new(entries, n, m)
    }

    /// `self + delta`, with `delta` flattened the same way.
    pub fn shifted(&self, delta: &[S]) -> Result<Self> {
        if delta.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                context: "gradient shift",
                expected: self.entries.len(),
                got: delta.len(),
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(delta)
            .map(|(a, b)| a.clone() + b.clone())
            .collect();
        Ok(GradientPoint { entries, n: self.n, m: self.m })
    }

    pub fn to_json(&self) -> Vec<Value> {
        self.entries.iter().map(Scalar::to_json).collect()
    }
}

impl GradientPoint<Rational> {
    pub fn to_scalar<T: Scalar>(&self) -> GradientPoint<T> {
        GradientPoint {
            entries: convert(&self.entries),
            n: self.n,
            m: self.m,
        }
    }

    /// Parses a comma-separated flat list.
    pub fn parse(input: &str, n: usize, m: usize) -> Result<Self> {
        let entries = parse_rational_list(input).map_err(|e| Error::invalid("A", e.to_string()))?;
        Self::new(entries, n, m).map_err(|e| Error::invalid("A", e.to_string()))
    }
}

/// One closed segment `[a, b]`; `a == b` is a degenerate single point.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub a: Vec<Rational>,
    pub b: Vec<Rational>,
    af: Vec<f64>,
    bf: Vec<f64>,
}

impl Segment {
    fn new(a: Vec<Rational>, b: Vec<Rational>) -> Self {
        let af = convert(&a);
        let bf = convert(&b);
        Segment { a, b, af, bf }
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    pub fn midpoint(&self) -> Vec<Rational> {
        let two = Rational::from_int(2);
        self.a
            .iter()
            .zip(&self.b)
            .map(|(x, y)| (x + y) / &two)
            .collect()
    }
}

/// Squared Euclidean distance from `x` to the closed segment `[a, b]`.
pub fn point_segment_distance_sq<S: Scalar>(x: &[S], a: &[S], b: &[S]) -> S {
    let mut dd = S::zero();
    let mut wd = S::zero();
    for i in 0..x.len() {
        let d = b[i].clone() - a[i].clone();
        let w = x[i].clone() - a[i].clone();
        wd = wd + w * d.clone();
        dd = dd + d.clone() * d;
    }
    let t = if dd.is_zero() || wd <= S::zero() {
        S::zero()
    } else if wd >= dd {
        S::one()
    } else {
        wd / dd
    };
    let mut acc = S::zero();
    for i in 0..x.len() {
        let p = a[i].clone() + t.clone() * (b[i].clone() - a[i].clone());
        let r = x[i].clone() - p;
        acc = acc + r.clone() * r;
    }
    acc
}

/// A finite union of closed segments in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentUnionSet {
    dim: usize,
    segments: Vec<Segment>,
}

impl SegmentUnionSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(SegmentUnionSet { dim, segments: Vec::new() })
    }

    /// Adds `[a, b]`; rejects `a == b` (see [`Self::with_point`]).
    pub fn with_segment(mut self, a: Vec<Rational>, b: Vec<Rational>) -> Result<Self> {
        self.check_dim(&a)?;
        self.check_dim(&b)?;
        if a == b {
            return Err(Error::DegenerateSegment);
        }
        self.segments.push(Segment::new(a, b));
        Ok(self)
    }

    /// Adds a single point as a degenerate segment.
    pub fn with_point(mut self, p: Vec<Rational>) -> Result<Self> {
        self.check_dim(&p)?;
        self.segments.push(Segment::new(p.clone(), p));
        Ok(self)
    }

    fn check_dim(&self, p: &[Rational]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "segment endpoint",
                expected: self.dim,
                got: p.len(),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn has_degenerate(&self) -> bool {
        self.segments.iter().any(Segment::is_degenerate)
    }

    /// Distinct segment endpoints in first-seen order.
    pub fn vertices(&self) -> Vec<Vec<Rational>> {
        let mut out: Vec<Vec<Rational>> = Vec::new();
        for s in &self.segments {
            for p in [&s.a, &s.b] {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        }
        out
    }

    /// Squared distance from `x` to the set.
    pub fn distance_sq<S: Scalar>(&self, x: &[S]) -> Result<S> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "segment distance",
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut best: Option<S> = None;
        for seg in &self.segments {
            let d = point_segment_distance_sq(x, &convert::<S>(&seg.a), &convert::<S>(&seg.b));
            best = Some(match best {
                Some(b) if b <= d => b,
                _ => d,
            });
        }
        best.ok_or_else(|| Error::invalid("set", "empty segment union"))
    }

    fn distance_sq_f64(&self, x: &[f64]) -> f64 {
        self.segments
            .iter()
            .map(|s| point_segment_distance_sq(x, &s.af, &s.bf))
            .fold(f64::INFINITY, f64::min)
    }

    fn within_exact(&self, x: &[Rational], tol_sq: &Rational) -> bool {
        self.segments
            .iter()
            .any(|s| point_segment_distance_sq(x, &s.a, &s.b) <= *tol_sq)
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.segments
                .iter()
                .map(|s| {
                    json!([
                        s.a.iter().map(Scalar::to_json).collect::<Vec<_>>(),
                        s.b.iter().map(Scalar::to_json).collect::<Vec<_>>()
                    ])
                })
                .collect(),
        )
    }
}

/// Euclidean distance from `x` to the set (float).
pub fn segment_distance(set: &SegmentUnionSet, x: &[f64]) -> Result<f64> {
    set.distance_sq(x).map(f64::sqrt)
}

/// A total evaluation rule for a density. Implementations must be pure.
pub trait PointwiseRule: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    fn eval_f64(&self, x: &[f64]) -> f64;

    /// Exact evaluation; `None` when the rule has no exact form.
    fn eval_exact(&self, _x: &[Rational]) -> Option<Rational> {
        None
    }

    /// Least upper bound of the rule over all of gradient space, if known.
    fn supremum(&self) -> Option<Rational> {
        None
    }

    fn as_indicator(&self) -> Option<&IndicatorDensity> {
        None
    }

    /// Rule-specific descriptor fields.
    fn describe(&self) -> Value {
        json!({ "kind": self.label() })
    }
}

/// `on_value` within distance `tolerance` of a segment union, `off_value`
/// elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorDensity {
    set: SegmentUnionSet,
    on_value: Rational,
    off_value: Rational,
    exact_tolerance: Rational,
    float_tolerance: f64,
    on_f: f64,
    off_f: f64,
    exact_tol_sq: Rational,
}

impl IndicatorDensity {
    pub fn new(set: SegmentUnionSet, on_value: Rational, off_value: Rational) -> Result<Self> {
        if on_value >= off_value {
            return Err(Error::invalid(
                "on_value",
                "must be strictly below off_value for lower semicontinuity",
            ));
        }
        if set.segments.is_empty() {
            return Err(Error::invalid("set", "empty segment union"));
        }
        Ok(IndicatorDensity {
            on_f: on_value.to_f64(),
            off_f: off_value.to_f64(),
            set,
            on_value,
            off_value,
            exact_tolerance: Rational::zero(),
            float_tolerance: FLOAT_TOLERANCE,
            exact_tol_sq: Rational::zero(),
        })
    }

    /// Overrides the membership tolerances of both modes.
    pub fn with_tolerances(mut self, exact: Rational, float: f64) -> Result<Self> {
        if exact < Rational::zero() || float.is_nan() || float < 0.0 {
            return Err(Error::invalid("tolerance", "must be nonnegative"));
        }
        self.exact_tol_sq = &exact * &exact;
        self.exact_tolerance = exact;
        self.float_tolerance = float;
        Ok(self)
    }

    pub fn set(&self) -> &SegmentUnionSet {
        &self.set
    }

    pub fn on_value(&self) -> &Rational {
        &self.on_value
    }

    pub fn off_value(&self) -> &Rational {
        &self.off_value
    }

    pub fn tolerance(&self, mode: ArithmeticMode) -> f64 {
        match mode {
            ArithmeticMode::Rational => self.exact_tolerance.to_f64(),
            ArithmeticMode::Float => self.float_tolerance,
        }
    }

    /// Whether `x` counts as a point of the set in the given scalar mode.
    pub fn contains<S: Scalar>(&self, x: &[S]) -> Result<bool> {
        let on = S::from_rational(&self.on_value);
        Ok(S::eval_rule(self, x)? == on)
    }
}

impl PointwiseRule for IndicatorDensity {
    fn label(&self) -> String {
        "indicator".into()
    }

    fn eval_f64(&self, x: &[f64]) -> f64 {
        let tol = self.float_tolerance;
        if self.set.distance_sq_f64(x) <= tol * tol {
            self.on_f
        } else {
            self.off_f
        }
    }

    fn eval_exact(&self, x: &[Rational]) -> Option<Rational> {
        Some(if self.set.within_exact(x, &self.exact_tol_sq) {
            self.on_value.clone()
        } else {
            self.off_value.clone()
        })
    }

    fn supremum(&self) -> Option<Rational> {
        Some(self.off_value.clone())
    }

    fn as_indicator(&self) -> Option<&IndicatorDensity> {
        Some(self)
    }

    fn describe(&self) -> Value {
        json!({
            "on_value": self.on_value.to_json(),
            "off_value": self.off_value.to_json(),
            "tolerance": {
                "rational": self.exact_tolerance.to_json(),
                "float": self.float_tolerance,
            },
            "segments": self.set.to_json(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRule(pub Rational);

impl PointwiseRule for ConstantRule {
    fn label(&self) -> String {
        "constant".into()
    }

    fn eval_f64(&self, _x: &[f64]) -> f64 {
        self.0.to_f64()
    }

    fn eval_exact(&self, _x: &[Rational]) -> Option<Rational> {
        Some(self.0.clone())
    }

    fn supremum(&self) -> Option<Rational> {
        Some(self.0.clone())
    }

    fn describe(&self) -> Value {
        json!({ "kind": "constant", "value": self.0.to_json() })
    }
}

/// `peak` at a single point and `base` elsewhere. With `peak > base` this is
/// upper but not lower semicontinuous.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBump {
    center: Vec<Rational>,
    peak: Rational,
    base: Rational,
    center_f: Vec<f64>,
}

impl PointBump {
    pub fn new(center: Vec<Rational>, peak: Rational, base: Rational) -> Self {
        PointBump {
            center_f: convert(&center),
            center,
            peak,
            base,
        }
    }
}

impl PointwiseRule for PointBump {
    fn label(&self) -> String {
        "point_bump".into()
    }

    fn eval_f64(&self, x: &[f64]) -> f64 {
        let d2: f64 = x
            .iter()
            .zip(&self.center_f)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 <= FLOAT_TOLERANCE * FLOAT_TOLERANCE {
            self.peak.to_f64()
        } else {
            self.base.to_f64()
        }
    }

    fn eval_exact(&self, x: &[Rational]) -> Option<Rational> {
        Some(if x == self.center.as_slice() {
            self.peak.clone()
        } else {
            self.base.clone()
        })
    }

    fn supremum(&self) -> Option<Rational> {
        Some(if self.peak > self.base { self.peak.clone() } else { self.base.clone() })
    }

    fn describe(&self) -> Value {
        json!({
            "kind": "point_bump",
            "center": self.center.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "peak": self.peak.to_json(),
            "base": self.base.to_json(),
        })
    }
}

type FloatFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Float-only rule backed by a closure.
pub struct FnRule {
    label: String,
    f: Box<FloatFn>,
}

impl fmt::Debug for FnRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnRule").field("label", &self.label).finish()
    }
}

impl PointwiseRule for FnRule {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval_f64(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// A density `f: R^{n x m} -> R`.
#[derive(Debug, Clone)]
pub struct Density {
    id: String,
    n: usize,
    m: usize,
    rule: Arc<dyn PointwiseRule>,
    claimed_lsc: bool,
    description: String,
}

impl Density {
    pub fn from_rule(
        id: impl Into<String>,
        n: usize,
        m: usize,
        rule: Arc<dyn PointwiseRule>,
        claimed_lsc: bool,
        description: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("shape", "n and m must be positive"));
        }
        Ok(Density {
            id: id.into(),
            n,
            m,
            rule,
            claimed_lsc,
            description: description.into(),
        })
    }

    /// Indicator of a segment union living in `R^{n*m}`.
    pub fn indicator(
        id: impl Into<String>,
        n: usize,
        m: usize,
        indicator: IndicatorDensity,
        description: impl Into<String>,
    ) -> Result<Self> {
        if indicator.set.dim != n * m {
            return Err(Error::DimensionMismatch {
                context: "indicator set",
                expected: n * m,
                got: indicator.set.dim,
            });
        }
        Self::from_rule(id, n, m, Arc::new(indicator), true, description)
    }

    pub fn constant(value: Rational, n: usize, m: usize) -> Result<Self> {
        let id = format!("constant({value})");
        Self::from_rule(id, n, m, Arc::new(ConstantRule(value)), true, "constant density")
    }

    pub fn point_bump(center: Vec<Rational>, peak: Rational, base: Rational, n: usize, m: usize) -> Result<Self> {
        if center.len() != n * m {
            return Err(Error::DimensionMismatch {
                context: "bump center",
                expected: n * m,
                got: center.len(),
            });
        }
        let lsc = peak <= base;
        let id = format!("bump({peak} at {})", center.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
        Self::from_rule(id, n, m, Arc::new(PointBump::new(center, peak, base)), lsc, "single-point bump")
    }

    /// Float-only density from a closure defined at every point.
    pub fn from_fn(
        id: impl Into<String>,
        n: usize,
        m: usize,
        claimed_lsc: bool,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let id = id.into();
        let rule = FnRule { label: id.clone(), f: Box::new(f) };
        Self::from_rule(id, n, m, Arc::new(rule), claimed_lsc, "closure density")
    }

    /// Re-declares the `(n, m)` metadata of a density with the same `n*m`.
    pub fn with_shape(mut self, n: usize, m: usize) -> Result<Self> {
        if n * m != self.n * self.m || n == 0 || m == 0 {
            return Err(Error::invalid(
                "shape",
                format!("{n}x{m} incompatible with a density on R^{}", self.n * self.m),
            ));
        }
        self.n = n;
        self.m = m;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n * self.m
    }

    pub fn claimed_lsc(&self) -> bool {
        self.claimed_lsc
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn rule(&self) -> &dyn PointwiseRule {
        self.rule.as_ref()
    }

    pub fn as_indicator(&self) -> Option<&IndicatorDensity> {
        self.rule.as_indicator()
    }

    pub fn supremum(&self) -> Option<Rational> {
        self.rule.supremum()
    }

    pub fn is_scalar_case(&self) -> bool {
        self.n == 1 || self.m == 1
    }

    /// Evaluates at a flat point of length `n*m`.
    pub fn eval_slice<S: Scalar>(&self, x: &[S]) -> Result<S> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "density evaluation",
                expected: self.dim(),
                got: x.len(),
            });
        }
        S::eval_rule(self.rule.as_ref(), x)
    }

    /// JSON descriptor `{id, n, m, on_value, off_value, tolerance, segments}`
    /// for indicators; other rules report their own fields.
    pub fn descriptor(&self) -> Value {
        let mut v = json!({ "id": self.id, "n": self.n, "m": self.m });
        if let (Value::Object(dst), Value::Object(src)) = (&mut v, self.rule.describe()) {
            dst.extend(src);
            dst.insert("claimed_lsc".into(), Value::Bool(self.claimed_lsc));
        }
        v
    }
}

/// Evaluates `d` at `x`.
pub fn eval_density<S: Scalar>(d: &Density, x: &GradientPoint<S>) -> Result<S> {
    if x.n() * x.m() != d.dim() {
        return Err(Error::DimensionMismatch {
            context: "density evaluation",
            expected: d.dim(),
            got: x.n() * x.m(),
        });
    }
    d.eval_slice(x.entries())
}

fn q(p: i64) -> Rational {
    Rational::from_int(p)
}

fn fmt_point(p: &[Rational]) -> String {
    p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Indicator of the segment `AB` in `R^2`: 0 on the segment, 1 elsewhere.
/// Shape metadata defaults to `n=2, m=1`; use [`Density::with_shape`] for
/// `n=1, m=2`.
pub fn make_segment_indicator_2d(a: [Rational; 2], b: [Rational; 2]) -> Result<Density> {
    let id = format!("segment2d(({}),({}))", fmt_point(&a), fmt_point(&b));
    let set = SegmentUnionSet::new(2)?.with_segment(a.to_vec(), b.to_vec())?;
    let ind = IndicatorDensity::new(set, q(0), q(1))?;
    Density::indicator(id, 2, 1, ind, "indicator of a segment in R^2 (0 on the segment, 1 off it)")
}

/// Indicator of a single point in `R^2`, the degenerate segment case.
pub fn make_point_indicator_2d(p: [Rational; 2]) -> Result<Density> {
    let id = format!("point2d({})", fmt_point(&p));
    let set = SegmentUnionSet::new(2)?.with_point(p.to_vec())?;
    let ind = IndicatorDensity::new(set, q(0), q(1))?;
    Density::indicator(id, 2, 1, ind, "indicator of a point in R^2")
}

pub fn square_vertices() -> [Vec<Rational>; 4] {
    let o = vec![q(0), q(0), q(0), q(0)];
    let m = vec![q(1), q(0), q(0), q(0)];
    let n = vec![q(0), q(0), q(1), q(0)];
    let r = vec![q(1), q(0), q(1), q(0)];
    [o, m, n, r]
}

/// The square boundary `S = OM u ON u MR u NR` in `R^4` with
/// `M = (1,0,0,0)`, `N = (0,0,1,0)`, `R = (1,0,1,0)`; 0 on `S`, 1 elsewhere.
pub fn make_square_boundary_4d() -> Density {
    let [o, m, n, r] = square_vertices();
    let set = SegmentUnionSet::new(4)
        .and_then(|s| s.with_segment(o.clone(), m.clone()))
        .and_then(|s| s.with_segment(o, n.clone()))
        .and_then(|s| s.with_segment(m, r.clone()))
        .and_then(|s| s.with_segment(n, r))
        .expect("square vertices are distinct");
    let ind = IndicatorDensity::new(set, q(0), q(1)).expect("0 < 1");
    Density::indicator("square4d", 2, 2, ind, "indicator of the boundary of the square OMRN in R^4")
        .expect("dimension 4 = 2x2")
}

/// Resolves a gallery id: `square4d` or `segment2d(ax,ay,bx,by)` (brackets
/// are optional, `segment2d((0,0),(1,0))` also parses).
pub fn gallery_density(id: &str) -> Result<Density> {
    let id = id.trim();
    if id == "square4d" {
        return Ok(make_square_boundary_4d());
    }
    if let Some(rest) = id.strip_prefix("segment2d") {
        let cleaned: String = rest.chars().filter(|c| !matches!(c, '(' | ')' | ' ')).collect();
        let nums = parse_rational_list(&cleaned.replace(';', ","))
            .map_err(|e| Error::invalid("density", e.to_string()))?;
        if nums.len() != 4 {
            return Err(Error::invalid("density", "segment2d expects 4 coordinates"));
        }
        let a = [nums[0].clone(), nums[1].clone()];
        let b = [nums[2].clone(), nums[3].clone()];
        return if a == b { make_point_indicator_2d(a) } else { make_segment_indicator_2d(a, b) };
    }
    Err(Error::UnknownId(id.to_string()))
}

pub const GALLERY_IDS: &[&str] = &["square4d", "segment2d(a,b)"];

/// Draws points of gradient space for the sublevel sampler.
pub type PointSampler = Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<Rational> + Send + Sync>;

/// Number of independent sampler streams; fixed so results do not depend on
/// the thread count.
pub const SAMPLER_WORKERS: usize = 8;

#[derive(Clone)]
pub struct SampleBudget {
    /// Pairs to test, vertex pairs included.
    pub count: usize,
    /// Enumerate pairs of segment endpoints before random draws.
    pub vertex_pairs: bool,
    /// Half-width of the bounding box used for rejection sampling.
    pub box_radius: Rational,
    /// Attempts per requested point before a draw gives up.
    pub rejection_factor: usize,
    /// Caller-supplied sampler, tried before the built-in ones.
    pub sampler: Option<PointSampler>,
}

impl fmt::Debug for SampleBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleBudget")
            .field("count", &self.count)
            .field("vertex_pairs", &self.vertex_pairs)
            .field("box_radius", &self.box_radius)
            .field("rejection_factor", &self.rejection_factor)
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

impl SampleBudget {
    pub fn new(count: usize) -> Self {
        SampleBudget {
            count,
            vertex_pairs: true,
            box_radius: q(2),
            rejection_factor: 64,
            sampler: None,
        }
    }

    pub fn random_only(mut self) -> Self {
        self.vertex_pairs = false;
        self
    }
}

const DYADIC_BITS: u32 = 20;

fn dyadic_unit(rng: &mut ChaCha8Rng) -> Rational {
    let scale = 1i64 << DYADIC_BITS;
    Rational::ratio(rng.random_range(0..=scale), scale)
}

#[derive(Clone, Copy)]
enum Sublevel {
    Empty,
    Set,
    Everything,
    Unknown,
}

fn classify_sublevel(d: &Density, s: &Rational) -> Sublevel {
    match d.as_indicator() {
        Some(ind) if s < ind.on_value() => Sublevel::Empty,
        Some(ind) if s < ind.off_value() => Sublevel::Set,
        Some(_) => Sublevel::Everything,
        None => Sublevel::Unknown,
    }
}

struct Draw<S> {
    x: Vec<S>,
    y: Vec<S>,
    mid: Vec<S>,
    fx: S,
    fy: S,
    fm: S,
    source: &'static str,
}

fn midpoint<S: Scalar>(x: &[S], y: &[S]) -> Vec<S> {
    let two = S::from_int(2);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a.clone() + b.clone()) / two.clone())
        .collect()
}

fn sample_point(
    d: &Density,
    kind: Sublevel,
    budget: &SampleBudget,
    rng: &mut ChaCha8Rng,
) -> (Vec<Rational>, &'static str) {
    if let Some(sampler) = &budget.sampler {
        return (sampler(rng), "custom_sample");
    }
    match (kind, d.as_indicator()) {
        (Sublevel::Set, Some(ind)) => {
            let segs = ind.set().segments();
            let seg = &segs[rng.random_range(0..segs.len())];
            let t = dyadic_unit(rng);
            let p = seg
                .a
                .iter()
                .zip(&seg.b)
                .map(|(a, b)| a + &t * (b - a))
                .collect();
            (p, "set_sample")
        }
        _ => {
            let two = q(2);
            let p = (0..d.dim())
                .map(|_| &budget.box_radius * (dyadic_unit(rng) * &two - q(1)))
                .collect();
            (p, "box_sample")
        }
    }
}

fn sublevel_impl<S: Scalar>(
    d: &Density,
    s: &Rational,
    budget: &SampleBudget,
    seed: u64,
) -> Result<Verdict> {
    let kind = classify_sublevel(d, s);
    let level = S::from_rational(s);
    let budget_text = format!(
        "{} pairs (vertex pairs: {}), rejection factor {}, seed {seed}",
        budget.count, budget.vertex_pairs, budget.rejection_factor
    );
    let test_pair = |x: Vec<S>, y: Vec<S>, source: &'static str| -> Result<Option<Draw<S>>> {
        let fx = d.eval_slice(&x)?;
        let fy = d.eval_slice(&y)?;
        if fx > level || fy > level {
            return Ok(None);
        }
        let mid = midpoint(&x, &y);
        let fm = d.eval_slice(&mid)?;
        Ok(Some(Draw { x, y, mid, fx, fy, fm, source }))
    };
    let make_witness = |draw: Draw<S>, worker: usize, index: usize| {
        let json_vec = |v: &[S]| v.iter().map(Scalar::to_json).collect::<Vec<_>>();
        Witness::NonconvexSublevel(SublevelWitness {
            density_id: d.id().to_string(),
            s: S::from_rational(s).to_json(),
            x: json_vec(&draw.x),
            y: json_vec(&draw.y),
            midpoint: json_vec(&draw.mid),
            f_x: draw.fx.to_json(),
            f_y: draw.fy.to_json(),
            f_midpoint: draw.fm.to_json(),
            source: draw.source.to_string(),
            worker,
            draw_index: index,
            rng_seed: seed,
            arithmetic_mode: S::MODE,
        })
    };

    let mut tested = 0usize;
    if budget.vertex_pairs {
        if let Some(ind) = d.as_indicator() {
            let verts: Vec<Vec<S>> = ind.set().vertices().iter().map(|v| convert(v)).collect();
            // each new vertex against all earlier ones
            for j in 1..verts.len() {
                for i in 0..j {
                    if tested >= budget.count {
                        break;
                    }
                    if let Some(draw) = test_pair(verts[i].clone(), verts[j].clone(), "vertex_pair")? {
                        tested += 1;
                        if draw.fm > level {
                            let w = make_witness(draw, 0, tested - 1);
                            return Ok(Verdict::violated(w, tested as u64, budget_text));
                        }
                    }
                }
            }
        }
    }

    let remaining = budget.count.saturating_sub(tested);
    if !matches!(kind, Sublevel::Empty) && remaining > 0 {
        let per_worker: Vec<usize> = (0..SAMPLER_WORKERS)
            .map(|w| remaining / SAMPLER_WORKERS + usize::from(w < remaining % SAMPLER_WORKERS))
            .collect();
        let results: Vec<Result<(usize, Option<(usize, Draw<S>)>)>> = per_worker
            .par_iter()
            .enumerate()
            .map(|(worker, &draws)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(worker as u64 + 1);
                let mut done = 0;
                for index in 0..draws {
                    let mut pick = || -> Result<Option<Vec<S>>> {
                        for _ in 0..budget.rejection_factor.max(1) {
                            let (p, _) = sample_point(d, kind, budget, &mut rng);
                            let p: Vec<S> = convert(&p);
                            if d.eval_slice(&p)? <= level {
                                return Ok(Some(p));
                            }
                        }
                        Ok(None)
                    };
                    let (Some(x), Some(y)) = (pick()?, pick()?) else {
                        continue;
                    };
                    let source = sample_source(kind, budget);
                    if let Some(draw) = test_pair(x, y, source)? {
                        done += 1;
                        if draw.fm > level {
                            return Ok((done, Some((index, draw))));
                        }
                    }
                }
                Ok((done, None))
            })
            .collect();
        let mut first: Option<(usize, usize, Draw<S>)> = None;
        for (worker, r) in results.into_iter().enumerate() {
            let (done, hit) = r?;
            tested += done;
            if first.is_none() {
                if let Some((index, draw)) = hit {
                    first = Some((worker, index, draw));
                }
            }
        }
        if let Some((worker, index, draw)) = first {
            let w = make_witness(draw, worker, index);
            return Ok(Verdict::violated(w, tested as u64, budget_text));
        }
    }

    if tested == 0 {
        return Ok(Verdict::inconclusive(
            0,
            budget_text,
            "sampler produced no sublevel points within budget",
        ));
    }
    Ok(Verdict::no_violation(tested as u64, budget_text))
}

fn sample_source(kind: Sublevel, budget: &SampleBudget) -> &'static str {
    if budget.sampler.is_some() {
        "custom_sample"
    } else if matches!(kind, Sublevel::Set) {
        "set_sample"
    } else {
        "box_sample"
    }
}

/// Sampled midpoint test of the convexity of `{f <= s}`.
///
/// Sound for falsification only: a witness proves non-convexity, while
/// `no_violation_within_budget` proves nothing.
pub fn sublevel_midpoint_convexity(
    d: &Density,
    s: &Rational,
    budget: &SampleBudget,
    rng_seed: u64,
    mode: ArithmeticMode,
) -> Result<Verdict> {
    if budget.count == 0 {
        return Err(Error::invalid("samples", "count must be positive"));
    }
    match mode {
        ArithmeticMode::Rational => sublevel_impl::<Rational>(d, s, budget, rng_seed),
        ArithmeticMode::Float => sublevel_impl::<f64>(d, s, budget, rng_seed),
    }
}

/// Tests a single pair; returns the midpoint value when both points lie in
/// the sublevel set and the midpoint does not.
pub fn midpoint_violation<S: Scalar>(d: &Density, s: &S, x: &[S], y: &[S]) -> Result<Option<(Vec<S>, S)>> {
    let fx = d.eval_slice(x)?;
    let fy = d.eval_slice(y)?;
    if fx > *s || fy > *s {
        return Ok(None);
    }
    let mid = midpoint(x, y);
    let fm = d.eval_slice(&mid)?;
    Ok(if fm > *s { Some((mid, fm)) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn r(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn pt(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(p, d)| r(p, d)).collect()
    }

    fn gp(v: &[(i64, i64)], n: usize, m: usize) -> GradientPoint<Rational> {
        GradientPoint::new(pt(v), n, m).unwrap()
    }

    #[test]
    fn square_boundary_values_exact() {
        let f = make_square_boundary_4d();
        let p = gp(&[(1, 2), (0, 1), (1, 2), (0, 1)], 2, 2);
        assert_eq!(eval_density(&f, &p).unwrap(), r(1, 1));
        let m = gp(&[(1, 1), (0, 1), (0, 1), (0, 1)], 2, 2);
        assert_eq!(eval_density(&f, &m).unwrap(), r(0, 1));
        let o = GradientPoint::<Rational>::zeros(2, 2);
        assert_eq!(eval_density(&f, &o).unwrap(), r(0, 1));
        let rr = gp(&[(1, 1), (0, 1), (1, 1), (0, 1)], 2, 2);
        assert_eq!(eval_density(&f, &rr).unwrap(), r(0, 1));
        let half_om = gp(&[(1, 2), (0, 1), (0, 1), (0, 1)], 2, 2);
        assert_eq!(eval_density(&f, &half_om).unwrap(), r(0, 1));
        // float mode agrees
        assert_eq!(eval_density(&f, &p.to_scalar::<f64>()).unwrap(), 1.0);
        assert_eq!(eval_density(&f, &m.to_scalar::<f64>()).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let f = make_square_boundary_4d();
        let x = GradientPoint::<Rational>::zeros(1, 2);
        assert!(matches!(eval_density(&f, &x), Err(Error::DimensionMismatch { .. })));
        assert!(GradientPoint::new(pt(&[(1, 1)]), 2, 2).is_err());
    }

    #[test]
    fn segment_distance_examples() {
        let f = make_square_boundary_4d();
        let set = f.as_indicator().unwrap().set();
        let p = pt(&[(1, 2), (0, 1), (1, 2), (0, 1)]);
        assert_eq!(set.distance_sq(&p).unwrap(), r(1, 4));
        assert_eq!(segment_distance(set, &[0.5, 0.0, 0.5, 0.0]).unwrap(), 0.5);
        assert_eq!(set.distance_sq(&pt(&[(1, 1), (0, 1), (0, 1), (0, 1)])).unwrap(), r(0, 1));
        let om = SegmentUnionSet::new(2)
            .unwrap()
            .with_segment(pt(&[(0, 1), (0, 1)]), pt(&[(1, 1), (0, 1)]))
            .unwrap();
        assert_eq!(segment_distance(&om, &[2.0, 0.0]).unwrap(), 1.0);
        assert!(set.distance_sq(&pt(&[(0, 1)])).is_err());
    }

    #[test]
    fn segment_distance_matches_dense_parameter_sampling() {
        // brute force over the four sides, then the closed form 1/2
        let f = make_square_boundary_4d();
        let set = f.as_indicator().unwrap().set();
        let x = [0.5, 0.0, 0.5, 0.0];
        let mut best = f64::INFINITY;
        for seg in set.segments() {
            let a: Vec<f64> = convert(&seg.a);
            let b: Vec<f64> = convert(&seg.b);
            for i in 0..=10_000 {
                let t = i as f64 / 10_000.0;
                let d2: f64 = (0..4).map(|c| (x[c] - (a[c] + t * (b[c] - a[c]))).powi(2)).sum();
                best = best.min(d2.sqrt());
            }
        }
        assert!((best - 0.5).abs() < 1e-12);
        assert_eq!(segment_distance(set, &x).unwrap(), 0.5);
    }

    #[test]
    fn segment_indicator_examples() {
        let g = make_segment_indicator_2d([r(0, 1), r(0, 1)], [r(1, 1), r(0, 1)]).unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));
        assert!(g.claimed_lsc());
        assert_eq!(g.eval_slice(&pt(&[(1, 2), (0, 1)])).unwrap(), r(0, 1));
        assert_eq!(g.eval_slice(&pt(&[(1, 2), (1, 1)])).unwrap(), r(1, 1));
        assert_eq!(g.eval_slice(&pt(&[(1, 1), (0, 1)])).unwrap(), r(0, 1));
        let g12 = g.with_shape(1, 2).unwrap();
        assert_eq!((g12.n(), g12.m()), (1, 2));
        assert!(g12.with_shape(3, 1).is_err());
    }

    #[test]
    fn degenerate_segment_needs_point_constructor() {
        let p = [r(1, 3), r(2, 3)];
        assert_eq!(
            make_segment_indicator_2d(p.clone(), p.clone()).unwrap_err(),
            Error::DegenerateSegment
        );
        let d = make_point_indicator_2d(p.clone()).unwrap();
        assert!(d.as_indicator().unwrap().set().has_degenerate());
        assert_eq!(d.eval_slice(&p).unwrap(), r(0, 1));
        assert_eq!(d.eval_slice(&[r(1, 3), r(1, 1)]).unwrap(), r(1, 1));
    }

    #[test]
    fn indicator_rejects_non_lsc_values() {
        let set = SegmentUnionSet::new(1).unwrap().with_point(vec![r(0, 1)]).unwrap();
        assert!(IndicatorDensity::new(set, r(1, 1), r(0, 1)).is_err());
    }

    #[test]
    fn float_tolerance_band() {
        let f = make_square_boundary_4d();
        assert_eq!(f.eval_slice(&[0.5, 1e-10, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(f.eval_slice(&[0.5, 1e-8, 0.0, 0.0]).unwrap(), 1.0);
        // exact mode has no band
        assert_eq!(f.eval_slice(&pt(&[(1, 2), (1, 10_000_000_000), (0, 1), (0, 1)])).unwrap(), r(1, 1));
    }

    #[test]
    fn descriptor_fields() {
        let d = make_square_boundary_4d().descriptor();
        assert_eq!(d["id"], "square4d");
        assert_eq!(d["n"], 2);
        assert_eq!(d["on_value"], "0");
        assert_eq!(d["off_value"], "1");
        assert_eq!(d["segments"].as_array().unwrap().len(), 4);
        assert_eq!(d["tolerance"]["rational"], "0");
    }

    #[test]
    fn gallery_ids_resolve() {
        assert_eq!(gallery_density("square4d").unwrap().id(), "square4d");
        let g = gallery_density("segment2d((0,0),(1,0))").unwrap();
        assert_eq!(g.id(), "segment2d((0,0),(1,0))");
        assert_eq!(gallery_density("segment2d(0,0,1,0)").unwrap().id(), g.id());
        assert!(matches!(gallery_density("cube7d"), Err(Error::UnknownId(_))));
        assert!(gallery_density("segment2d(0,0,1)").is_err());
    }

    #[test]
    fn gradient_point_views() {
        let p = gp(&[(1, 2), (0, 1), (1, 2), (0, 1)], 2, 2);
        assert_eq!(p.component(0), &pt(&[(1, 2), (0, 1)])[..]);
        assert_eq!(p.get(0, 1), &r(1, 2));
        assert_eq!(p.get(1, 0), &r(0, 1));
        let back = GradientPoint::from_matrix(&p.to_matrix()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn square_sublevel_half_is_not_convex() {
        let f = make_square_boundary_4d();
        let v = sublevel_midpoint_convexity(&f, &r(1, 2), &SampleBudget::new(100), 0, ArithmeticMode::Rational)
            .unwrap();
        assert!(v.is_violated());
        let w = v.witness.unwrap();
        let w = w.sublevel().unwrap();
        assert_eq!(w.midpoint, vec![Value::from("1/2"), "0".into(), "1/2".into(), "0".into()]);
        assert_eq!(w.x, vec![Value::from("1"), "0".into(), "0".into(), "0".into()]);
        assert_eq!(w.y, vec![Value::from("0"), "0".into(), "1".into(), "0".into()]);
        assert_eq!(w.f_midpoint, Value::from("1"));
        assert_eq!(w.source, "vertex_pair");
    }

    #[test]
    fn midpoint_of_m_and_n_is_p() {
        let f = make_square_boundary_4d();
        let [_, m, n, _] = square_vertices();
        let (mid, fm) = midpoint_violation(&f, &r(1, 2), &m, &n).unwrap().unwrap();
        assert_eq!(mid, pt(&[(1, 2), (0, 1), (1, 2), (0, 1)]));
        assert_eq!(fm, r(1, 1));
    }

    #[test]
    fn square_random_sampler_also_finds_nonconvexity() {
        let f = make_square_boundary_4d();
        let budget = SampleBudget::new(2000).random_only();
        let v = sublevel_midpoint_convexity(&f, &r(1, 2), &budget, 3, ArithmeticMode::Float).unwrap();
        assert!(v.is_violated());
    }

    #[test]
    fn segment_sublevel_is_convex_within_budget() {
        let g = make_segment_indicator_2d([r(0, 1), r(0, 1)], [r(1, 1), r(0, 1)]).unwrap();
        for mode in [ArithmeticMode::Rational, ArithmeticMode::Float] {
            let v = sublevel_midpoint_convexity(&g, &r(1, 2), &SampleBudget::new(500), 1, mode).unwrap();
            assert_eq!(v.status, crate::verdict::VerdictStatus::NoViolationWithinBudget, "{mode:?}");
            assert_eq!(v.budget_spent, 500);
        }
    }

    #[test]
    fn full_space_sublevel_is_convex() {
        let f = make_square_boundary_4d();
        let v = sublevel_midpoint_convexity(&f, &r(3, 2), &SampleBudget::new(200), 0, ArithmeticMode::Rational)
            .unwrap();
        assert_eq!(v.status, crate::verdict::VerdictStatus::NoViolationWithinBudget);
    }

    #[test]
    fn empty_sublevel_is_inconclusive() {
        let f = make_square_boundary_4d();
        let v = sublevel_midpoint_convexity(&f, &r(-1, 1), &SampleBudget::new(50), 0, ArithmeticMode::Rational)
            .unwrap();
        assert_eq!(v.status, crate::verdict::VerdictStatus::Inconclusive);
        assert!(v.witness.is_none());
        let c = Density::from_fn("hi", 1, 1, true, |_| 5.0).unwrap();
        let v = sublevel_midpoint_convexity(&c, &r(0, 1), &SampleBudget::new(10), 0, ArithmeticMode::Float)
            .unwrap();
        assert_eq!(v.status, crate::verdict::VerdictStatus::Inconclusive);
        assert!(sublevel_midpoint_convexity(&c, &r(0, 1), &SampleBudget::new(0), 0, ArithmeticMode::Float).is_err());
    }

    #[test]
    fn custom_sampler_is_used() {
        // two disjoint segments, sampler returns only their endpoints
        let set = SegmentUnionSet::new(2)
            .unwrap()
            .with_segment(pt(&[(0, 1), (0, 1)]), pt(&[(1, 1), (0, 1)]))
            .unwrap()
            .with_segment(pt(&[(0, 1), (1, 1)]), pt(&[(1, 1), (1, 1)]))
            .unwrap();
        let d = Density::indicator("two", 2, 1, IndicatorDensity::new(set, r(0, 1), r(1, 1)).unwrap(), "").unwrap();
        let mut budget = SampleBudget::new(64).random_only();
        budget.sampler = Some(Arc::new(|rng: &mut ChaCha8Rng| {
            let y = rng.random_range(0..2);
            vec![Rational::from_int(0), Rational::from_int(y)]
        }));
        let v = sublevel_midpoint_convexity(&d, &r(1, 2), &budget, 9, ArithmeticMode::Rational).unwrap();
        assert!(v.is_violated());
        assert_eq!(v.witness.unwrap().sublevel().unwrap().source, "custom_sample");
    }

    #[test]
    fn sampler_is_deterministic_given_seed() {
        let f = make_square_boundary_4d();
        let budget = SampleBudget::new(3000).random_only();
        let a = sublevel_midpoint_convexity(&f, &r(1, 2), &budget, 11, ArithmeticMode::Float).unwrap();
        let b = sublevel_midpoint_convexity(&f, &r(1, 2), &budget, 11, ArithmeticMode::Float).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vertex_pair_enumeration_always_yields_p() {
        let f = make_square_boundary_4d();
        for seed in 0..20 {
            for mode in [ArithmeticMode::Rational, ArithmeticMode::Float] {
                let v = sublevel_midpoint_convexity(&f, &r(1, 2), &SampleBudget::new(10), seed, mode).unwrap();
                let w = v.witness.unwrap();
                let mid: Vec<f64> = w
                    .sublevel()
                    .unwrap()
                    .midpoint
                    .iter()
                    .map(|v| f64::from_json(v).unwrap())
                    .collect();
                assert_eq!(mid, vec![0.5, 0.0, 0.5, 0.0]);
            }
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-0.5..1.5)).collect()
    }

    #[test]
    fn exact_indicator_agrees_with_segment_distance() {
        let f = make_square_boundary_4d();
        let ind = f.as_indicator().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..10_000 {
            // half the points are placed on the set
            let x: Vec<Rational> = if i % 2 == 0 {
                let seg = &ind.set().segments()[rng.random_range(0..4)];
                let t = dyadic_unit(&mut rng);
                seg.a.iter().zip(&seg.b).map(|(a, b)| a + &t * (b - a)).collect()
            } else {
                random_point(&mut rng, 4).iter().map(|v| Rational::from_float(*v).unwrap()).collect()
            };
            let d2 = ind.set().distance_sq(&x).unwrap();
            let expected = if d2.is_zero() { r(0, 1) } else { r(1, 1) };
            assert_eq!(f.eval_slice(&x).unwrap(), expected);
        }
    }

    #[test]
    fn indicator_is_lower_semicontinuous_along_sequences() {
        let f = make_square_boundary_4d();
        let ind = f.as_indicator().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for i in 0..1000 {
            let x: Vec<f64> = if i % 2 == 0 {
                let seg = &ind.set().segments()[rng.random_range(0..4)];
                let t: f64 = rng.random();
                (0..4).map(|c| seg.af[c] + t * (seg.bf[c] - seg.af[c])).collect()
            } else {
                random_point(&mut rng, 4)
            };
            let fx = f.eval_slice(&x).unwrap();
            let dir: Vec<f64> = random_point(&mut rng, 4);
            // x_k = x + 2^-k dir; the tail must not dip below f(x)
            let tail_min = (20..60)
                .map(|k| {
                    let h = 0.5f64.powi(k);
                    let xk: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
                    f.eval_slice(&xk).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(tail_min >= fx, "liminf {tail_min} < f(x) {fx} at {x:?}");
        }
    }

    proptest! {
        #[test]
        fn reshape_round_trip(n in 1usize..4, m in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let entries: Vec<Rational> = (0..n * m).map(|_| Rational::ratio(rng.random_range(-50..50), 7)).collect();
            let p = GradientPoint::new(entries, n, m).unwrap();
            prop_assert_eq!(GradientPoint::from_matrix(&p.to_matrix()).unwrap(), p);
        }

        #[test]
        fn evaluation_is_pure(x in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let f = make_square_boundary_4d();
            prop_assert_eq!(f.eval_slice(&x).unwrap(), f.eval_slice(&x).unwrap());
        }
    }
}
