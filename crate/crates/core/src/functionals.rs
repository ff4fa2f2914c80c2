//! The shifted ess-sup functional `A, phi -> ess sup_Q f(A + D phi)` for
//! piecewise-affine `phi`.
//!
//! `D phi` is constant on each simplex and every simplex has positive
//! volume, so the essential supremum is exactly the max over simplices.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::density::{Density, GradientPoint};
use crate::error::{Error, Result};
use crate::mesh::PwAffineMap;
use crate::scalar::Scalar;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct EssSupResult<S> {
    pub value: S,
    /// Lowest simplex id attaining the max.
    pub argmax_simplex: usize,
    pub gradient_at_argmax: Vec<S>,
    /// `A + D phi` on the argmax simplex.
    pub shifted_point: GradientPoint<S>,
    /// Volume of the argmax simplex; positive by construction.
    pub argmax_volume: S,
}

impl<S: Scalar> EssSupResult<S> {
    /// `{value, argmax_simplex, gradient, shifted_point}`.
    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value.to_json(),
            "argmax_simplex": self.argmax_simplex,
            "gradient": self.gradient_at_argmax.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "shifted_point": self.shifted_point.to_json(),
        })
    }
}

fn check_dims<S: Scalar>(d: &Density, a: &GradientPoint<S>, phi: &PwAffineMap<S>) -> Result<()> {
    if d.n() != phi.n() {
        return Err(Error::DimensionMismatch { context: "density n vs mesh dimension", expected: d.n(), got: phi.n() });
    }
    if d.m() != phi.m() {
        return Err(Error::DimensionMismatch { context: "density m vs map codomain", expected: d.m(), got: phi.m() });
    }
    if a.n() != d.n() || a.m() != d.m() {
        return Err(Error::DimensionMismatch {
            context: "base point shape",
            expected: d.dim(),
            got: a.n() * a.m(),
        });
    }
    Ok(())
}

/// Cache key of a simplex gradient: integer numerators when the map has a
/// shared denominator, scalar keys otherwise.
#[derive(PartialEq, Eq, Hash)]
enum GradKey<K> {
    Integer(Vec<i128>),
    Exact(Vec<K>),
}

struct Best<S> {
    value: S,
    id: usize,
    grad: Vec<S>,
}

fn better<S: Scalar>(a: Option<Best<S>>, b: Option<Best<S>>) -> Option<Best<S>> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.value > x.value || (y.value == x.value && y.id < x.id) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

fn shifted_into<S: Scalar>(a: &[S], grad: &[S], out: &mut Vec<S>) {
    out.clear();
    out.extend(a.iter().zip(grad).map(|(x, g)| x.clone() + g.clone()));
}

/// Exact `ess sup_{x in Q} f(A + D phi(x))`, ties broken by lowest simplex id.
pub fn ess_sup_shifted<S: Scalar>(d: &Density, a: &GradientPoint<S>, phi: &PwAffineMap<S>) -> Result<EssSupResult<S>> {
    check_dims(d, a, phi)?;
    let total = phi.mesh().num_simplices();
    let sup = d.supremum().map(|s| S::from_rational(&s));
    // lowest simplex id known to attain the density's supremum
    let first_at_sup = AtomicUsize::new(usize::MAX);
    let form = phi.integer_form();

    let chunks: Vec<Result<Option<Best<S>>>> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut cache: HashMap<GradKey<S::Key>, S> = HashMap::new();
            let mut best: Option<Best<S>> = None;
            let mut point = Vec::with_capacity(d.dim());
            let mut ints = Vec::new();
            for id in start..end {
                if id > first_at_sup.load(Ordering::Relaxed) {
                    break;
                }
                let (key, mut grad) = match form {
                    Some(f) => {
                        phi.integer_gradient(f, id, &mut ints);
                        (GradKey::Integer(ints.clone()), None)
                    }
                    None => {
                        let g = phi.gradient_unchecked(id);
                        (GradKey::Exact(g.iter().map(Scalar::key).collect()), Some(g))
                    }
                };
                let exact = |grad: &mut Option<Vec<S>>| -> Vec<S> {
                    grad.take().unwrap_or_else(|| {
                        let f = form.expect("integer key implies integer form");
                        ints.iter().map(|&g| f.value(g)).collect()
                    })
                };
                let value = match cache.get(&key) {
                    Some(v) => v.clone(),
                    None => {
                        let g = exact(&mut grad);
                        shifted_into(a.entries(), &g, &mut point);
                        let v = d.eval_slice(&point)?;
                        cache.insert(key, v.clone());
                        grad = Some(g);
                        v
                    }
                };
                let improves = best.as_ref().is_none_or(|b| value > b.value);
                if improves {
                    let at_sup = sup.as_ref().is_some_and(|s| value >= *s);
                    best = Some(Best { value, id, grad: exact(&mut grad) });
                    if at_sup {
                        first_at_sup.fetch_min(id, Ordering::Relaxed);
                        break;
                    }
                }
            }
            Ok(best)
        })
        .collect();

    let mut best = None;
    for c in chunks {
        best = better(best, c?);
    }
    let best = best.ok_or_else(|| Error::invalid("mesh", "no simplices"))?;
    let shifted_point = a.shifted(&best.grad)?;
    Ok(EssSupResult {
        value: best.value,
        argmax_simplex: best.id,
        gradient_at_argmax: best.grad,
        shifted_point,
        argmax_volume: phi.mesh().simplex_volume(),
    })
}

/// `f(A + D phi)` on every simplex, in simplex order.
pub fn simplex_values<S: Scalar>(d: &Density, a: &GradientPoint<S>, phi: &PwAffineMap<S>) -> Result<Vec<S>> {
    check_dims(d, a, phi)?;
    let mut point = Vec::with_capacity(d.dim());
    (0..phi.mesh().num_simplices())
        .map(|id| {
            let grad = phi.gradient_unchecked(id);
            shifted_into(a.entries(), &grad, &mut point);
            d.eval_slice(&point)
        })
        .collect()
}

/// Checks `f(A) <= ess sup_Q f(A + D phi)` for a zero-boundary `phi`.
pub fn weak_mqc_inequality_holds<S: Scalar>(
    d: &Density,
    a: &GradientPoint<S>,
    phi: &PwAffineMap<S>,
) -> Result<(bool, EssSupResult<S>)> {
    if !phi.zero_boundary() {
        return Err(Error::NotZeroBoundary);
    }
    let result = ess_sup_shifted(d, a, phi)?;
    let fa = d.eval_slice(a.entries())?;
    Ok((fa <= result.value, result))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::constructions::zigzag_test_map;
    use crate::density::{make_segment_indicator_2d, make_square_boundary_4d, IndicatorDensity, SegmentUnionSet};
    use crate::mesh::{build_kuhn_mesh, interpolate};
    use crate::scalar::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    fn p_point() -> GradientPoint<Rational> {
        GradientPoint::new(vec![r(1, 2), r(0, 1), r(1, 2), r(0, 1)], 2, 2).unwrap()
    }

    fn random_zero_boundary(k: usize, m: usize, rng: &mut ChaCha8Rng) -> PwAffineMap<Rational> {
        let mesh = Arc::new(build_kuhn_mesh(2, k).unwrap());
        let values = (0..mesh.num_nodes() * m)
            .map(|i| if mesh.is_boundary(i / m) { r(0, 1) } else { r(rng.random_range(-16..=16), 32) })
            .collect();
        PwAffineMap::new(mesh, m, values).unwrap()
    }

    /// Independent oracle: evaluate every simplex, take the max, lowest id.
    fn brute_force(d: &Density, a: &GradientPoint<Rational>, phi: &PwAffineMap<Rational>) -> (Rational, usize) {
        let mut best: Option<(Rational, usize)> = None;
        for s in 0..phi.mesh().num_simplices() {
            let g = phi.simplex_gradient_by_solve(s).unwrap();
            let x: Vec<Rational> = a.entries().iter().zip(&g).map(|(p, q)| p + q).collect();
            let v = d.eval_slice(&x).unwrap();
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, s));
            }
        }
        best.unwrap()
    }

    #[test]
    fn zigzag_shift_lands_on_square() {
        let f = make_square_boundary_4d();
        let mesh = Arc::new(build_kuhn_mesh(2, 8).unwrap());
        let phi = zigzag_test_map(&r(1, 4), mesh).unwrap();
        let res = ess_sup_shifted(&f, &p_point(), &phi).unwrap();
        assert_eq!(res.value, r(0, 1));
        assert_eq!(res.argmax_simplex, 0);
        assert!(res.argmax_volume > r(0, 1));
    }

    #[test]
    fn zero_map_gives_f_at_a() {
        let f = make_square_boundary_4d();
        let mesh = Arc::new(build_kuhn_mesh(2, 3).unwrap());
        let zero = PwAffineMap::<Rational>::zero(mesh, 2);
        for a in [p_point(), GradientPoint::zeros(2, 2)] {
            let res = ess_sup_shifted(&f, &a, &zero).unwrap();
            assert_eq!(res.value, f.eval_slice(a.entries()).unwrap());
            assert_eq!(res.shifted_point, a);
        }
        let (holds, res) = weak_mqc_inequality_holds(&f, &p_point(), &zero).unwrap();
        assert!(holds);
        assert_eq!(res.value, r(1, 1));
    }

    #[test]
    fn random_zero_boundary_maps_reach_one_at_p() {
        let f = make_square_boundary_4d();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let phi = random_zero_boundary(8, 2, &mut rng);
            let res = ess_sup_shifted(&f, &p_point(), &phi).unwrap();
            let (v, id) = brute_force(&f, &p_point(), &phi);
            assert_eq!(res.value, r(1, 1));
            assert_eq!((res.value.clone(), res.argmax_simplex), (v, id));
            assert_eq!(f.eval_slice(res.shifted_point.entries()).unwrap(), res.value);
        }
    }

    #[test]
    fn early_exit_reports_lowest_argmax() {
        // a density without a known supremum takes the full scan path
        let f = make_square_boundary_4d();
        let g = Density::from_fn("square-float", 2, 2, true, {
            let f = f.clone();
            move |x| f.eval_slice(x).unwrap()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let phi = random_zero_boundary(8, 2, &mut rng).to_scalar::<f64>().unwrap();
            let a = p_point().to_scalar::<f64>();
            let fast = ess_sup_shifted(&f, &a, &phi).unwrap();
            let slow = ess_sup_shifted(&g, &a, &phi).unwrap();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn segment_case_two_mechanism() {
        // g = 1 off OM, A = P_1 = (1/2, 0); a bump in x_2 leaves OM
        let g = make_segment_indicator_2d([r(0, 1), r(0, 1)], [r(1, 1), r(0, 1)]).unwrap();
        let a = GradientPoint::new(vec![r(1, 2), r(0, 1)], 2, 1).unwrap();
        let mesh = Arc::new(build_kuhn_mesh(2, 4).unwrap());
        let phi = interpolate(
            |x: &[Rational]| {
                let bump = |t: &Rational| if *t <= r(1, 2) { t.clone() } else { r(1, 1) - t };
                vec![bump(&x[0]) * bump(&x[1])]
            },
            mesh,
            1,
        )
        .unwrap();
        assert!(phi.zero_boundary());
        assert!((0..phi.mesh().num_simplices()).any(|s| phi.simplex_gradient(s).unwrap()[1] != r(0, 1)));
        let (holds, res) = weak_mqc_inequality_holds(&g, &a, &phi).unwrap();
        assert!(holds);
        assert_eq!(res.value, r(1, 1));
        assert_eq!(brute_force(&g, &a, &phi).0, r(1, 1));
    }

    #[test]
    fn case_one_off_segment_base_point() {
        let f = make_square_boundary_4d();
        let a = GradientPoint::new(vec![r(2, 1), r(0, 1), r(0, 1), r(0, 1)], 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let phi = random_zero_boundary(4, 2, &mut rng);
            let (holds, res) = weak_mqc_inequality_holds(&f, &a, &phi).unwrap();
            assert!(holds);
            assert_eq!(res.value, r(1, 1));
        }
    }

    #[test]
    fn weak_check_rejects_nonzero_boundary() {
        let f = make_square_boundary_4d();
        let mesh = Arc::new(build_kuhn_mesh(2, 8).unwrap());
        let phi = zigzag_test_map(&r(1, 4), mesh).unwrap();
        assert_eq!(weak_mqc_inequality_holds(&f, &p_point(), &phi).unwrap_err(), Error::NotZeroBoundary);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let f = make_square_boundary_4d();
        let mesh = Arc::new(build_kuhn_mesh(2, 2).unwrap());
        let phi = PwAffineMap::<Rational>::zero(mesh, 1);
        assert!(matches!(ess_sup_shifted(&f, &p_point(), &phi), Err(Error::DimensionMismatch { .. })));
        let mesh3 = Arc::new(build_kuhn_mesh(3, 1).unwrap());
        let phi3 = PwAffineMap::<Rational>::zero(mesh3, 2);
        assert!(ess_sup_shifted(&f, &p_point(), &phi3).is_err());
    }

    #[test]
    fn monotone_in_the_density() {
        // the set of the smaller density contains that of the larger one
        let small = make_square_boundary_4d();
        let [o, m, _, _] = crate::density::square_vertices();
        let om = SegmentUnionSet::new(4).unwrap().with_segment(o, m).unwrap();
        let big = Density::indicator("om4d", 2, 2, IndicatorDensity::new(om, r(0, 1), r(1, 1)).unwrap(), "").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let phi = random_zero_boundary(4, 2, &mut rng);
            let a: Vec<Rational> = (0..4).map(|_| r(rng.random_range(0..=4), 4)).collect();
            let a = GradientPoint::new(a, 2, 2).unwrap();
            let lo = ess_sup_shifted(&small, &a, &phi).unwrap().value;
            let hi = ess_sup_shifted(&big, &a, &phi).unwrap().value;
            assert!(lo <= hi);
        }
        let mesh = Arc::new(build_kuhn_mesh(2, 8).unwrap());
        let phi = zigzag_test_map(&r(1, 4), mesh).unwrap();
        assert_eq!(ess_sup_shifted(&big, &p_point(), &phi).unwrap().value, r(1, 1));
    }

    #[test]
    fn json_shape() {
        let f = make_square_boundary_4d();
        let mesh = Arc::new(build_kuhn_mesh(2, 8).unwrap());
        let phi = zigzag_test_map(&r(1, 4), mesh).unwrap();
        let j = ess_sup_shifted(&f, &p_point(), &phi).unwrap().to_json();
        assert_eq!(j["value"], "0");
        assert_eq!(j["gradient"].as_array().unwrap().len(), 4);
        assert_eq!(j["shifted_point"].as_array().unwrap().len(), 4);
    }
}
