//! Candidate test maps shared by the weak and strong searches.

use std::collections::HashSet;
use std::sync::Arc;

use num::traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constructions::{ConstructionId, ZigZagProfile};
use crate::density::{Density, GradientPoint};
use crate::error::Result;
use crate::mesh::{CubeMesh, PwAffineMap};
use crate::scalar::{convert, Rational, Scalar};

const DYADIC_STEPS: i32 = 256;

fn dyadic(rng: &mut ChaCha8Rng) -> f64 {
    f64::from(rng.random_range(-DYADIC_STEPS..=DYADIC_STEPS)) / f64::from(DYADIC_STEPS)
}

/// Random piecewise-affine maps with dyadic nodal values.
#[derive(Debug, Clone)]
pub(crate) struct RandomMaps {
    mesh: Arc<CubeMesh>,
    m: usize,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    grad_cap: f64,
    /// Per-component bound of boundary values; `None` keeps the boundary at zero.
    boundary_scale: Option<f64>,
}

impl RandomMaps {
    pub(crate) fn new(mesh: Arc<CubeMesh>, m: usize, grad_cap: f64, boundary_scale: Option<f64>) -> Self {
        let interior = mesh.interior_nodes().collect();
        let boundary = mesh.boundary_nodes().collect();
        RandomMaps { mesh, m, interior, boundary, grad_cap, boundary_scale }
    }

    pub(crate) fn mesh(&self) -> &Arc<CubeMesh> {
        &self.mesh
    }

    /// Dense, sparse or rank-one interior values, then halved until the
    /// gradient cap holds, then halved a random number of extra times.
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> Result<PwAffineMap<f64>> {
        let m = self.m;
        let mut values = vec![0.0; self.mesh.num_nodes() * m];
        if !self.interior.is_empty() {
            match rng.random_range(0..3) {
                0 => {
                    for &node in &self.interior {
                        for c in 0..m {
                            values[node * m + c] = dyadic(rng);
                        }
                    }
                }
                1 => {
                    let count = rng.random_range(1..=3usize.min(self.interior.len()));
                    for _ in 0..count {
                        let node = self.interior[rng.random_range(0..self.interior.len())];
                        for c in 0..m {
                            values[node * m + c] = dyadic(rng);
                        }
                    }
                }
                _ => {
                    let v: Vec<f64> = (0..m).map(|_| dyadic(rng)).collect();
                    for &node in &self.interior {
                        let h = dyadic(rng);
                        for c in 0..m {
                            values[node * m + c] = h * v[c];
                        }
                    }
                }
            }
        }
        if let Some(beta) = self.boundary_scale {
            for &node in &self.boundary {
                for c in 0..m {
                    values[node * m + c] = dyadic(rng) * beta;
                }
            }
        }
        let mut map = PwAffineMap::new(self.mesh.clone(), m, values)?;
        let mut halvings = 0;
        let mut g = map.grad_sup_norm();
        while g > self.grad_cap {
            g /= 2.0;
            halvings += 1;
        }
        halvings += rng.random_range(0..=4);
        if halvings > 0 {
            map = scaled(&map, 0.5f64.powi(halvings))?;
        }
        Ok(map)
    }

    /// Interior node ids, for coordinate moves.
    pub(crate) fn interior(&self) -> &[usize] {
        &self.interior
    }
}

/// Multiplies every nodal value by `factor` (a power of two keeps values dyadic).
pub(crate) fn scaled(map: &PwAffineMap<f64>, factor: f64) -> Result<PwAffineMap<f64>> {
    let values = map.nodal_values().iter().map(|v| v * factor).collect();
    PwAffineMap::new(map.mesh_arc().clone(), map.m(), values)
}

/// Largest power of two `beta` with `beta^2 m <= delta^2`, so random
/// boundary values in `[-beta, beta]^m` stay within `delta`.
pub(crate) fn boundary_scale_for(delta: &Rational, m: usize) -> f64 {
    let bound = delta * delta;
    let mut beta = Rational::one();
    let m = Rational::from_int(m as i64);
    while &beta * &beta * &m > bound {
        beta /= Rational::from_int(2);
    }
    while &beta * &beta * Rational::from_int(4) * &m <= bound {
        beta *= Rational::from_int(2);
    }
    Scalar::to_f64(&beta)
}

/// A one-direction laminate `(eps/2) zigzag(x_axis/eps) b`, mesh-independent.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LaminateCandidate {
    pub axis: usize,
    pub amplitude: Vec<Rational>,
    pub zigzag: bool,
}

impl LaminateCandidate {
    /// `+-(1/2) b (x) e_axis`, component-major.
    pub(crate) fn gradient_pair(&self, n: usize) -> [Vec<Rational>; 2] {
        let m = self.amplitude.len();
        let mut plus = vec![Rational::zero(); n * m];
        for c in 0..m {
            plus[c * n + self.axis] = &self.amplitude[c] / Rational::from_int(2);
        }
        let minus = plus.iter().map(|v| -v).collect();
        [plus, minus]
    }

    pub(crate) fn grad_norm(&self) -> Rational {
        self.amplitude
            .iter()
            .map(|b| Signed::abs(b) / Rational::from_int(2))
            .fold(Rational::zero(), Scalar::max_of)
    }

    pub(crate) fn amplitude_sq(&self) -> Rational {
        self.amplitude.iter().fold(Rational::zero(), |acc, b| acc + b * b)
    }

    /// `max(f(A + g+), f(A + g-))`, which equals the ess sup on any mesh
    /// compatible with the profile.
    pub(crate) fn predicted_ess_sup<S: Scalar>(&self, d: &Density, a: &GradientPoint<S>) -> Result<S> {
        let mut best: Option<S> = None;
        for g in self.gradient_pair(d.n()) {
            let shifted = a.shifted(&convert::<S>(&g))?;
            let v = d.eval_slice(shifted.entries())?;
            best = Some(match best {
                Some(b) => S::max_of(b, v),
                None => v,
            });
        }
        Ok(best.expect("gradient pair is non-empty"))
    }

    pub(crate) fn construction(&self, n: usize, profile: ZigZagProfile) -> ConstructionId {
        let ones = self.amplitude.iter().all(One::is_one);
        if self.zigzag && n == 2 && self.axis == 0 && self.amplitude.len() == 2 && ones {
            ConstructionId::ZigZag(profile)
        } else {
            ConstructionId::Laminate { axis: self.axis, amplitude: self.amplitude.clone(), profile }
        }
    }
}

/// Laminate candidates in priority order: the zig-zag direction, then
/// amplitudes aimed at set anchors, then sign vectors at a few scales.
pub(crate) fn laminate_candidates(
    d: &Density,
    a: &GradientPoint<Rational>,
    zigzag: bool,
    laminate: bool,
) -> Vec<LaminateCandidate> {
    let (n, m) = (d.n(), d.m());
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |axis: usize, amplitude: Vec<Rational>, zz: bool, out: &mut Vec<LaminateCandidate>| {
        if amplitude.iter().all(Zero::is_zero) {
            return;
        }
        if seen.insert((axis, amplitude.clone())) {
            out.push(LaminateCandidate { axis, amplitude, zigzag: zz });
        }
    };
    if zigzag {
        push(0, vec![Rational::one(); m], true, &mut out);
    }
    if !laminate {
        return out;
    }
    if let Some(ind) = d.as_indicator() {
        let mut anchors = ind.set().vertices();
        anchors.extend(ind.set().segments().iter().map(|s| s.midpoint()));
        for u in anchors {
            let diff: Vec<Rational> = u.iter().zip(a.entries()).map(|(x, y)| x - y).collect();
            for axis in 0..n {
                let rank_one = (0..m).all(|c| (0..n).all(|j| j == axis || diff[c * n + j].is_zero()));
                if rank_one {
                    let b = (0..m).map(|c| &diff[c * n + axis] * Rational::from_int(2)).collect();
                    push(axis, b, false, &mut out);
                }
            }
        }
    }
    let signs = sign_vectors(m);
    for scale in [Rational::new(1.into(), 2.into()), Rational::one(), Rational::from_int(2)] {
        for axis in 0..n {
            for s in &signs {
                push(axis, s.iter().map(|x| x * &scale).collect(), false, &mut out);
            }
        }
    }
    out
}

fn sign_vectors(m: usize) -> Vec<Vec<Rational>> {
    if m > 4 {
        let mut out = vec![vec![Rational::one(); m]];
        for c in 0..m {
            for sign in [1, -1] {
                let mut v = vec![Rational::zero(); m];
                v[c] = Rational::from_int(sign);
                out.push(v);
            }
        }
        return out;
    }
    let total = 3usize.pow(m as u32);
    (1..total)
        .map(|mut code| {
            (0..m)
                .map(|_| {
                    let digit = (code % 3) as i64;
                    code /= 3;
                    Rational::from_int(if digit == 2 { -1 } else { digit })
                })
                .collect()
        })
        .collect()
}
