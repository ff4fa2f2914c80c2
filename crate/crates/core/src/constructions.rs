//! The periodic zig-zag profile and the laminate test maps built from it.

use std::sync::Arc;

use num::traits::{One, Signed, Zero};
use num::BigInt;

use crate::error::{Error, Result};
use crate::mesh::{build_kuhn_mesh, interpolate, CubeMesh, PwAffineMap};
use crate::scalar::{parse_rational, Rational, Scalar};

/// Period-1 tent: `t` on `[0, 1/2]`, `1 - t` on `[1/2, 1]`.
pub fn zigzag<S: Scalar>(t: &S) -> S {
    let frac = t.clone() - Scalar::floor(t);
    let half = S::ratio(1, 2);
    if frac <= half {
        frac
    } else {
        S::one() - frac
    }
}

/// Scale parameter `eps` of the lifted profile; `1/eps` must be an even
/// positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZigZagProfile {
    eps: Rational,
}

impl ZigZagProfile {
    pub fn new(eps: Rational) -> Result<Self> {
        if eps <= Rational::zero() {
            return Err(Error::Incompatible(format!("eps={eps} must be positive")));
        }
        let inv = eps.recip();
        if !inv.is_integer() || (inv.to_integer() % BigInt::from(2)) != BigInt::zero() {
            return Err(Error::Incompatible(format!("1/eps must be an even integer, got eps={eps}")));
        }
        Ok(ZigZagProfile { eps })
    }

    /// `eps = 1/(2q)`.
    pub fn from_half_period_count(q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::Incompatible("q must be positive".into()));
        }
        Self::new(Rational::new(BigInt::one(), BigInt::from(2 * q)))
    }

    pub fn eps(&self) -> &Rational {
        &self.eps
    }

    /// Smallest compatible number of subdivisions, `2/eps`.
    pub fn min_mesh_k(&self) -> usize {
        (Rational::from_int(2) / &self.eps).to_integer().try_into().unwrap_or(usize::MAX)
    }

    /// Checks that the kinks `x = j eps/2` are mesh lines.
    pub fn check_mesh(&self, k: usize) -> Result<()> {
        let ratio = Rational::from_int(k as i64) * &self.eps / Rational::from_int(2);
        if ratio.is_integer() && ratio.is_positive() {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "k={k} is not a multiple of 2/eps={} (eps={})",
                self.min_mesh_k(),
                self.eps
            )))
        }
    }

    /// `(eps/2) zigzag(t/eps)`.
    pub fn lifted<S: Scalar>(&self, t: &S) -> S {
        let eps = S::from_rational(&self.eps);
        eps.clone() / S::from_int(2) * zigzag(&(t.clone() / eps))
    }
}

/// A one-direction laminate `phi(x) = (eps/2) zigzag(x . a / eps) b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaminateSpec {
    pub direction: Vec<Rational>,
    pub amplitude: Vec<Rational>,
    pub profile: ZigZagProfile,
}

impl LaminateSpec {
    /// Laminate along coordinate axis `axis` (0-based) of `R^n`.
    pub fn along_axis(n: usize, axis: usize, amplitude: Vec<Rational>, profile: ZigZagProfile) -> Result<Self> {
        if axis >= n {
            return Err(Error::invalid("axis", format!("{axis} out of range for n={n}")));
        }
        let direction = (0..n).map(|j| if j == axis { Rational::one() } else { Rational::zero() }).collect();
        Ok(LaminateSpec { direction, amplitude, profile })
    }

    /// The axis of an axis-aligned direction.
    pub fn axis(&self) -> Result<usize> {
        let nonzero: Vec<usize> = (0..self.direction.len()).filter(|&j| !self.direction[j].is_zero()).collect();
        match nonzero.as_slice() {
            [j] if self.direction[*j].is_one() => Ok(*j),
            _ => Err(Error::Unsupported("only axis-aligned laminate directions are supported".into())),
        }
    }

    /// `laminate(axis,b1,..,bm,eps)` with a 1-based axis.
    pub fn id(&self) -> Result<String> {
        let b: Vec<String> = self.amplitude.iter().map(|x| x.to_string()).collect();
        Ok(format!("laminate({},{},{})", self.axis()? + 1, b.join(","), self.profile.eps))
    }

    /// Gradient values `+-(1/2) b (x) a`, flattened component-major.
    pub fn gradient_pair(&self) -> Result<[Vec<Rational>; 2]> {
        let axis = self.axis()?;
        let n = self.direction.len();
        let m = self.amplitude.len();
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut plus = vec![Rational::zero(); n * m];
        for c in 0..m {
            plus[c * n + axis] = &self.amplitude[c] * &half;
        }
        let minus = plus.iter().map(|v| -v).collect();
        Ok([plus, minus])
    }
}

/// The two-component map `phi_1 = phi_2 = (eps/2) zigzag(x_1/eps)` on a 2-D
/// mesh. Not zero on the faces `x_2 in {0, 1}`.
pub fn zigzag_test_map<S: Scalar>(eps: &Rational, mesh: Arc<CubeMesh>) -> Result<PwAffineMap<S>> {
    if mesh.n() != 2 {
        return Err(Error::Incompatible(format!("zigzag map needs a 2-D mesh, got n={}", mesh.n())));
    }
    let spec = LaminateSpec::along_axis(2, 0, vec![Rational::one(), Rational::one()], ZigZagProfile::new(eps.clone())?)?;
    laminate_test_map(&spec, mesh)
}

pub fn laminate_test_map<S: Scalar>(spec: &LaminateSpec, mesh: Arc<CubeMesh>) -> Result<PwAffineMap<S>> {
    let axis = spec.axis()?;
    if spec.direction.len() != mesh.n() {
        return Err(Error::DimensionMismatch {
            context: "laminate direction",
            expected: mesh.n(),
            got: spec.direction.len(),
        });
    }
    if spec.amplitude.is_empty() {
        return Err(Error::invalid("amplitude", "must have at least one component"));
    }
    spec.profile.check_mesh(mesh.k())?;
    let b: Vec<S> = spec.amplitude.iter().map(S::from_rational).collect();
    let profile = spec.profile.clone();
    interpolate(
        move |x: &[S]| {
            let s = profile.lifted(&x[axis]);
            b.iter().map(|bc| bc.clone() * s.clone()).collect()
        },
        mesh,
        spec.amplitude.len(),
    )
}

/// A named construction and the mesh it lives on.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstructionId {
    ZigZag(ZigZagProfile),
    Laminate { axis: usize, amplitude: Vec<Rational>, profile: ZigZagProfile },
}

impl ConstructionId {
    /// Parses `zigzag(eps)` or `laminate(axis,b1,..,bm,eps)` (1-based axis).
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        let inner = |prefix: &str| {
            id.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
        };
        let bad = |reason: &str| Error::invalid("construction", format!("`{id}`: {reason}"));
        if let Some(args) = inner("zigzag") {
            let eps = parse_rational(args).map_err(|e| bad(&e.to_string()))?;
            return Ok(ConstructionId::ZigZag(ZigZagProfile::new(eps)?));
        }
        if let Some(args) = inner("laminate") {
            let parts: Vec<&str> = args.split(',').map(str::trim).collect();
            if parts.len() < 3 {
                return Err(bad("expected axis, amplitudes and eps"));
            }
            let axis: usize = parts[0].parse().map_err(|_| bad("axis must be a positive integer"))?;
            if axis == 0 {
                return Err(bad("axis is 1-based"));
            }
            let amplitude = parts[1..parts.len() - 1]
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| bad(&e.to_string()))?;
            let eps = parse_rational(parts[parts.len() - 1]).map_err(|e| bad(&e.to_string()))?;
            return Ok(ConstructionId::Laminate { axis: axis - 1, amplitude, profile: ZigZagProfile::new(eps)? });
        }
        Err(Error::UnknownId(id.to_string()))
    }

    pub fn profile(&self) -> &ZigZagProfile {
        match self {
            ConstructionId::ZigZag(p) => p,
            ConstructionId::Laminate { profile, .. } => profile,
        }
    }

    pub fn codomain(&self) -> usize {
        match self {
            ConstructionId::ZigZag(_) => 2,
            ConstructionId::Laminate { amplitude, .. } => amplitude.len(),
        }
    }

    pub fn id(&self) -> String {
        match self {
            ConstructionId::ZigZag(p) => format!("zigzag({})", p.eps()),
            ConstructionId::Laminate { axis, amplitude, profile } => {
                let b: Vec<String> = amplitude.iter().map(|x| x.to_string()).collect();
                format!("laminate({},{},{})", axis + 1, b.join(","), profile.eps())
            }
        }
    }

    /// Builds the map on the `n`-cube with `k` subdivisions.
    pub fn build<S: Scalar>(&self, n: usize, k: usize) -> Result<PwAffineMap<S>> {
        self.profile().check_mesh(k)?;
        let mesh = Arc::new(build_kuhn_mesh(n, k)?);
        match self {
            ConstructionId::ZigZag(p) => zigzag_test_map(p.eps(), mesh),
            ConstructionId::Laminate { axis, amplitude, profile } => {
                let spec = LaminateSpec::along_axis(n, *axis, amplitude.clone(), profile.clone())?;
                laminate_test_map(&spec, mesh)
            }
        }
    }
}
