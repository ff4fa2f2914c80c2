//! Kuhn triangulation of the unit cube and piecewise-affine maps on it.
//!
//! Nodes are the lattice points `(i_1/k, ..., i_n/k)`, numbered
//! lexicographically with `i_1` most significant. Each lattice cell is split
//! into `n!` simplices, one per coordinate ordering `pi`, with vertices
//! `v_0 = corner`, `v_t = v_{t-1} + e_{pi_t}/k`. Simplex ids are
//! `cell * n! + rank(pi)` where permutations are ranked lexicographically.

use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use num::bigint::BigInt;
use num::integer::Integer;
use num::traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::scalar::{ArithmeticMode, Rational, Scalar};

/// Upper bound on the number of simplices a mesh may have.
pub const MAX_SIMPLICES: u128 = 1 << 22;
pub const MAX_DIM: usize = 4;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeMesh {
    n: usize,
    k: usize,
    perms: Vec<Vec<usize>>,
    node_strides: Vec<usize>,
    cell_strides: Vec<usize>,
    boundary_mask: Vec<bool>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Lexicographic rank of a permutation of `0..n`.
fn perm_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    let mut fact: usize = (1..n).product();
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count();
        rank += smaller * fact;
        fact = fact.checked_div(n - 1 - i).unwrap_or(fact);
    }
    rank
}

fn strides(n: usize, base: usize) -> Vec<usize> {
    let mut s = vec![1; n];
    for j in (0..n.saturating_sub(1)).rev() {
        s[j] = s[j + 1] * base;
    }
    s
}

/// Builds the Kuhn triangulation of `[0,1]^n` with `k` subdivisions per axis.
pub fn build_kuhn_mesh(n: usize, k: usize) -> Result<CubeMesh> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("mesh", "n and k must be positive"));
    }
    if n > MAX_DIM {
        return Err(Error::Unsupported(format!("mesh dimension {n} > {MAX_DIM}")));
    }
    let fact: u128 = (1..=n as u128).product();
    let simplices = (k as u128).pow(n as u32) * fact;
    if simplices > MAX_SIMPLICES {
        return Err(Error::MeshTooLarge { n, k, simplices, limit: MAX_SIMPLICES });
    }
    let node_strides = strides(n, k + 1);
    let num_nodes = (k + 1).pow(n as u32);
    let boundary_mask = (0..num_nodes)
        .map(|id| {
            node_strides
                .iter()
                .any(|&s| matches!((id / s) % (k + 1), i if i == 0 || i == k))
        })
        .collect();
    Ok(CubeMesh {
        n,
        k,
        perms: permutations(n),
        node_strides,
        cell_strides: strides(n, k),
        boundary_mask,
    })
}

impl CubeMesh {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_nodes(&self) -> usize {
        self.boundary_mask.len()
    }

    pub fn num_cells(&self) -> usize {
        self.k.pow(self.n as u32)
    }

    pub fn num_simplices(&self) -> usize {
        self.num_cells() * self.perms.len()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_mask[node]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| self.boundary_mask[i])
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| !self.boundary_mask[i])
    }

    /// Lattice indices `(i_1, ..., i_n)` of a node.
    pub fn node_lattice(&self, node: usize) -> Vec<usize> {
        self.node_strides.iter().map(|&s| (node / s) % (self.k + 1)).collect()
    }

    pub fn node_id(&self, lattice: &[usize]) -> usize {
        lattice.iter().zip(&self.node_strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates `i/k` of a node.
    pub fn node_point<S: Scalar>(&self, node: usize) -> Vec<S> {
        let k = self.k as i64;
        self.node_lattice(node)
            .into_iter()
            .map(|i| S::ratio(i as i64, k))
            .collect()
    }

    /// The coordinate ordering of a simplex.
    pub fn simplex_perm(&self, simplex: usize) -> &[usize] {
        &self.perms[simplex % self.perms.len()]
    }

    fn cell_corner(&self, cell: usize) -> Vec<usize> {
        self.cell_strides.iter().map(|&s| (cell / s) % self.k).collect()
    }

    /// The `n+1` node ids of a simplex, in path order `v_0, ..., v_n`.
    pub fn simplex_vertices(&self, simplex: usize) -> Vec<usize> {
        let cell = simplex / self.perms.len();
        let perm = self.simplex_perm(simplex);
        let mut node = self.node_id(&self.cell_corner(cell));
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(node);
        for &axis in perm {
            node += self.node_strides[axis];
            out.push(node);
        }
        out
    }

    /// Volume of every simplex, `1/(k^n n!)`.
    pub fn simplex_volume<S: Scalar>(&self) -> S {
        S::one() / S::from_int(self.num_simplices() as i64)
    }

    /// The simplex containing `x` (ties resolved toward the lower cell and
    /// the ordering that sorts equal coordinates by axis).
    pub fn locate<S: Scalar>(&self, x: &[S]) -> Result<(usize, Vec<S>)> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { context: "point location", expected: self.n, got: x.len() });
        }
        let k = S::from_int(self.k as i64);
        let mut corner = Vec::with_capacity(self.n);
        let mut frac = Vec::with_capacity(self.n);
        for xi in x {
            if *xi < S::zero() || *xi > S::one() {
                return Err(Error::invalid("x", "point outside the unit cube"));
            }
            let scaled = xi.clone() * k.clone();
            let c = (Scalar::floor(&scaled).to_f64() as usize).min(self.k - 1);
            frac.push(scaled - S::from_int(c as i64));
            corner.push(c);
        }
        let mut perm: Vec<usize> = (0..self.n).collect();
        perm.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
        let cell: usize = corner.iter().zip(&self.cell_strides).map(|(c, s)| c * s).sum();
        Ok((cell * self.perms.len() + perm_rank(&perm), frac))
    }
}

/// Exact nodal values as `num / den` with one shared denominator, kept when
/// every numerator fits in an `i64`. Gradients then reduce to integer
/// differences instead of big-rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IntegerForm {
    num: Vec<i64>,
    den: BigInt,
}

impl IntegerForm {
    fn of<S: Scalar>(values: &[S]) -> Option<Self> {
        if S::MODE != ArithmeticMode::Rational {
            return None;
        }
        let rats: Vec<Rational> = values.iter().map(Scalar::to_rational).collect::<Option<_>>()?;
        let den = rats.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
        let num = rats
            .iter()
            .map(|r| (r.numer() * (&den / r.denom())).to_i64())
            .collect::<Option<_>>()?;
        Some(IntegerForm { num, den })
    }

    /// The exact value of the numerator `g` over the shared denominator.
    pub(crate) fn value<S: Scalar>(&self, g: i128) -> S {
        S::from_rational(&Rational::new(BigInt::from(g), self.den.clone()))
    }
}

/// A continuous piecewise-affine map `Q -> R^m` given by nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct PwAffineMap<S> {
    mesh: Arc<CubeMesh>,
    m: usize,
    /// Node-major: `values[node * m + c]`.
    values: Vec<S>,
    zero_boundary: bool,
    integer: Option<Arc<IntegerForm>>,
}

impl<S: Scalar> PwAffineMap<S> {
    pub fn new(mesh: Arc<CubeMesh>, m: usize, values: Vec<S>) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be positive"));
        }
        if values.len() != mesh.num_nodes() * m {
            return Err(Error::DimensionMismatch {
                context: "nodal values",
                expected: mesh.num_nodes() * m,
                got: values.len(),
            });
        }
        let zero_boundary = mesh
            .boundary_nodes()
            .all(|node| values[node * m..(node + 1) * m].iter().all(|v| v.is_zero()));
        let integer = IntegerForm::of(&values).map(Arc::new);
        Ok(PwAffineMap { mesh, m, values, zero_boundary, integer })
    }

    pub fn zero(mesh: Arc<CubeMesh>, m: usize) -> Self {
        let values = vec![S::zero(); mesh.num_nodes() * m];
        let integer = IntegerForm::of(&values).map(Arc::new);
        PwAffineMap { mesh, m, values, zero_boundary: true, integer }
    }

    pub fn mesh(&self) -> &CubeMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<CubeMesh> {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.mesh.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    pub fn nodal_values(&self) -> &[S] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &[S] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    fn check_simplex(&self, simplex: usize) -> Result<()> {
        if simplex >= self.mesh.num_simplices() {
            return Err(Error::invalid("simplex_id", format!("{simplex} out of range")));
        }
        Ok(())
    }

    /// Constant gradient on a simplex, flattened component-major
    /// (`[c * n + j] = d phi_c / d x_j`).
    ///
    /// Kuhn edges `v_t - v_{t-1} = e_{pi_t}/k` make the vertex system
    /// triangular, so it is solved by consecutive differences.
    pub fn simplex_gradient(&self, simplex: usize) -> Result<Vec<S>> {
        self.check_simplex(simplex)?;
        Ok(self.gradient_unchecked(simplex))
    }

    pub(crate) fn integer_form(&self) -> Option<&IntegerForm> {
        self.integer.as_deref()
    }

    /// Gradient numerators over the shared denominator of `form`, in the
    /// layout of `gradient_unchecked`.
    pub(crate) fn integer_gradient(&self, form: &IntegerForm, simplex: usize, out: &mut Vec<i128>) {
        let n = self.mesh.n;
        let k = self.mesh.k as i128;
        let verts = self.mesh.simplex_vertices(simplex);
        let perm = self.mesh.simplex_perm(simplex);
        out.clear();
        out.resize(n * self.m, 0);
        for (t, &axis) in perm.iter().enumerate() {
            let (prev, next) = (verts[t] * self.m, verts[t + 1] * self.m);
            for c in 0..self.m {
                out[c * n + axis] = (form.num[next + c] as i128 - form.num[prev + c] as i128) * k;
            }
        }
    }

    pub(crate) fn gradient_unchecked(&self, simplex: usize) -> Vec<S> {
        let n = self.mesh.n;
        let k = S::from_int(self.mesh.k as i64);
        let verts = self.mesh.simplex_vertices(simplex);
        let perm = self.mesh.simplex_perm(simplex);
        let mut grad = vec![S::zero(); n * self.m];
        for (t, &axis) in perm.iter().enumerate() {
            let prev = self.value(verts[t]);
            let next = self.value(verts[t + 1]);
            for c in 0..self.m {
                grad[c * n + axis] = (next[c].clone() - prev[c].clone()) * k.clone();
            }
        }
        grad
    }

    /// Same gradient, obtained by Gaussian elimination on the general
    /// `(n+1)`-vertex affine system.
    pub fn simplex_gradient_by_solve(&self, simplex: usize) -> Result<Vec<S>> {
        self.check_simplex(simplex)?;
        let verts = self.mesh.simplex_vertices(simplex);
        let points: Vec<Vec<S>> = verts.iter().map(|&v| self.mesh.node_point(v)).collect();
        let values: Vec<Vec<S>> = verts.iter().map(|&v| self.value(v).to_vec()).collect();
        solve_affine_gradient(&points, &values)
    }

    /// Squared Euclidean norm of the largest boundary value.
    pub fn boundary_sup_sq(&self) -> S {
        self.mesh
            .boundary_nodes()
            .map(|node| {
                self.value(node)
                    .iter()
                    .fold(S::zero(), |acc, v| acc + v.clone() * v.clone())
            })
            .fold(S::zero(), S::max_of)
    }

    /// `max_{x in dQ} |phi(x)|` with the Euclidean norm. For a
    /// piecewise-affine map the max over boundary nodes is the max over the
    /// whole boundary.
    pub fn boundary_sup(&self) -> f64 {
        self.boundary_sup_sq().to_f64().sqrt()
    }

    /// `||D phi||_inf` with the max-absolute-entry matrix norm.
    pub fn grad_sup_norm(&self) -> S {
        let total = self.mesh.num_simplices();
        if let Some(form) = self.integer_form() {
            let max = (0..total.div_ceil(CHUNK))
                .into_par_iter()
                .map(|chunk| {
                    let mut g = Vec::new();
                    let mut best = 0i128;
                    for s in chunk * CHUNK..((chunk + 1) * CHUNK).min(total) {
                        self.integer_gradient(form, s, &mut g);
                        best = g.iter().fold(best, |b, x| b.max(x.abs()));
                    }
                    best
                })
                .reduce(|| 0, i128::max);
            return form.value(max);
        }
        (0..total.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                (chunk * CHUNK..((chunk + 1) * CHUNK).min(total))
                    .flat_map(|s| self.gradient_unchecked(s))
                    .map(|g| Scalar::abs(&g))
                    .fold(S::zero(), S::max_of)
            })
            .reduce(S::zero, S::max_of)
    }

    /// Evaluates the interpolant at a point of `Q`.
    pub fn eval_at(&self, x: &[S]) -> Result<Vec<S>> {
        let (simplex, frac) = self.mesh.locate(x)?;
        let verts = self.mesh.simplex_vertices(simplex);
        let perm = self.mesh.simplex_perm(simplex);
        let mut out = self.value(verts[0]).to_vec();
        for (t, &axis) in perm.iter().enumerate() {
            let prev = self.value(verts[t]);
            let next = self.value(verts[t + 1]);
            for c in 0..self.m {
                out[c] = out[c].clone() + frac[axis].clone() * (next[c].clone() - prev[c].clone());
            }
        }
        Ok(out)
    }

    /// Converts the nodal values exactly into another scalar type.
    pub fn to_scalar<T: Scalar>(&self) -> Result<PwAffineMap<T>> {
        let values = self
            .values
            .iter()
            .map(|v| {
                v.to_rational()
                    .map(|r| T::from_rational(&r))
                    .ok_or_else(|| Error::invalid("nodal_values", "non-finite value"))
            })
            .collect::<Result<Vec<T>>>()?;
        PwAffineMap::new(self.mesh.clone(), self.m, values)
    }

    /// `{n, m, k, nodal_values, zero_boundary}` with node-ordered values.
    pub fn to_json(&self) -> Value {
        let nodal: Vec<Value> = self
            .values
            .chunks(self.m)
            .map(|v| Value::Array(v.iter().map(Scalar::to_json).collect()))
            .collect();
        json!({
            "n": self.mesh.n,
            "m": self.m,
            "k": self.mesh.k,
            "nodal_values": nodal,
            "zero_boundary": self.zero_boundary,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |name: &str| {
            v.get(name)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| Error::invalid(name, "missing or not an integer"))
        };
        let (n, m, k) = (field("n")?, field("m")?, field("k")?);
        let mesh = Arc::new(build_kuhn_mesh(n, k)?);
        let nodal = v
            .get("nodal_values")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::invalid("nodal_values", "missing"))?;
        let mut values = Vec::with_capacity(nodal.len() * m);
        for node in nodal {
            let arr = node
                .as_array()
                .filter(|a| a.len() == m)
                .ok_or_else(|| Error::invalid("nodal_values", "each node needs m values"))?;
            for x in arr {
                values.push(S::from_json(x)?);
            }
        }
        let map = PwAffineMap::new(mesh, m, values)?;
        if let Some(flag) = v.get("zero_boundary").and_then(Value::as_bool) {
            if flag != map.zero_boundary {
                return Err(Error::invalid("zero_boundary", "flag disagrees with nodal values"));
            }
        }
        Ok(map)
    }
}

/// Samples `psi` at every node. `psi` must be defined at every node.
pub fn interpolate<S: Scalar>(
    psi: impl Fn(&[S]) -> Vec<S>,
    mesh: Arc<CubeMesh>,
    m: usize,
) -> Result<PwAffineMap<S>> {
    let mut values = Vec::with_capacity(mesh.num_nodes() * m);
    for node in 0..mesh.num_nodes() {
        let v = psi(&mesh.node_point::<S>(node));
        if v.len() != m {
            return Err(Error::DimensionMismatch { context: "interpolated value", expected: m, got: v.len() });
        }
        values.extend(v);
    }
    PwAffineMap::new(mesh, m, values)
}

/// Gradient of the affine map through `n+1` points with the given values,
/// by Gaussian elimination with partial pivoting. Returns the gradient
/// flattened component-major.
pub fn solve_affine_gradient<S: Scalar>(points: &[Vec<S>], values: &[Vec<S>]) -> Result<Vec<S>> {
    let n = points.len().saturating_sub(1);
    let m = values.first().map_or(0, Vec::len);
    if n == 0 || values.len() != n + 1 || points.iter().any(|p| p.len() != n) {
        return Err(Error::invalid("simplex", "need n+1 points in R^n"));
    }
    // rows: (p_t - p_0) . g_c = f_c(p_t) - f_c(p_0)
    let mut a: Vec<Vec<S>> = (1..=n)
        .map(|t| (0..n).map(|j| points[t][j].clone() - points[0][j].clone()).collect())
        .collect();
    let mut rhs: Vec<Vec<S>> = (1..=n)
        .map(|t| (0..m).map(|c| values[t][c].clone() - values[0][c].clone()).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .max_by(|&x, &y| {
                Scalar::abs(&a[x][col])
                    .partial_cmp(&Scalar::abs(&a[y][col]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::invalid("simplex", "degenerate (zero volume)"))?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / a[col][col].clone();
            for j in col..n {
                let v = a[col][j].clone();
                a[r][j] = a[r][j].clone() - factor.clone() * v;
            }
            for c in 0..m {
                let v = rhs[col][c].clone();
                rhs[r][c] = rhs[r][c].clone() - factor.clone() * v;
            }
        }
    }
    let mut grad = vec![S::zero(); n * m];
    for j in 0..n {
        for c in 0..m {
            grad[c * n + j] = rhs[j][c].clone() / a[j][j].clone();
        }
    }
    Ok(grad)
}

/// Whether `d phi / d x_axis` vanishes on every simplex.
pub fn axis_derivative_vanishes<S: Scalar>(phi: &PwAffineMap<S>, axis: usize) -> bool {
    let n = phi.n();
    (0..phi.mesh().num_simplices()).all(|s| {
        let g = phi.gradient_unchecked(s);
        (0..phi.m()).all(|c| g[c * n + axis].is_zero())
    })
}

/// Convenience for exact maps.
pub type ExactMap = PwAffineMap<Rational>;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(p: i64, d: i64) -> Rational {
        Rational::ratio(p, d)
    }

    /// |det| / n! of the edge matrix, by cofactor expansion.
    fn det(m: &[Vec<Rational>]) -> Rational {
        if m.len() == 1 {
            return m[0][0].clone();
        }
        let mut acc = r(0, 1);
        for (j, x) in m[0].iter().enumerate() {
            let minor: Vec<Vec<Rational>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, v)| v.clone()).collect())
                .collect();
            let term = x * det(&minor);
            acc = if j % 2 == 0 { acc + term } else { acc - term };
        }
        acc
    }

    fn volume_by_det(mesh: &CubeMesh, s: usize) -> Rational {
        let verts = mesh.simplex_vertices(s);
        let p0: Vec<Rational> = mesh.node_point(verts[0]);
        let edges: Vec<Vec<Rational>> = verts[1..]
            .iter()
            .map(|&v| mesh.node_point::<Rational>(v).iter().zip(&p0).map(|(a, b)| a - b).collect())
            .collect();
        let fact: i64 = (1..=mesh.n() as i64).product();
        num::traits::Signed::abs(&det(&edges)) / r(fact, 1)
    }

    #[test]
    fn integer_gradients_match_the_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, k, m) in [(1, 5, 2), (2, 3, 2), (3, 2, 1), (4, 1, 3)] {
            let mesh = Arc::new(build_kuhn_mesh(n, k).unwrap());
            let values: Vec<Rational> = (0..mesh.num_nodes() * m)
                .map(|_| r(rng.random_range(-50..=50), rng.random_range(1..=12)))
                .collect();
            let phi = PwAffineMap::new(mesh.clone(), m, values).unwrap();
            let form = phi.integer_form().expect("small rationals have an integer form");
            let mut g = Vec::new();
            for s in 0..mesh.num_simplices() {
                phi.integer_gradient(form, s, &mut g);
                let exact: Vec<Rational> = g.iter().map(|&x| form.value(x)).collect();
                assert_eq!(exact, phi.simplex_gradient_by_solve(s).unwrap());
            }
        }
        let mesh = Arc::new(build_kuhn_mesh(2, 2).unwrap());
        let huge = Rational::new(BigInt::from(3).pow(50u32), 7.into());
        let phi = PwAffineMap::new(mesh.clone(), 1, vec![huge; mesh.num_nodes()]).unwrap();
        assert!(phi.integer_form().is_none());
        assert!(PwAffineMap::<f64>::zero(mesh, 1).integer_form().is_none());
    }

    #[test]
    fn mesh_counts() {
        let m = build_kuhn_mesh(2, 1).unwrap();
        assert_eq!((m.num_nodes(), m.num_simplices()), (4, 2));
        let m = build_kuhn_mesh(2, 4).unwrap();
        assert_eq!((m.num_nodes(), m.num_simplices()), (25, 32));
        let m = build_kuhn_mesh(3, 2).unwrap();
        assert_eq!((m.num_nodes(), m.num_simplices()), (27, 48));
    }

    #[test]
    fn simplices_tile_the_cube() {
        for (n, k) in [(1, 5), (2, 1), (2, 3), (3, 2), (4, 1)] {
            let mesh = build_kuhn_mesh(n, k).unwrap();
            let mut total = r(0, 1);
            for s in 0..mesh.num_simplices() {
                let v = volume_by_det(&mesh, s);
                assert!(v > r(0, 1), "degenerate simplex {s}");
                assert_eq!(v, mesh.simplex_volume::<Rational>());
                total += v;
            }
            assert_eq!(total, r(1, 1), "n={n} k={k}");
        }
    }

    #[test]
    fn simplex_interiors_are_disjoint() {
        // every interior sample point lies in exactly one closed simplex
        // unless it sits on a shared face, which random points avoid
        let mesh = Arc::new(build_kuhn_mesh(3, 2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x: Vec<Rational> = (0..3).map(|_| r(rng.random_range(1..1000), 1000)).collect();
            let mut hits = 0;
            for s in 0..mesh.num_simplices() {
                let verts: Vec<Vec<Rational>> =
                    mesh.simplex_vertices(s).iter().map(|&v| mesh.node_point(v)).collect();
                // barycentric coords via the affine solve of x -> x_j
                let coords: Vec<Vec<Rational>> = verts.clone();
                let lambda_grads: Vec<Vec<Rational>> = (0..4)
                    .map(|t| {
                        let vals: Vec<Vec<Rational>> =
                            (0..4).map(|u| vec![if u == t { r(1, 1) } else { r(0, 1) }]).collect();
                        solve_affine_gradient(&coords, &vals).unwrap()
                    })
                    .collect();
                let inside = (0..4).all(|t| {
                    let l: Rational = (0..3)
                        .map(|j| &lambda_grads[t][j] * (&x[j] - &verts[t][j]))
                        .fold(r(1, 1), |a, b| a + b);
                    l >= r(0, 1)
                });
                if inside {
                    hits += 1;
                }
            }
            assert!(hits >= 1);
            let (loc, _) = mesh.locate(&x).unwrap();
            assert!(loc < mesh.num_simplices());
        }
    }

    #[test]
    fn boundary_flags() {
        let mesh = build_kuhn_mesh(2, 4).unwrap();
        for node in 0..mesh.num_nodes() {
            let l = mesh.node_lattice(node);
            let expect = l.iter().any(|&i| i == 0 || i == 4);
            assert_eq!(mesh.is_boundary(node), expect);
        }
        assert_eq!(mesh.boundary_nodes().count(), 16);
        assert_eq!(mesh.node_id(&[1, 2]), 7);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_kuhn_mesh(0, 3).is_err());
        assert!(build_kuhn_mesh(2, 0).is_err());
        assert!(matches!(build_kuhn_mesh(2, 5000), Err(Error::MeshTooLarge { .. })));
        assert!(matches!(build_kuhn_mesh(5, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn perm_rank_matches_enumeration_order() {
        for n in 1..=4 {
            for (i, p) in permutations(n).iter().enumerate() {
                assert_eq!(perm_rank(p), i);
            }
        }
    }

    #[test]
    fn affine_function_has_exact_gradient() {
        let mesh = Arc::new(build_kuhn_mesh(2, 1).unwrap());
        let phi = interpolate(|x: &[Rational]| vec![x[0].clone()], mesh, 1).unwrap();
        assert!(!phi.zero_boundary());
        for s in 0..2 {
            assert_eq!(phi.simplex_gradient(s).unwrap(), vec![r(1, 1), r(0, 1)]);
        }
        assert!(phi.simplex_gradient(2).is_err());
    }

    #[test]
    fn zero_map_facts() {
        let mesh = Arc::new(build_kuhn_mesh(2, 3).unwrap());
        let phi = interpolate(|_: &[Rational]| vec![r(0, 1), r(0, 1)], mesh.clone(), 2).unwrap();
        assert!(phi.zero_boundary());
        assert_eq!(phi, PwAffineMap::zero(mesh, 2));
        for s in 0..phi.mesh().num_simplices() {
            assert!(phi.simplex_gradient(s).unwrap().iter().all(|g| *g == r(0, 1)));
        }
        assert_eq!(phi.boundary_sup_sq(), r(0, 1));
        assert_eq!(phi.grad_sup_norm(), r(0, 1));
    }

    #[test]
    fn identity_map_norm() {
        let mesh = Arc::new(build_kuhn_mesh(2, 3).unwrap());
        let phi = interpolate(|x: &[Rational]| x.to_vec(), mesh, 2).unwrap();
        assert_eq!(phi.grad_sup_norm(), r(1, 1));
        for s in 0..phi.mesh().num_simplices() {
            assert_eq!(phi.simplex_gradient(s).unwrap(), vec![r(1, 1), r(0, 1), r(0, 1), r(1, 1)]);
        }
    }

    #[test]
    fn parabola_boundary_sup() {
        // phi = x1 (1 - x1): zero on x1 in {0,1}, max 1/4 at x1 = 1/2 on x2 edges
        let mesh = Arc::new(build_kuhn_mesh(2, 4).unwrap());
        let phi = interpolate(|x: &[Rational]| vec![&x[0] * (r(1, 1) - &x[0])], mesh, 1).unwrap();
        // exhaustive over boundary nodes
        let mut best = r(0, 1);
        for node in phi.mesh().boundary_nodes() {
            let v = phi.value(node)[0].clone();
            if v > best {
                best = v;
            }
        }
        assert_eq!(best, r(1, 4));
        assert_eq!(phi.boundary_sup_sq(), r(1, 16));
        assert_eq!(phi.boundary_sup(), 0.25);
    }

    #[test]
    fn json_round_trip_exact_and_float() {
        let mesh = Arc::new(build_kuhn_mesh(2, 2).unwrap());
        let phi = interpolate(|x: &[Rational]| vec![&x[0] * &x[1], r(1, 3)], mesh, 2).unwrap();
        let back = ExactMap::from_json(&phi.to_json()).unwrap();
        assert_eq!(back, phi);
        let f = phi.to_scalar::<f64>().unwrap();
        assert_eq!(PwAffineMap::<f64>::from_json(&f.to_json()).unwrap(), f);
        let mut bad = phi.to_json();
        bad["zero_boundary"] = Value::Bool(true);
        assert!(ExactMap::from_json(&bad).is_err());
        // node ordering is lexicographic, last index fastest
        assert_eq!(phi.to_json()["nodal_values"][1][0], "0");
        assert_eq!(phi.to_json()["nodal_values"][4][0], "1/4");
        assert_eq!(phi.to_json()["nodal_values"][5][0], "1/2");
    }

    #[test]
    fn eval_reproduces_nodal_values() {
        let mesh = Arc::new(build_kuhn_mesh(3, 2).unwrap());
        let phi = interpolate(|x: &[Rational]| vec![&x[0] * &x[2] - &x[1]], mesh.clone(), 1).unwrap();
        for node in 0..mesh.num_nodes() {
            let p = mesh.node_point::<Rational>(node);
            assert_eq!(phi.eval_at(&p).unwrap(), phi.value(node).to_vec());
        }
    }

    #[test]
    fn parallel_norm_matches_sequential_scan() {
        let mesh = Arc::new(build_kuhn_mesh(2, 64).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = PwAffineMap::new(mesh.clone(), 1, values).unwrap();
        let seq = (0..mesh.num_simplices())
            .rev()
            .flat_map(|s| phi.simplex_gradient(s).unwrap())
            .map(f64::abs)
            .fold(0.0, f64::max);
        assert_eq!(phi.grad_sup_norm(), seq);
    }

    proptest! {
        #[test]
        fn affine_maps_are_reproduced(n in 1usize..=3, k in 1usize..=4, m in 1usize..=2, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<Rational> = (0..n * m).map(|_| r(rng.random_range(-9..10), rng.random_range(1..5))).collect();
            let c: Vec<Rational> = (0..m).map(|_| r(rng.random_range(-9..10), 3)).collect();
            let mesh = Arc::new(build_kuhn_mesh(n, k).unwrap());
            let phi = interpolate(
                |x: &[Rational]| (0..m).map(|ci| (0..n).fold(c[ci].clone(), |acc, j| acc + &b[ci * n + j] * &x[j])).collect(),
                mesh.clone(),
                m,
            ).unwrap();
            for s in 0..mesh.num_simplices() {
                prop_assert_eq!(&phi.simplex_gradient(s).unwrap(), &b);
                prop_assert_eq!(&phi.simplex_gradient_by_solve(s).unwrap(), &b);
            }
            let pf = phi.to_scalar::<f64>().unwrap();
            let bf: Vec<f64> = b.iter().map(Scalar::to_f64).collect();
            for s in 0..mesh.num_simplices() {
                for (g, e) in pf.simplex_gradient(s).unwrap().iter().zip(&bf) {
                    prop_assert!((g - e).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn kuhn_and_general_solve_agree(n in 1usize..=3, k in 1usize..=3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mesh = Arc::new(build_kuhn_mesh(n, k).unwrap());
            let values: Vec<Rational> = (0..mesh.num_nodes() * 2).map(|_| r(rng.random_range(-20..21), 8)).collect();
            let phi = PwAffineMap::new(mesh.clone(), 2, values).unwrap();
            for s in 0..mesh.num_simplices() {
                prop_assert_eq!(phi.simplex_gradient(s).unwrap(), phi.simplex_gradient_by_solve(s).unwrap());
            }
        }
    }
}
