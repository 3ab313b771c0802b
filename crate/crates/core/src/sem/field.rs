use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::{basis_table, curved_points, eval_modes, n_modes, straight_points};
use super::mesh::TriMesh;
use super::SemError;
use crate::geometry::Vec2;

const DUMP_MAGIC: &str = "quadfield-field";
const DUMP_VERSION: u32 = 1;

/// Guiding field value with physical gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValue {
    pub u: f64,
    pub v: f64,
    pub grad_u: Vec2,
    pub grad_v: Vec2,
}

impl FieldValue {
    pub fn magnitude(&self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// Per-element modal expansions of (u, v).
#[derive(Clone, Debug)]
pub struct FieldSolution {
    mesh: Arc<TriMesh>,
    orders: Vec<usize>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl FieldSolution {
    pub fn new(mesh: Arc<TriMesh>, orders: Vec<usize>, u: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self, SemError> {
        let n = mesh.n_elements();
        if orders.len() != n || u.len() != n || v.len() != n {
            return Err(SemError::Format(format!("field has wrong element count for a {n}-element mesh")));
        }
        for e in 0..n {
            let want = n_modes(orders[e]);
            for c in [&u[e], &v[e]] {
                if c.len() != want {
                    return Err(SemError::CoefficientLength { expected: want, got: c.len() });
                }
            }
        }
        Ok(Self { mesh, orders, u, v })
    }

    /// Element-wise L2 projection of an analytic field.
    pub fn project(mesh: Arc<TriMesh>, orders: Vec<usize>, f: impl Fn(Vec2) -> (f64, f64)) -> Result<Self, SemError> {
        let mut u = Vec::with_capacity(orders.len());
        let mut v = Vec::with_capacity(orders.len());
        for (e, &p) in orders.iter().enumerate() {
            let nq = if mesh.is_curved(e) { curved_points(p) } else { straight_points(p) } + 2;
            let t = basis_table(p, nq);
            let n = n_modes(p);
            let mut m = DMatrix::zeros(n, n);
            let mut rhs = DMatrix::zeros(n, 2);
            for (q, xi) in t.rule.points.iter().enumerate() {
                let (x, jac) = mesh.map(e, *xi);
                let w = t.rule.weights[q] * jac.determinant();
                let (fu, fv) = f(x);
                let phi = &t.values[q];
                for i in 0..n {
                    rhs[(i, 0)] += w * fu * phi[i];
                    rhs[(i, 1)] += w * fv * phi[i];
                    for j in 0..n {
                        m[(i, j)] += w * phi[i] * phi[j];
                    }
                }
            }
            let sol = m.cholesky().ok_or(SemError::SingularMass)?.solve(&rhs);
            u.push(sol.column(0).iter().copied().collect());
            v.push(sol.column(1).iter().copied().collect());
        }
        Self::new(mesh, orders, u, v)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn order(&self, e: usize) -> usize {
        self.orders[e]
    }

    pub fn coeffs_u(&self, e: usize) -> &[f64] {
        &self.u[e]
    }

    pub fn coeffs_v(&self, e: usize) -> &[f64] {
        &self.v[e]
    }

    /// Values and physical gradients at a reference point of element `e`.
    pub fn eval(&self, e: usize, xi: [f64; 2]) -> FieldValue {
        let phi = eval_modes(self.orders[e], xi);
        let (mut u, mut v) = (0.0, 0.0);
        let (mut du, mut dv) = ([0.0; 2], [0.0; 2]);
        for (k, d) in phi.iter().enumerate() {
            let (cu, cv) = (self.u[e][k], self.v[e][k]);
            u += cu * d.v;
            v += cv * d.v;
            for a in 0..2 {
                du[a] += cu * d.d[a];
                dv[a] += cv * d.d[a];
            }
        }
        let (_, jac) = self.mesh.map(e, xi);
        let jit = jac.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros).transpose();
        FieldValue { u, v, grad_u: jit * Vec2::new(du[0], du[1]), grad_v: jit * Vec2::new(dv[0], dv[1]) }
    }

    /// Values only.
    pub fn value(&self, e: usize, xi: [f64; 2]) -> (f64, f64) {
        let phi = eval_modes(self.orders[e], xi);
        phi.iter().enumerate().fold((0.0, 0.0), |(u, v), (k, d)| (u + self.u[e][k] * d.v, v + self.v[e][k] * d.v))
    }

    /// Locate a physical point and evaluate there.
    pub fn eval_at(&self, x: Vec2, hint: Option<usize>) -> Option<(usize, FieldValue)> {
        let (e, xi) = self.mesh.locate(x, hint)?;
        Some((e, self.eval(e, xi)))
    }

    /// Copy with every element raised to at least `p` by zero padding.
    pub fn embedded(&self, p: usize) -> Self {
        let pad = |c: &Vec<f64>, q: usize| {
            let mut c = c.clone();
            c.resize(n_modes(q), 0.0);
            c
        };
        let orders: Vec<usize> = self.orders.iter().map(|&q| q.max(p)).collect();
        let u = self.u.iter().zip(&orders).map(|(c, &q)| pad(c, q)).collect();
        let v = self.v.iter().zip(&orders).map(|(c, &q)| pad(c, q)).collect();
        Self { mesh: self.mesh.clone(), orders, u, v }
    }

    /// Physical mass matrix of element `e` at its own order.
    pub fn element_mass(&self, e: usize) -> DMatrix<f64> {
        element_mass(&self.mesh, e, self.orders[e])
    }

    /// Largest |v| over quadrature points and vertices of every element.
    pub fn max_magnitude(&self) -> f64 {
        let mut m: f64 = 0.0;
        for e in 0..self.mesh.n_elements() {
            let p = self.orders[e];
            let t = basis_table(p, straight_points(p));
            for phi in &t.values {
                let (u, v) = dot2(&self.u[e], &self.v[e], phi);
                m = m.max(u.hypot(v));
            }
        }
        m
    }

    /// L2 norm of (u - f_u, v - f_v) using a rule with `extra` points beyond the default.
    pub fn l2_error(&self, f: impl Fn(Vec2) -> (f64, f64), extra: usize) -> (f64, f64) {
        let (mut eu, mut ev) = (0.0, 0.0);
        for e in 0..self.mesh.n_elements() {
            let p = self.orders[e];
            let nq = if self.mesh.is_curved(e) { curved_points(p) } else { straight_points(p) } + extra;
            let t = basis_table(p, nq);
            for (q, xi) in t.rule.points.iter().enumerate() {
                let (x, jac) = self.mesh.map(e, *xi);
                let w = t.rule.weights[q] * jac.determinant();
                let (u, v) = dot2(&self.u[e], &self.v[e], &t.values[q]);
                let (fu, fv) = f(x);
                eu += w * (u - fu).powi(2);
                ev += w * (v - fv).powi(2);
            }
        }
        (eu.sqrt(), ev.sqrt())
    }

    /// Versioned text dump of orders and modal coefficients.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{DUMP_MAGIC} {DUMP_VERSION}").unwrap();
        writeln!(s, "elements {}", self.orders.len()).unwrap();
        for e in 0..self.orders.len() {
            writeln!(s, "element {} order {}", e, self.orders[e]).unwrap();
            for c in [&self.u[e], &self.v[e]] {
                let line: Vec<String> = c.iter().map(|x| format!("{x:e}")).collect();
                writeln!(s, "{}", line.join(" ")).unwrap();
            }
        }
        s
    }

    pub fn from_dump(text: &str, mesh: Arc<TriMesh>) -> Result<Self, SemError> {
        let bad = |m: &str| SemError::Format(format!("field dump: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let mut hp = header.split_whitespace();
        if hp.next() != Some(DUMP_MAGIC) {
            return Err(bad("missing header"));
        }
        let version: u32 = hp.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version"))?;
        if version != DUMP_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("elements "))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("missing element count"))?;
        let mut orders = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let parse = |l: Option<&str>| -> Result<Vec<f64>, SemError> {
            l.ok_or_else(|| bad("truncated"))?
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|_| bad("bad coefficient")))
                .collect()
        };
        for e in 0..n {
            let head = lines.next().ok_or_else(|| bad("truncated"))?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "element" || parts[1].parse::<usize>().ok() != Some(e) {
                return Err(bad("bad element header"));
            }
            orders.push(parts[3].parse().map_err(|_| bad("bad order"))?);
            u.push(parse(lines.next())?);
            v.push(parse(lines.next())?);
        }
        Self::new(mesh, orders, u, v)
    }
}

fn dot2(cu: &[f64], cv: &[f64], phi: &[f64]) -> (f64, f64) {
    let n = cu.len();
    let mut u = 0.0;
    let mut v = 0.0;
    for k in 0..n {
        u += cu[k] * phi[k];
        v += cv[k] * phi[k];
    }
    (u, v)
}

/// Physical mass matrix of element `e` for the order-`p` basis.
pub fn element_mass(mesh: &TriMesh, e: usize, p: usize) -> DMatrix<f64> {
    let nq = if mesh.is_curved(e) { curved_points(p) } else { straight_points(p) };
    let t = basis_table(p, nq);
    let n = n_modes(p);
    let mut m = DMatrix::zeros(n, n);
    for (q, xi) in t.rule.points.iter().enumerate() {
        let w = t.rule.weights[q] * mesh.map(e, *xi).1.determinant();
        let phi = &t.values[q];
        for i in 0..n {
            for j in i..n {
                m[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::super::mesher;
    use super::*;
    use crate::geometry::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_mesh() -> Arc<TriMesh> {
        Arc::new(mesher::structured(&fixtures::unit_square(), "square", 3).unwrap())
    }

    #[test]
    fn constant_and_linear_fields() {
        let mesh = square_mesh();
        let n = mesh.n_elements();
        let f = FieldSolution::project(mesh.clone(), vec![3; n], |x| (1.0, x.x)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = Vec2::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            let (_, val) = f.eval_at(x, None).unwrap();
            assert!((val.u - 1.0).abs() < 1e-12);
            assert!((val.v - x.x).abs() < 1e-12);
            assert!((val.grad_v - Vec2::new(1.0, 0.0)).norm() < 1e-11);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = fixtures::half_disc();
        let mesh = Arc::new(mesher::structured(&d, "half_disc", 3).unwrap());
        let n = mesh.n_elements();
        let f = FieldSolution::project(mesh.clone(), vec![5; n], |x| ((2.0 * x.x).sin() * x.y, x.x * x.x - x.y)).unwrap();
        let h = 1e-6;
        for e in 0..n {
            let xi = [-0.5, -0.3];
            let (x, _) = mesh.map(e, xi);
            let val = f.eval(e, xi);
            for dir in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                let xp = mesh.inverse_map(e, x + dir * h).unwrap();
                let xm = mesh.inverse_map(e, x - dir * h).unwrap();
                let (up, vp) = f.value(e, xp);
                let (um, vm) = f.value(e, xm);
                let fu = (up - um) / (2.0 * h);
                let fv = (vp - vm) / (2.0 * h);
                assert!((fu - val.grad_u.dot(&dir)).abs() <= 1e-5 * (1.0 + fu.abs()));
                assert!((fv - val.grad_v.dot(&dir)).abs() <= 1e-5 * (1.0 + fv.abs()));
            }
        }
    }

    #[test]
    fn embedding_preserves_values() {
        let mesh = square_mesh();
        let n = mesh.n_elements();
        let f = FieldSolution::project(mesh.clone(), vec![4; n], |x| (x.x.exp(), x.y.cos())).unwrap();
        let g = f.embedded(5);
        for e in 0..n {
            for xi in [[-0.2, -0.5], [0.3, -0.9], [-1.0, 1.0]] {
                let a = f.value(e, xi);
                let b = g.value(e, xi);
                assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let mesh = square_mesh();
        let n = mesh.n_elements();
        let orders: Vec<usize> = (0..n).map(|e| 2 + e % 3).collect();
        let f = FieldSolution::project(mesh.clone(), orders, |x| (x.x * x.y, 1.0 / (1.0 + x.x))).unwrap();
        let back = FieldSolution::from_dump(&f.to_dump(), mesh.clone()).unwrap();
        assert_eq!(back.orders(), f.orders());
        for e in 0..n {
            assert_eq!(back.coeffs_u(e), f.coeffs_u(e));
            assert_eq!(back.coeffs_v(e), f.coeffs_v(e));
        }
        assert!(FieldSolution::from_dump("garbage", mesh).is_err());
    }
}
