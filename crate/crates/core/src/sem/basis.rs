//! Hierarchical modal basis on the reference triangle
//! {(x, y) : x, y >= -1, x + y <= 0}, built from barycentric coordinates
//! and scaled Jacobi polynomials.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use super::SemError;
use crate::quadrature;

/// Number of modes of the order-`p` basis.
pub fn n_modes(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Reference vertices in local order.
pub const REF_VERTICES: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];

/// Local edges as (first vertex, second vertex).
pub const EDGE_VERTICES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Vertex(usize),
    /// Edge mode of polynomial degree `degree` (>= 2) on local edge `edge`.
    Edge { edge: usize, degree: usize },
    /// Bubble mode with indices i, j >= 1, degree i + j + 1.
    Interior { i: usize, j: usize },
}

impl Mode {
    pub fn degree(&self) -> usize {
        match *self {
            Mode::Vertex(_) => 1,
            Mode::Edge { degree, .. } => degree,
            Mode::Interior { i, j } => i + j + 1,
        }
    }
}

/// Mode list in hierarchical order: vertices, then for each degree k the
/// three edge modes followed by the bubbles of degree k.
pub fn modes(p: usize) -> Vec<Mode> {
    let mut m: Vec<Mode> = (0..3).map(Mode::Vertex).collect();
    for k in 2..=p {
        for edge in 0..3 {
            m.push(Mode::Edge { edge, degree: k });
        }
        for i in 1..k.saturating_sub(1) {
            m.push(Mode::Interior { i, j: k - 1 - i });
        }
    }
    m
}

/// Value with gradient in reference coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: [f64; 2],
}

impl Dual {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0, 0.0] }
    }
    fn scale(self, s: f64) -> Self {
        Self { v: self.v * s, d: [self.d[0] * s, self.d[1] * s] }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: [self.d[0] + o.d[0], self.d[1] + o.d[1]] }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: [self.d[0] - o.d[0], self.d[1] - o.d[1]] }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        self.scale(-1.0)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: [self.d[0] * o.v + self.v * o.d[0], self.d[1] * o.v + self.v * o.d[1]],
        }
    }
}

/// Barycentric coordinates of a reference point.
pub fn barycentric(xi: [f64; 2]) -> [f64; 3] {
    [-(xi[0] + xi[1]) / 2.0, (1.0 + xi[0]) / 2.0, (1.0 + xi[1]) / 2.0]
}

fn barycentric_dual(xi: [f64; 2]) -> [Dual; 3] {
    let l = barycentric(xi);
    [
        Dual { v: l[0], d: [-0.5, -0.5] },
        Dual { v: l[1], d: [0.5, 0.0] },
        Dual { v: l[2], d: [0.0, 0.5] },
    ]
}

/// Scaled Jacobi polynomials t^n P_n^{(a,b)}(x / t) for n = 0..=nmax.
fn scaled_jacobi(nmax: usize, a: f64, b: f64, x: Dual, t: Dual) -> Vec<Dual> {
    let mut q = Vec::with_capacity(nmax + 1);
    q.push(Dual::constant(1.0));
    if nmax >= 1 {
        q.push((x.scale(a + b + 2.0) + t.scale(a - b)).scale(0.5));
    }
    let t2 = t * t;
    for n in 2..=nmax {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let an = 2.0 * nf * (nf + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * s * (s - 2.0);
        let c2 = (s - 1.0) * (a * a - b * b);
        let c3 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
        let next = (x.scale(c1) + t.scale(c2)) * q[n - 1] - t2 * q[n - 2].scale(c3);
        q.push(next.scale(1.0 / an));
    }
    q
}

/// Evaluate every order-`p` mode (local orientation) and its reference gradient.
pub fn eval_modes(p: usize, xi: [f64; 2]) -> Vec<Dual> {
    let l = barycentric_dual(xi);
    let mut out = Vec::with_capacity(n_modes(p));
    out.extend_from_slice(&l);
    if p < 2 {
        return out;
    }
    let edge_q: Vec<Vec<Dual>> = EDGE_VERTICES
        .iter()
        .map(|&(a, b)| scaled_jacobi(p - 2, 1.0, 1.0, l[b] - l[a], l[a] + l[b]))
        .collect();
    let bubble = l[0] * l[1] * l[2];
    let qi = scaled_jacobi(p.saturating_sub(3), 1.0, 1.0, l[1] - l[0], l[0] + l[1]);
    let y = l[2].scale(2.0) - Dual::constant(1.0);
    let mut pj: Vec<Vec<Dual>> = Vec::new();
    for i in 1..p.saturating_sub(1) {
        let a = 2.0 * i as f64 + 1.0;
        pj.push(scaled_jacobi(p - 2 - i, a, 1.0, y, Dual::constant(1.0)));
    }
    for k in 2..=p {
        for (e, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
            out.push(l[a] * l[b] * edge_q[e][k - 2]);
        }
        for i in 1..k - 1 {
            let j = k - 1 - i;
            out.push(bubble * qi[i - 1] * pj[i - 1][j - 1]);
        }
    }
    out
}

/// Sign applied to local edge mode of the given degree when the edge is
/// traversed against its local orientation.
pub fn edge_mode_sign(degree: usize, reversed: bool) -> f64 {
    if reversed && degree % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Collapsed-coordinate Gauss rule with `n * n` points on the reference triangle.
#[derive(Clone, Debug)]
pub struct TriRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

fn build_rule(n: usize) -> TriRule {
    let g = quadrature::gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (e2, w2) in g.nodes.iter().zip(&g.weights) {
        for (e1, w1) in g.nodes.iter().zip(&g.weights) {
            let x = (1.0 + e1) * (1.0 - e2) / 2.0 - 1.0;
            points.push([x, *e2]);
            weights.push(w1 * w2 * (1.0 - e2) / 2.0);
        }
    }
    TriRule { points, weights }
}

/// Cached rule with `n` Gauss points per collapsed direction.
pub fn tri_rule(n: usize) -> &'static TriRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static TriRule>>> = OnceLock::new();
    let mut g = CACHE.get_or_init(Default::default).lock().unwrap();
    g.entry(n).or_insert_with(|| Box::leak(Box::new(build_rule(n))))
}

/// Points per direction for straight elements of order `p`.
pub fn straight_points(p: usize) -> usize {
    p + 2
}

/// Points per direction for curved elements of order `p`.
pub fn curved_points(p: usize) -> usize {
    p + 4
}

/// Mode values and reference gradients tabulated at the points of a rule.
#[derive(Debug)]
pub struct BasisTable {
    pub p: usize,
    pub rule: &'static TriRule,
    /// `values[q][m]`
    pub values: Vec<Vec<f64>>,
    /// `grads[q][m]`
    pub grads: Vec<Vec<[f64; 2]>>,
}

/// Cached table of the order-`p` basis on the `n`-point rule.
pub fn basis_table(p: usize, n: usize) -> &'static BasisTable {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static BasisTable>>> = OnceLock::new();
    let mut g = CACHE.get_or_init(Default::default).lock().unwrap();
    g.entry((p, n)).or_insert_with(|| {
        let rule = tri_rule(n);
        let mut values = Vec::with_capacity(rule.points.len());
        let mut grads = Vec::with_capacity(rule.points.len());
        for xi in &rule.points {
            let m = eval_modes(p, *xi);
            values.push(m.iter().map(|d| d.v).collect());
            grads.push(m.iter().map(|d| d.d).collect());
        }
        Box::leak(Box::new(BasisTable { p, rule, values, grads }))
    })
}

/// Mass matrix of the order-`p` basis on the reference triangle.
pub fn reference_mass(p: usize) -> DMatrix<f64> {
    let t = basis_table(p, p + 2);
    let n = n_modes(p);
    let mut m = DMatrix::zeros(n, n);
    for (q, w) in t.rule.weights.iter().enumerate() {
        let phi = &t.values[q];
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    m
}

/// L2 projection on the reference triangle from order `p` to order `p_new <= p`.
pub fn project_to_order(coeffs: &[f64], p: usize, p_new: usize) -> Result<Vec<f64>, SemError> {
    if p_new > p {
        return Err(SemError::OrderIncrease { from: p, to: p_new });
    }
    if coeffs.len() != n_modes(p) {
        return Err(SemError::CoefficientLength { expected: n_modes(p), got: coeffs.len() });
    }
    if p_new == p {
        return Ok(coeffs.to_vec());
    }
    let m = reference_mass(p);
    let k = n_modes(p_new);
    let mkk = m.view((0, 0), (k, k)).into_owned();
    let rhs = m.view((0, 0), (k, m.ncols())).into_owned() * DVector::from_column_slice(coeffs);
    let chol = mkk.cholesky().ok_or(SemError::SingularMass)?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}
