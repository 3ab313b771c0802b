//! High-order quadrilateral meshes and the one-element-per-block coarse mesh.
//!
//! Element nodes form a (Q+1) × (Q+1) grid at Gauss–Lobatto points of the
//! reference square [0, 1]², stored row-major: node (i, j) at index
//! j·(Q+1) + i, with i along ξ and j along η. Sides run counterclockwise:
//! 0 is η = 0, 1 is ξ = 1, 2 is η = 1, 3 is ξ = 0.

use std::collections::HashMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::blocks::BlockSet;
use super::lagrange::Lagrange1d;
use super::QuadError;
use crate::geometry::io::GeometryFile;
use crate::geometry::{Domain, Vec2};
use crate::quadrature::gauss_legendre;

pub const MAX_ORDER: usize = 10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadElement {
    pub nodes: Vec<usize>,
    /// Owning block and sub-element indices (i along ξ, j along η).
    pub block: usize,
    pub sub: [usize; 2],
}

/// Element side on ∂Ω and the boundary curves it follows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundarySide {
    pub element: usize,
    pub side: usize,
    pub curves: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadMesh {
    pub order: usize,
    pub nodes: Vec<Vec2>,
    pub elements: Vec<QuadElement>,
    pub boundary: Vec<BoundarySide>,
    /// Domain geometry, for boundary checks and re-projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryFile>,
}

/// Grid indices (i, j) of side `s` in counterclockwise order.
pub(crate) fn side_grid(order: usize, s: usize) -> Vec<(usize, usize)> {
    let q = order;
    match s {
        0 => (0..=q).map(|i| (i, 0)).collect(),
        1 => (0..=q).map(|j| (q, j)).collect(),
        2 => (0..=q).rev().map(|i| (i, q)).collect(),
        _ => (0..=q).rev().map(|j| (0, j)).collect(),
    }
}

/// Deduplicating node store: points closer than `tol` share an id.
pub(crate) struct NodePool {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    pub nodes: Vec<Vec2>,
}

impl NodePool {
    pub fn new(tol: f64) -> Self {
        Self { tol, cells: HashMap::new(), nodes: Vec::new() }
    }

    fn cell(&self, p: Vec2) -> (i64, i64) {
        ((p.x / (4.0 * self.tol)).floor() as i64, (p.y / (4.0 * self.tol)).floor() as i64)
    }

    pub fn insert(&mut self, p: Vec2) -> usize {
        let (cx, cy) = self.cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    if let Some(&id) = ids.iter().find(|&&id| (self.nodes[id] - p).norm() <= self.tol) {
                        return id;
                    }
                }
            }
        }
        let id = self.nodes.len();
        self.nodes.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

impl QuadMesh {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_points(&self, e: usize) -> Vec<Vec2> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Node ids of side `s` of element `e`, counterclockwise.
    pub fn side_nodes(&self, e: usize, s: usize) -> Vec<usize> {
        let q = self.order;
        side_grid(q, s).into_iter().map(|(i, j)| self.elements[e].nodes[j * (q + 1) + i]).collect()
    }

    pub fn domain(&self) -> Option<Result<Domain, QuadError>> {
        self.geometry.as_ref().map(|g| g.to_domain().map_err(QuadError::Spline))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mesh serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, QuadError> {
        let m: Self = serde_json::from_str(text).map_err(|e| QuadError::Format(e.to_string()))?;
        let n = (m.order + 1) * (m.order + 1);
        if m.order == 0 || m.order > MAX_ORDER {
            return Err(QuadError::BadOrder { order: m.order, max: MAX_ORDER });
        }
        for (k, el) in m.elements.iter().enumerate() {
            if el.nodes.len() != n || el.nodes.iter().any(|&i| i >= m.nodes.len()) {
                return Err(QuadError::Format(format!("element {k} has invalid node references")));
            }
        }
        Ok(m)
    }
}

/// Tensor-product mapping of one element.
pub(crate) struct ElementMap<'a> {
    basis: &'a Lagrange1d,
    points: Vec<Vec2>,
}

impl<'a> ElementMap<'a> {
    pub fn new(basis: &'a Lagrange1d, points: Vec<Vec2>) -> Self {
        Self { basis, points }
    }

    pub fn point(&self, xi: f64, eta: f64) -> Vec2 {
        let (a, b) = (self.basis.values(xi), self.basis.values(eta));
        let n = a.len();
        let mut x = Vec2::zeros();
        for (j, bj) in b.iter().enumerate() {
            for (i, ai) in a.iter().enumerate() {
                x += self.points[j * n + i] * (ai * bj);
            }
        }
        x
    }

    /// Columns ∂x/∂ξ and ∂x/∂η.
    pub fn jacobian(&self, xi: f64, eta: f64) -> Matrix2<f64> {
        let (a, b) = (self.basis.values(xi), self.basis.values(eta));
        let (da, db) = (self.basis.derivatives(xi), self.basis.derivatives(eta));
        let n = a.len();
        let (mut dx, mut dy) = (Vec2::zeros(), Vec2::zeros());
        for j in 0..n {
            for i in 0..n {
                let p = self.points[j * n + i];
                dx += p * (da[i] * b[j]);
                dy += p * (a[i] * db[j]);
            }
        }
        Matrix2::from_columns(&[dx, dy])
    }

    /// Jacobian determinants at the (Q+2)² Gauss points.
    pub fn dets(&self) -> Vec<f64> {
        let rule = gauss_legendre(self.basis.order() + 2);
        let pts: Vec<f64> = rule.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let mut out = Vec::with_capacity(pts.len() * pts.len());
        for &eta in &pts {
            for &xi in &pts {
                out.push(self.jacobian(xi, eta).determinant());
            }
        }
        out
    }

    /// Area by Gauss quadrature of the Jacobian determinant.
    pub fn area(&self) -> f64 {
        let rule = gauss_legendre(self.basis.order() + 2);
        let mut a = 0.0;
        for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
            for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
                a += wx * wy * self.jacobian(0.5 * (x + 1.0), 0.5 * (y + 1.0)).determinant();
            }
        }
        0.25 * a
    }
}

impl QuadMesh {
    pub(crate) fn basis(&self) -> Lagrange1d {
        Lagrange1d::gll(self.order)
    }

    /// Jacobian determinants of element `e` at the (Q+2)² Gauss points.
    pub fn jacobian_dets(&self, e: usize) -> Vec<f64> {
        let basis = self.basis();
        ElementMap::new(&basis, self.element_points(e)).dets()
    }

    /// min det J / max det J over the Gauss points; 1 for affine elements.
    pub fn scaled_jacobian(&self, e: usize) -> f64 {
        let d = self.jacobian_dets(e);
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        if max <= 0.0 {
            return min.min(0.0) / max.abs().max(f64::MIN_POSITIVE);
        }
        min / max
    }

    pub fn area(&self) -> f64 {
        let basis = self.basis();
        (0..self.n_elements()).map(|e| ElementMap::new(&basis, self.element_points(e)).area()).sum()
    }

    pub(crate) fn node_tolerance(points: impl Iterator<Item = Vec2>) -> f64 {
        let scale = points.fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
        1e-10 * scale.max(1.0)
    }
}

/// One element of order `order` per block by transfinite (Coons)
/// interpolation of the four sides sampled at Gauss–Lobatto fractions.
pub fn coarse_mesh(set: &BlockSet, order: usize) -> Result<QuadMesh, QuadError> {
    if order == 0 || order > MAX_ORDER {
        return Err(QuadError::BadOrder { order, max: MAX_ORDER });
    }
    let basis = Lagrange1d::gll(order);
    let s = &basis.nodes;
    let q = order;
    let tol = QuadMesh::node_tolerance(set.splined.graph.nodes.iter().map(|n| n.location));
    let mut pool = NodePool::new(tol);
    let mut elements = Vec::new();
    let mut boundary = Vec::new();
    for b in &set.blocks {
        let bottom = set.side_points(b.id, 0, s);
        let right = set.side_points(b.id, 1, s);
        let mut top = set.side_points(b.id, 2, s);
        top.reverse();
        let mut left = set.side_points(b.id, 3, s);
        left.reverse();
        let (p00, p10, p11, p01) = (bottom[0], bottom[q], top[q], top[0]);
        let mut pts = vec![Vec2::zeros(); (q + 1) * (q + 1)];
        for j in 0..=q {
            for i in 0..=q {
                let (x, y) = (s[i], s[j]);
                pts[j * (q + 1) + i] = if j == 0 {
                    bottom[i]
                } else if j == q {
                    top[i]
                } else if i == 0 {
                    left[j]
                } else if i == q {
                    right[j]
                } else {
                    bottom[i] * (1.0 - y) + top[i] * y + left[j] * (1.0 - x) + right[j] * x
                        - (p00 * ((1.0 - x) * (1.0 - y)) + p10 * (x * (1.0 - y)) + p11 * (x * y) + p01 * ((1.0 - x) * y))
                };
            }
        }
        let min_det = ElementMap::new(&basis, pts.clone()).dets().into_iter().fold(f64::INFINITY, f64::min);
        if min_det <= 0.0 {
            return Err(QuadError::InvertedBlock { block: b.id, min_det });
        }
        let nodes = pts.iter().map(|&p| pool.insert(p)).collect();
        for side in 0..4 {
            if let Some(curves) = set.boundary_curves(b.id, side) {
                boundary.push(BoundarySide { element: elements.len(), side, curves });
            }
        }
        elements.push(QuadElement { nodes, block: b.id, sub: [0, 0] });
    }
    Ok(QuadMesh {
        order,
        nodes: pool.nodes,
        elements,
        boundary,
        geometry: Some(GeometryFile::from_domain(&set.domain)),
    })
}
