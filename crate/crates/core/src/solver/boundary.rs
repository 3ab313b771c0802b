use serde::Serialize;

use super::DirichletFn;
use crate::geometry::{boundary_bc, Domain, Vec2};
use crate::quadrature::gauss_legendre;
use crate::sem::basis::{EDGE_VERTICES, REF_VERTICES};
use crate::sem::{BoundaryEdge, TriMesh};

/// Cross boundary data (cos 4θ, sin 4θ) from the exact tangent angle.
pub fn cross_field_data(domain: &Domain) -> impl Fn(usize, f64, Vec2) -> (f64, f64) + Sync + '_ {
    move |curve, t, _| {
        let c = domain.curve(curve);
        let (t0, t1) = c.param_range();
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        boundary_bc(c.tangent_angle(t.clamp(lo, hi)).unwrap_or(0.0))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundarySample {
    pub curve: usize,
    pub t: f64,
    pub point: Vec2,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryData {
    pub samples: Vec<BoundarySample>,
    /// True when every corner angle is a multiple of π/2.
    pub continuous: bool,
}

/// Reference point on local edge `k` at edge coordinate `s` in [-1, 1].
pub(crate) fn edge_point(k: usize, s: f64) -> [f64; 2] {
    let (a, b) = EDGE_VERTICES[k];
    let (wa, wb) = ((1.0 - s) / 2.0, (1.0 + s) / 2.0);
    [REF_VERTICES[a][0] * wa + REF_VERTICES[b][0] * wb, REF_VERTICES[a][1] * wa + REF_VERTICES[b][1] * wb]
}

/// Curve parameter of edge coordinate `s` on a boundary edge.
pub(crate) fn edge_param(be: &BoundaryEdge, s: f64) -> f64 {
    be.t_start + (1.0 + s) / 2.0 * (be.t_end - be.t_start)
}

/// Cross boundary data at `n` Gauss points of every boundary edge.
pub fn boundary_data(domain: &Domain, mesh: &TriMesh, n: usize) -> BoundaryData {
    let data = cross_field_data(domain);
    let rule = gauss_legendre(n);
    let mut samples = Vec::with_capacity(mesh.boundary_edges().len() * n);
    for be in mesh.boundary_edges() {
        for &s in &rule.nodes {
            let (point, _) = mesh.map_to_physical(be.elem, edge_point(be.local_edge, s)).expect("valid element");
            let t = edge_param(be, s);
            let (u, v) = data(be.curve, t, point);
            samples.push(BoundarySample { curve: be.curve, t, point, u, v });
        }
    }
    BoundaryData { samples, continuous: domain.corners().iter().all(|c| c.is_right_angle_multiple()) }
}

pub(crate) fn eval_data(data: &DirichletFn, be: &BoundaryEdge, s: f64, point: Vec2) -> (f64, f64) {
    data(be.curve, edge_param(be, s), point)
}
