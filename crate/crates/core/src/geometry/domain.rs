use std::f64::consts::PI;
use std::ops::Range;

use serde::Serialize;

use super::curve::{BoundaryCurve, CurveGeometry};
use super::{polygon_area, winding_number, wrap_angle, GeometryError, Vec2};
use crate::quadrature;

/// Junctions whose tangent jump is below this angle (radians) are smooth.
pub const TAU_CORNER: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopRole {
    Outer,
    Inner,
}

/// A tangent-discontinuous junction between two consecutive curves.
#[derive(Clone, Debug, Serialize)]
pub struct Corner {
    pub id: usize,
    pub location: Vec2,
    pub loop_index: usize,
    pub incoming_curve: usize,
    pub outgoing_curve: usize,
    /// Tangent angle of the incoming curve at the junction.
    pub incoming_angle: f64,
    /// Tangent angle of the outgoing curve at the junction.
    pub outgoing_angle: f64,
    /// Angle on the domain side, in (0, 2pi).
    pub interior_angle: f64,
}

impl Corner {
    /// Direction angle of the outgoing wall as seen from the corner. Sweeping
    /// counter-clockwise by `interior_angle` from here stays inside the domain
    /// and ends on the incoming wall.
    pub fn sweep_start(&self) -> f64 {
        self.outgoing_angle
    }

    pub fn is_right_angle_multiple(&self) -> bool {
        let q = self.interior_angle / (PI / 2.0);
        (q - q.round()).abs() * (PI / 2.0) <= TAU_CORNER
    }
}

/// Nearest boundary point.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub curve: usize,
    pub t: f64,
    pub point: Vec2,
    pub distance: f64,
}

#[derive(Clone, Debug)]
struct LoopInfo {
    role: LoopRole,
    curves: Range<usize>,
    polyline: Vec<Vec2>,
}

/// Multiply connected planar domain bounded by closed loops of curves.
/// Curve ids are global across loops, loop by loop.
#[derive(Clone, Debug)]
pub struct Domain {
    curves: Vec<BoundaryCurve>,
    loops: Vec<LoopInfo>,
    corners: Vec<Corner>,
    bbox: (Vec2, Vec2),
    tau_geom: f64,
}

fn dense_samples(c: &BoundaryCurve) -> usize {
    match c.geometry() {
        CurveGeometry::Segment { .. } => 1,
        CurveGeometry::Arc { sweep, .. } => {
            let (t0, t1) = c.param_range();
            ((sweep.abs() * (t1 - t0)) / (2.0 * PI) * 2048.0).ceil().max(8.0) as usize
        }
        CurveGeometry::Spline(s) => {
            let (t0, t1) = c.param_range();
            (s.segment_of(t1) - s.segment_of(t0) + 1) * 32
        }
    }
}

/// Integrate f(point, derivative) dt along a curve, splitting at spline knots.
pub(crate) fn integrate_along(c: &BoundaryCurve, mut f: impl FnMut(Vec2, Vec2) -> f64) -> f64 {
    let (t0, t1) = c.param_range();
    let breaks: Vec<f64> = match c.geometry() {
        CurveGeometry::Segment { .. } => vec![t0, t1],
        CurveGeometry::Arc { .. } => (0..=16).map(|k| t0 + (t1 - t0) * k as f64 / 16.0).collect(),
        CurveGeometry::Spline(s) => {
            let mut b = vec![t0];
            b.extend(s.knots().iter().copied().filter(|&k| k > t0 && k < t1));
            b.push(t1);
            b
        }
    };
    breaks
        .windows(2)
        .map(|w| quadrature::integrate(w[0], w[1], 16, |t| f(c.point(t), c.derivative(t))))
        .sum()
}

impl Domain {
    /// Build a domain. The first loop is the outer boundary; orientation of
    /// each loop is corrected so the domain lies on its left.
    pub fn new(loops: Vec<Vec<BoundaryCurve>>) -> Result<Self, GeometryError> {
        if loops.is_empty() {
            return Err(GeometryError::InvalidDomain("no loops".into()));
        }
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for c in loops.iter().flatten() {
            for p in c.sample_param(dense_samples(c)) {
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        let diag = (hi - lo).norm();
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(GeometryError::InvalidDomain("degenerate bounding box".into()));
        }
        let tau_geom = 1e-9 * diag;

        let mut curves = Vec::new();
        let mut infos = Vec::new();
        for (li, mut lp) in loops.into_iter().enumerate() {
            if lp.is_empty() {
                return Err(GeometryError::InvalidDomain(format!("loop {li} is empty")));
            }
            for i in 0..lp.len() {
                let gap = (lp[i].end() - lp[(i + 1) % lp.len()].start()).norm();
                if gap > tau_geom {
                    return Err(GeometryError::OpenLoop { loop_index: li, curve_index: i, gap });
                }
            }
            let role = if li == 0 { LoopRole::Outer } else { LoopRole::Inner };
            let area: f64 = lp.iter().map(|c| integrate_along(c, |p, d| p.x * d.y - p.y * d.x) / 2.0).sum();
            let want_positive = role == LoopRole::Outer;
            if (area > 0.0) != want_positive {
                lp = lp.iter().rev().map(|c| c.reversed()).collect();
            }
            let start = curves.len();
            let mut polyline = Vec::new();
            for c in &lp {
                let pts = c.sample_param(dense_samples(c));
                polyline.extend_from_slice(&pts[..pts.len() - 1]);
            }
            curves.extend(lp);
            infos.push(LoopInfo { role, curves: start..curves.len(), polyline });
        }

        let outer = &infos[0].polyline;
        for (li, info) in infos.iter().enumerate().skip(1) {
            if winding_number(info.polyline[0], outer) == 0 {
                return Err(GeometryError::InvalidDomain(format!("inner loop {li} lies outside the outer loop")));
            }
        }

        let mut corners = Vec::new();
        for (li, info) in infos.iter().enumerate() {
            let r = info.curves.clone();
            let n = r.len();
            for k in 0..n {
                let cin = r.start + k;
                let cout = r.start + (k + 1) % n;
                let din = curves[cin].derivative(curves[cin].param_range().1);
                let dout = curves[cout].derivative(curves[cout].param_range().0);
                let turn = (din.x * dout.y - din.y * dout.x).atan2(din.dot(&dout));
                let interior = PI - turn;
                if interior <= TAU_CORNER || interior >= 2.0 * PI - TAU_CORNER {
                    return Err(GeometryError::DegenerateJunction {
                        loop_index: li,
                        curve_index: (k + 1) % n,
                        angle: interior,
                    });
                }
                if turn.abs() >= TAU_CORNER {
                    corners.push(Corner {
                        id: corners.len(),
                        location: curves[cout].start(),
                        loop_index: li,
                        incoming_curve: cin,
                        outgoing_curve: cout,
                        incoming_angle: wrap_angle(din.y.atan2(din.x)),
                        outgoing_angle: wrap_angle(dout.y.atan2(dout.x)),
                        interior_angle: interior,
                    });
                }
            }
        }

        let dom = Self { curves, loops: infos, corners, bbox: (lo, hi), tau_geom };
        for li in 0..dom.loops.len() {
            let expected = if li == 0 { 2.0 * PI } else { -2.0 * PI };
            let turning = dom.loop_turning(li);
            if (turning - expected).abs() > 1e-6 {
                return Err(GeometryError::InvalidDomain(format!(
                    "loop {li} total turning {turning} (self-intersecting boundary?)"
                )));
            }
        }
        Ok(dom)
    }

    pub fn curves(&self) -> &[BoundaryCurve] {
        &self.curves
    }

    pub fn curve(&self, id: usize) -> &BoundaryCurve {
        &self.curves[id]
    }

    pub fn loop_count(&self) -> usize {
        self.loops.len()
    }

    pub fn loop_role(&self, li: usize) -> LoopRole {
        self.loops[li].role
    }

    /// Global curve ids of a loop, in traversal order.
    pub fn loop_curves(&self, li: usize) -> Range<usize> {
        self.loops[li].curves.clone()
    }

    pub fn loop_of_curve(&self, id: usize) -> usize {
        self.loops.iter().position(|l| l.curves.contains(&id)).expect("curve id out of range")
    }

    pub fn next_curve(&self, id: usize) -> usize {
        let r = &self.loops[self.loop_of_curve(id)].curves;
        if id + 1 == r.end {
            r.start
        } else {
            id + 1
        }
    }

    pub fn prev_curve(&self, id: usize) -> usize {
        let r = &self.loops[self.loop_of_curve(id)].curves;
        if id == r.start {
            r.end - 1
        } else {
            id - 1
        }
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    /// Corner located at the start of the given curve, if any.
    pub fn corner_at_curve_start(&self, id: usize) -> Option<&Corner> {
        self.corners.iter().find(|c| c.outgoing_curve == id)
    }

    pub fn tau_geom(&self) -> f64 {
        self.tau_geom
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        self.bbox
    }

    pub fn diag(&self) -> f64 {
        (self.bbox.1 - self.bbox.0).norm()
    }

    pub fn perimeter(&self) -> f64 {
        self.curves.iter().map(|c| c.length()).sum()
    }

    pub fn area(&self) -> f64 {
        self.curves.iter().map(|c| integrate_along(c, |p, d| p.x * d.y - p.y * d.x) / 2.0).sum()
    }

    /// Dense closed polyline approximating a loop.
    pub fn loop_polyline(&self, li: usize) -> &[Vec2] {
        &self.loops[li].polyline
    }

    /// Whether all boundary data of the guiding field is continuous.
    pub fn has_continuous_tangent_data(&self) -> bool {
        self.corners.iter().all(|c| c.is_right_angle_multiple())
    }

    /// Smooth turning of every curve plus the turning at every junction.
    pub fn loop_turning(&self, li: usize) -> f64 {
        let r = self.loops[li].curves.clone();
        let mut total = 0.0;
        for id in r.clone() {
            let c = &self.curves[id];
            total += c.total_turning();
            let next = &self.curves[if id + 1 == r.end { r.start } else { id + 1 }];
            let din = c.derivative(c.param_range().1);
            let dout = next.derivative(next.param_range().0);
            total += (din.x * dout.y - din.y * dout.x).atan2(din.dot(&dout));
        }
        total
    }

    /// Globally nearest boundary point; ties go to the lowest curve id, then
    /// the lowest parameter.
    pub fn project_to_boundary(&self, p: Vec2) -> BoundaryPoint {
        let mut best = BoundaryPoint { curve: 0, t: 0.0, point: Vec2::zeros(), distance: f64::INFINITY };
        let scale = 1e-13 * self.diag();
        for (id, c) in self.curves.iter().enumerate() {
            let pr = c.project(p);
            if pr.distance < best.distance - scale {
                best = BoundaryPoint { curve: id, t: pr.t, point: pr.point, distance: pr.distance };
            }
        }
        best
    }

    /// Whether a point lies in the closed domain (up to sampling of curved loops).
    pub fn contains(&self, p: Vec2) -> bool {
        let w: i32 = self.loops.iter().map(|l| winding_number(p, &l.polyline)).sum();
        if w != 0 {
            return true;
        }
        self.project_to_boundary(p).distance <= self.tau_geom
    }

    /// Signed area enclosed by the sampled polylines (sanity helper).
    pub fn polyline_area(&self) -> f64 {
        self.loops.iter().map(|l| polygon_area(&l.polyline)).sum()
    }
}
