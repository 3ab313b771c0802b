//! Interpolating splines through traced separatrices.

use super::QuadError;
use crate::geometry::{CubicSpline, Vec2};
use crate::trace::SeparatrixGraph;

/// Subsampling interval in steps between spline knots.
const KNOT_SPACING: f64 = 3.0;

/// Natural cubic spline through a subsample of `points` roughly `3 · step`
/// apart; both endpoints are kept.
pub fn spline_polyline(points: &[Vec2], step: f64) -> Result<CubicSpline, QuadError> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last().map_or(true, |q: &Vec2| (p - q).norm() > 0.0) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(QuadError::ShortPolyline { points: pts.len() });
    }
    let last = *pts.last().unwrap();
    let mut keep = vec![pts[0]];
    let mut acc = 0.0;
    for w in pts[..pts.len() - 1].windows(2) {
        acc += (w[1] - w[0]).norm();
        if acc >= KNOT_SPACING * step {
            keep.push(w[1]);
            acc = 0.0;
        }
    }
    if keep.len() > 1 && (last - keep[keep.len() - 1]).norm() < step {
        keep.pop();
    }
    keep.push(last);
    Ok(CubicSpline::interpolate(&keep)?)
}

/// A separatrix graph with one spline per separatrix edge.
#[derive(Clone, Debug)]
pub struct SplinedGraph {
    pub graph: SeparatrixGraph,
    /// Indexed by edge id; `None` for boundary edges.
    pub splines: Vec<Option<CubicSpline>>,
}

pub fn spline_separatrices(graph: &SeparatrixGraph) -> Result<SplinedGraph, QuadError> {
    let splines = graph
        .edges
        .iter()
        .map(|e| {
            if e.is_boundary() {
                return Ok(None);
            }
            spline_polyline(&e.points, graph.step).map(Some)
        })
        .collect::<Result<_, _>>()?;
    Ok(SplinedGraph { graph: graph.clone(), splines })
}
