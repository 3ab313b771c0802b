//! Midpoint division of the triangular block at a degenerate corner.

use super::graph::{EdgeKind, GraphNode, NodeKind, SeparatrixGraph, SeparatrixPath};
use super::integrate::Tracer;
use super::{adjusted_direction, Origin, TraceError};
use crate::geometry::{point_in_polygon, polygon_area, Domain, Vec2};
use crate::sem::FieldSolution;

/// Area centroid of a closed polygon.
fn centroid(poly: &[Vec2]) -> Vec2 {
    let a = polygon_area(poly);
    let mut c = Vec2::zeros();
    for (p, q) in poly.iter().zip(poly.iter().cycle().skip(1)) {
        let cross = p.x * q.y - q.x * p.y;
        c += (p + q) * cross;
    }
    c / (6.0 * a)
}

/// Closest point of a polyline to `x`: (segment index, fraction, point).
fn nearest_on(points: &[Vec2], x: Vec2) -> (usize, f64, Vec2) {
    let mut best = (0, 0.0, points[0], f64::INFINITY);
    for (i, w) in points.windows(2).enumerate() {
        let d = w[1] - w[0];
        let l2 = d.norm_squared();
        let t = if l2 > 0.0 { ((x - w[0]).dot(&d) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let p = w[0] + d * t;
        let dist = (p - x).norm();
        if dist < best.3 {
            best = (i, t, p, dist);
        }
    }
    (best.0, best.1, best.2)
}

fn straight(a: Vec2, b: Vec2, h: f64) -> Vec<Vec2> {
    let n = ((b - a).norm() / h).ceil().max(1.0) as usize;
    (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect()
}

/// Split path `pi` at the point nearest `x`, ending the first half at node
/// `j` and appending the second half as a new path.
fn split_path(paths: &mut Vec<SeparatrixPath>, pi: usize, x: Vec2, j: usize) {
    let p = paths[pi].clone();
    let (seg, _, _) = nearest_on(&p.points, x);
    let mut head: Vec<Vec2> = p.points[..=seg].to_vec();
    head.push(x);
    let mut tail = vec![x];
    tail.extend_from_slice(&p.points[seg + 1..]);
    paths[pi] = SeparatrixPath { end: j, points: head, ..p.clone() };
    paths.push(SeparatrixPath { start: j, points: tail, ..p });
}

/// Split the three-sided block at degenerate `corner` into three quads: a
/// valence-3 node N at the block centroid joined by straight segments to the
/// nearest points of the two sides at the corner, and a third separatrix
/// traced from N away from the corner. Segments that end on an interior
/// separatrix continue through the field to the boundary.
pub fn midpoint_division(
    field: &FieldSolution,
    domain: &Domain,
    graph: &SeparatrixGraph,
    corner: usize,
) -> Result<SeparatrixGraph, TraceError> {
    let c = graph
        .nodes
        .iter()
        .find(|n| n.kind == NodeKind::Corner && n.corner == Some(corner))
        .ok_or_else(|| TraceError::Block(format!("corner {corner} is not a graph node")))?;
    if c.valence != 0 {
        return Err(TraceError::NotDegenerate { corner, valence: c.valence });
    }
    let faces = graph.faces();
    let face = faces
        .iter()
        .find(|f| f.corner_nodes(graph).contains(&c.id))
        .ok_or_else(|| TraceError::Block(format!("no block contains corner {corner}")))?;
    let corner_nodes = face.corner_nodes(graph);
    if corner_nodes.len() != 3 {
        return Err(TraceError::Block(format!(
            "block at degenerate corner {corner} has {} corners, expected 3",
            corner_nodes.len()
        )));
    }
    let outline = face.outline(graph);
    let mut n = centroid(&outline);
    if !point_in_polygon(n, &outline) {
        n = corner_nodes.iter().map(|&k| graph.nodes[k].location).sum::<Vec2>() / 3.0;
        if !point_in_polygon(n, &outline) {
            return Err(TraceError::Block(format!("no interior midpoint for the block at corner {corner}")));
        }
    }
    let sides = face.sides();
    let k = corner_nodes.iter().position(|&v| v == c.id).expect("corner listed");
    let mut nodes = graph.nodes.clone();
    let mut paths = graph.paths.clone();
    let mid = nodes.len();
    nodes.push(GraphNode::interior(mid, NodeKind::Midpoint, n, 3));
    let tracer = Tracer::new(field, domain, graph.step, graph.merge_distance);
    let mut branch = 0;
    for side in [&sides[k], &sides[(k + 2) % 3]] {
        let (edge, foot) = side
            .iter()
            .map(|&(e, _)| (e, nearest_on(&graph.edges[e].points, n).2))
            .min_by(|a, b| (a.1 - n).norm().total_cmp(&(b.1 - n).norm()))
            .expect("block side has edges");
        let foot_node = match graph.edges[edge].kind {
            EdgeKind::Boundary { .. } => {
                let bp = domain.project_to_boundary(foot);
                nodes.push(GraphNode::boundary(nodes.len(), bp.point, bp.curve, bp.t));
                nodes.len() - 1
            }
            EdgeKind::Separatrix { path } => {
                let j = nodes.len();
                nodes.push(GraphNode::interior(j, NodeKind::Junction, foot, 4));
                split_path(&mut paths, path, foot, j);
                let d = adjusted_direction(field, foot, (foot - n).normalize())?;
                let (points, end) = tracer.run_to_end(Origin { node: j, branch: 0 }, foot, d, &mut nodes)?;
                paths.push(SeparatrixPath {
                    start: j,
                    end,
                    origins: vec![Origin { node: mid, branch }],
                    points,
                    merged: false,
                });
                j
            }
        };
        paths.push(SeparatrixPath {
            start: mid,
            end: foot_node,
            origins: vec![Origin { node: mid, branch }],
            points: straight(n, nodes[foot_node].location, graph.step),
            merged: false,
        });
        branch += 1;
    }
    let away = (n - c.location).normalize();
    let d = adjusted_direction(field, n, away)?;
    let origin = Origin { node: mid, branch };
    let (points, end) = tracer.run_to_end(origin, n, d, &mut nodes)?;
    paths.push(SeparatrixPath { start: mid, end, origins: vec![origin], points, merged: false });
    SeparatrixGraph::build(domain, nodes, paths, graph.step, graph.merge_distance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_of_square() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(2.0, 2.0), Vec2::new(0.0, 2.0)];
        assert!((centroid(&sq) - Vec2::new(1.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn nearest_point_on_polyline() {
        let p = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)];
        let (seg, t, x) = nearest_on(&p, Vec2::new(2.0, 0.5));
        assert_eq!(seg, 1);
        assert!((t - 0.5).abs() < 1e-14);
        assert!((x - Vec2::new(1.0, 0.5)).norm() < 1e-14);
    }
}
