//! Planar separatrix graph: nodes, split edges and face extraction.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::{angle_of, Origin, TraceError};
use crate::analysis::AnalysisReport;
use crate::geometry::{polygon_area, Domain, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// Interior critical point of valence other than 4.
    Irregular,
    /// Domain corner.
    Corner,
    /// Point where a separatrix meets the boundary.
    Boundary,
    /// Node inserted by midpoint division.
    Midpoint,
    /// Smooth curve junction, separatrix crossing or foot point.
    Junction,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: usize,
    pub kind: NodeKind,
    pub location: Vec2,
    pub valence: i64,
    /// Probe radius used for branch directions.
    pub radius: f64,
    pub corner: Option<usize>,
    /// Boundary position (curve id and parameter) for nodes on ∂Ω.
    pub curve: Option<usize>,
    pub t: Option<f64>,
}

impl GraphNode {
    pub(crate) fn boundary(id: usize, location: Vec2, curve: usize, t: f64) -> Self {
        Self { id, kind: NodeKind::Boundary, location, valence: 2, radius: 0.0, corner: None, curve: Some(curve), t: Some(t) }
    }

    pub(crate) fn interior(id: usize, kind: NodeKind, location: Vec2, valence: i64) -> Self {
        Self { id, kind, location, valence, radius: 0.0, corner: None, curve: None, t: None }
    }

    /// Whether every face sector at this node is a block corner.
    fn always_corner(&self) -> bool {
        self.kind != NodeKind::Junction
    }
}

/// Finalized separatrix between two nodes, before splitting at crossings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparatrixPath {
    pub start: usize,
    pub end: usize,
    /// Seeding streamlines (two for merged separatrices).
    pub origins: Vec<Origin>,
    pub points: Vec<Vec2>,
    pub merged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EdgeKind {
    /// Piece of separatrix path `path`.
    Separatrix { path: usize },
    /// Piece of boundary curve `curve` from parameter t0 to t1.
    Boundary { curve: usize, t0: f64, t1: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: usize,
    pub nodes: [usize; 2],
    pub kind: EdgeKind,
    pub points: Vec<Vec2>,
}

impl GraphEdge {
    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, EdgeKind::Boundary { .. })
    }
}

/// A bounded face of the graph: a cycle of half-edges (edge id, reversed)
/// with the domain on the left, and the positions in the cycle whose start
/// node is a block corner.
#[derive(Clone, Debug, Serialize)]
pub struct Face {
    pub half_edges: Vec<(usize, bool)>,
    pub corners: Vec<usize>,
    pub area: f64,
}

impl Face {
    /// Start node of half-edge `k`.
    pub fn node_at(&self, graph: &SeparatrixGraph, k: usize) -> usize {
        let (e, rev) = self.half_edges[k];
        graph.edges[e].nodes[rev as usize]
    }

    pub fn corner_nodes(&self, graph: &SeparatrixGraph) -> Vec<usize> {
        self.corners.iter().map(|&k| self.node_at(graph, k)).collect()
    }

    /// Closed outline polygon.
    pub fn outline(&self, graph: &SeparatrixGraph) -> Vec<Vec2> {
        let mut out = Vec::new();
        for &(e, rev) in &self.half_edges {
            let p = &graph.edges[e].points;
            if rev {
                out.extend(p.iter().rev().skip(1));
            } else {
                out.extend(p.iter().skip(1));
            }
        }
        out
    }

    /// The half-edge runs between consecutive corners.
    pub fn sides(&self) -> Vec<Vec<(usize, bool)>> {
        let n = self.half_edges.len();
        let m = self.corners.len();
        (0..m)
            .map(|i| {
                let (a, b) = (self.corners[i], self.corners[(i + 1) % m]);
                let len = if m == 1 { n } else { (b + n - a) % n };
                (0..len).map(|k| self.half_edges[(a + k) % n]).collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparatrixGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub paths: Vec<SeparatrixPath>,
    pub step: f64,
    pub merge_distance: f64,
}

/// Irregular points, all corners and the smooth junctions between curves.
pub(crate) fn seed_nodes(domain: &Domain, report: &AnalysisReport) -> Vec<GraphNode> {
    let mut nodes = Vec::new();
    for c in report.irregular_points() {
        let mut n = GraphNode::interior(nodes.len(), NodeKind::Irregular, c.location, c.valence);
        n.radius = c.radius;
        nodes.push(n);
    }
    for id in 0..domain.curves().len() {
        let curve = domain.curve(id);
        let t0 = curve.param_range().0;
        let (kind, corner) = match domain.corner_at_curve_start(id) {
            Some(c) => (NodeKind::Corner, Some(c.id)),
            None => (NodeKind::Junction, None),
        };
        let cv = corner.and_then(|c| report.corners.iter().find(|v| v.corner == c));
        nodes.push(GraphNode {
            id: nodes.len(),
            kind,
            location: curve.start(),
            valence: cv.map_or(2, |v| v.valence),
            radius: cv.map_or(0.0, |v| v.radius),
            corner,
            curve: Some(id),
            t: Some(t0),
        });
    }
    nodes
}

fn seg_intersection(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let den = r.x * s.y - r.y * s.x;
    if den.abs() <= 1e-300 {
        return None;
    }
    let d = q0 - p0;
    let t = (d.x * s.y - d.y * s.x) / den;
    let u = (d.x * r.y - d.y * r.x) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

fn bbox(p: &[Vec2]) -> (Vec2, Vec2) {
    p.iter().fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(lo, hi), q| (lo.inf(q), hi.sup(q)))
}

fn sample_curve(domain: &Domain, curve: usize, t0: f64, t1: f64, spacing: f64) -> Vec<Vec2> {
    let c = domain.curve(curve);
    let len = c.length_between(t0, t1);
    let n = ((len / spacing).ceil() as usize).max(if c.is_straight() { 1 } else { 4 });
    (0..=n).map(|k| c.point(t0 + (t1 - t0) * k as f64 / n as f64)).collect()
}

/// Cut a polyline at sorted positions (segment index + fraction).
fn cut(points: &[Vec2], cuts: &[(f64, usize)]) -> Vec<Vec<Vec2>> {
    let mut pieces = Vec::new();
    let mut cur = vec![points[0]];
    let mut ci = 0;
    for i in 0..points.len() - 1 {
        while ci < cuts.len() && cuts[ci].0 < (i + 1) as f64 {
            let f = cuts[ci].0 - i as f64;
            let x = points[i] + (points[i + 1] - points[i]) * f;
            if (x - *cur.last().unwrap()).norm() > 0.0 {
                cur.push(x);
            }
            pieces.push(std::mem::replace(&mut cur, vec![x]));
            ci += 1;
        }
        if (points[i + 1] - *cur.last().unwrap()).norm() > 0.0 || cur.len() == 1 {
            cur.push(points[i + 1]);
        }
    }
    pieces.push(cur);
    pieces
}

impl SeparatrixGraph {
    /// Split separatrix paths at mutual crossings and boundary curves at
    /// every boundary node.
    pub fn build(
        domain: &Domain,
        mut nodes: Vec<GraphNode>,
        paths: Vec<SeparatrixPath>,
        step: f64,
        merge_distance: f64,
    ) -> Result<Self, TraceError> {
        let eps = 1e-9 * domain.diag();
        let boxes: Vec<(Vec2, Vec2)> = paths.iter().map(|p| bbox(&p.points)).collect();
        let mut cuts: Vec<Vec<(f64, usize)>> = vec![Vec::new(); paths.len()];
        let first_new = nodes.len();
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let (a, b) = (boxes[i], boxes[j]);
                if a.0.x > b.1.x + eps || b.0.x > a.1.x + eps || a.0.y > b.1.y + eps || b.0.y > a.1.y + eps {
                    continue;
                }
                let (p, q) = (&paths[i], &paths[j]);
                let ends_p = [p.start, p.end];
                let ends_q = [q.start, q.end];
                for si in 0..p.points.len() - 1 {
                    for sj in 0..q.points.len() - 1 {
                        let Some((t, u)) = seg_intersection(p.points[si], p.points[si + 1], q.points[sj], q.points[sj + 1])
                        else {
                            continue;
                        };
                        let x = p.points[si] + (p.points[si + 1] - p.points[si]) * t;
                        let at = |n: usize| (nodes[n].location - x).norm() <= eps;
                        let end_p = ends_p.iter().copied().find(|&n| at(n));
                        let end_q = ends_q.iter().copied().find(|&n| at(n));
                        let node = match (end_p, end_q) {
                            (Some(_), Some(_)) => continue,
                            (Some(n), None) | (None, Some(n)) => n,
                            (None, None) => match nodes[first_new..].iter().find(|n| (n.location - x).norm() <= eps) {
                                Some(n) => n.id,
                                None => {
                                    let n = nodes.len();
                                    nodes.push(GraphNode::interior(n, NodeKind::Junction, x, 4));
                                    n
                                }
                            },
                        };
                        let pos_p = si as f64 + t;
                        let pos_q = sj as f64 + u;
                        if end_p.is_none() && !cuts[i].iter().any(|c| c.1 == node) {
                            cuts[i].push((pos_p, node));
                        }
                        if end_q.is_none() && !cuts[j].iter().any(|c| c.1 == node) {
                            cuts[j].push((pos_q, node));
                        }
                    }
                }
            }
        }
        let mut edges = Vec::new();
        for (pi, p) in paths.iter().enumerate() {
            let mut c = cuts[pi].clone();
            c.sort_by(|a, b| a.0.total_cmp(&b.0));
            let pieces = cut(&p.points, &c);
            let mut ends = vec![p.start];
            ends.extend(c.iter().map(|x| x.1));
            ends.push(p.end);
            for (k, mut pts) in pieces.into_iter().enumerate() {
                let (a, b) = (ends[k], ends[k + 1]);
                pts[0] = nodes[a].location;
                *pts.last_mut().unwrap() = nodes[b].location;
                edges.push(GraphEdge { id: edges.len(), nodes: [a, b], kind: EdgeKind::Separatrix { path: pi }, points: pts });
            }
        }
        for curve in 0..domain.curves().len() {
            let (t0, t1) = domain.curve(curve).param_range();
            let mut marks: Vec<(f64, usize)> = Vec::new();
            for n in &nodes {
                if n.curve == Some(curve) {
                    marks.push((n.t.unwrap(), n.id));
                }
            }
            let next = domain.next_curve(curve);
            let end_node = nodes
                .iter()
                .find(|n| n.curve == Some(next) && n.t == Some(domain.curve(next).param_range().0) && n.kind != NodeKind::Boundary)
                .map(|n| n.id)
                .ok_or_else(|| TraceError::Block(format!("curve {next} has no start node")))?;
            marks.push((t1, end_node));
            marks.sort_by(|a, b| a.0.total_cmp(&b.0));
            marks.dedup_by(|a, b| a.1 == b.1 && (a.0 - b.0).abs() < 1e-14);
            if marks.first().map(|m| m.0) != Some(t0) {
                return Err(TraceError::Block(format!("curve {curve} has no start node")));
            }
            for w in marks.windows(2) {
                let pts = sample_curve(domain, curve, w[0].0, w[1].0, 0.5 * step);
                edges.push(GraphEdge {
                    id: edges.len(),
                    nodes: [w[0].1, w[1].1],
                    kind: EdgeKind::Boundary { curve, t0: w[0].0, t1: w[1].0 },
                    points: pts,
                });
            }
        }
        Ok(Self { nodes, edges, paths, step, merge_distance })
    }

    pub fn separatrix_edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(|e| !e.is_boundary())
    }

    /// Number of separatrix edge ends at each node.
    pub fn separatrix_degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in self.separatrix_edges() {
            deg[e.nodes[0]] += 1;
            deg[e.nodes[1]] += 1;
        }
        deg
    }

    /// Nodes whose separatrix count differs from their valence rule:
    /// irregular and midpoint nodes 𝒱, corners 𝒱 − 1, boundary hits 1.
    pub fn valence_violations(&self) -> Vec<String> {
        let deg = self.separatrix_degree();
        self.nodes
            .iter()
            .filter_map(|n| {
                let want = match n.kind {
                    NodeKind::Irregular | NodeKind::Midpoint => n.valence.max(0) as usize,
                    NodeKind::Corner => (n.valence - 1).max(0) as usize,
                    NodeKind::Boundary => 1,
                    NodeKind::Junction => return None,
                };
                (deg[n.id] != want).then(|| format!("node {} ({:?}): {} separatrices, expected {}", n.id, n.kind, deg[n.id], want))
            })
            .collect()
    }

    /// Pairs of separatrix edges that intersect away from shared nodes.
    pub fn crossing_violations(&self) -> Vec<(usize, usize)> {
        let eps = 1e-9 * self.step;
        let edges: Vec<&GraphEdge> = self.separatrix_edges().collect();
        let mut out = Vec::new();
        for (i, a) in edges.iter().enumerate() {
            for b in &edges[i + 1..] {
                let shared: Vec<Vec2> =
                    a.nodes.iter().filter(|n| b.nodes.contains(n)).map(|&n| self.nodes[n].location).collect();
                let hit = a.points.windows(2).any(|s| {
                    b.points.windows(2).any(|t| {
                        seg_intersection(s[0], s[1], t[0], t[1]).is_some_and(|(u, _)| {
                            let x = s[0] + (s[1] - s[0]) * u;
                            !shared.iter().any(|p| (p - x).norm() <= eps)
                                && !a.nodes.iter().chain(&b.nodes).any(|&n| (self.nodes[n].location - x).norm() <= eps)
                        })
                    })
                });
                if hit {
                    out.push((a.id, b.id));
                }
            }
        }
        out
    }

    /// Direction angle of half-edge (edge, reversed) leaving its start node.
    fn leave_angle(&self, e: usize, rev: bool) -> f64 {
        let p = &self.edges[e].points;
        let pts: Vec<Vec2> = if rev { p.iter().rev().copied().collect() } else { p.clone() };
        let total: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let reach = (0.5 * self.step).min(0.25 * total);
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += (w[1] - w[0]).norm();
            if acc >= reach {
                return angle_of(w[1] - pts[0]);
            }
        }
        angle_of(pts[pts.len() - 1] - pts[0])
    }

    /// Bounded faces, each traced with the domain on its left.
    pub fn faces(&self) -> Vec<Face> {
        let n = self.nodes.len();
        let mut out_edges: Vec<Vec<(f64, usize, bool)>> = vec![Vec::new(); n];
        for e in &self.edges {
            out_edges[e.nodes[0]].push((self.leave_angle(e.id, false), e.id, false));
            out_edges[e.nodes[1]].push((self.leave_angle(e.id, true), e.id, true));
        }
        for l in &mut out_edges {
            l.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let start_of = |e: usize, rev: bool| self.edges[e].nodes[rev as usize];
        let next = |e: usize, rev: bool| -> (usize, bool) {
            let v = self.edges[e].nodes[1 - rev as usize];
            let list = &out_edges[v];
            let k = list.iter().position(|&(_, f, r)| f == e && r == !rev).expect("twin present");
            let j = (k + list.len() - 1) % list.len();
            (list[j].1, list[j].2)
        };
        let mut seen = HashSet::new();
        let mut faces = Vec::new();
        for e in &self.edges {
            for rev in [false, true] {
                if seen.contains(&(e.id, rev)) {
                    continue;
                }
                let mut cycle = Vec::new();
                let mut he = (e.id, rev);
                while seen.insert(he) {
                    cycle.push(he);
                    he = next(he.0, he.1);
                }
                let exterior = cycle.iter().any(|&(f, r)| r && self.edges[f].is_boundary());
                if exterior {
                    continue;
                }
                let m = cycle.len();
                let mut corners = Vec::new();
                for k in 0..m {
                    let (pe, pr) = cycle[(k + m - 1) % m];
                    let (ce, cr) = cycle[k];
                    let v = self.nodes[start_of(ce, cr)].clone();
                    let back = self.leave_angle(pe, !pr);
                    let out = self.leave_angle(ce, cr);
                    let sector = (back - out).rem_euclid(2.0 * PI);
                    let sector = if pe == ce && pr != cr { 2.0 * PI } else { sector };
                    if v.always_corner() || sector < 3.0 * FRAC_PI_4 {
                        corners.push(k);
                    }
                }
                let face = Face { half_edges: cycle, corners, area: 0.0 };
                let area = polygon_area(&face.outline(self));
                faces.push(Face { area, ..face });
            }
        }
        faces
    }

    /// Faces with a corner count other than four.
    pub fn non_quad_faces(&self) -> Vec<(usize, usize)> {
        self.faces().iter().enumerate().filter(|(_, f)| f.corners.len() != 4).map(|(i, f)| (i, f.corners.len())).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        serde_json::from_str(text).map_err(|e| TraceError::Block(format!("separatrix graph file: {e}")))
    }
}
