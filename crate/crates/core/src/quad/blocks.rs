//! Quadrilateral blocks: the four-cornered faces of the separatrix graph.

use std::collections::HashMap;

use serde::Serialize;

use super::spline::SplinedGraph;
use super::QuadError;
use crate::geometry::{Domain, Vec2};
use crate::trace::EdgeKind;

/// Half-edge: edge id and whether it is traversed from `nodes[1]` to `nodes[0]`.
pub type HalfEdge = (usize, bool);

/// A four-sided block with the domain on its left. Side k runs from corner k
/// to corner k + 1; sides 0 and 2 are the ξ sides, 1 and 3 the η sides.
#[derive(Clone, Debug, Serialize)]
pub struct QuadBlock {
    pub id: usize,
    pub corners: [usize; 4],
    pub sides: [Vec<HalfEdge>; 4],
    /// Block and side across each side; `None` on the boundary.
    pub neighbors: [Option<(usize, usize)>; 4],
    pub area: f64,
}

#[derive(Clone, Debug)]
pub struct BlockSet {
    pub splined: SplinedGraph,
    pub domain: Domain,
    pub blocks: Vec<QuadBlock>,
}

fn twin(side: &[HalfEdge]) -> Vec<HalfEdge> {
    side.iter().rev().map(|&(e, r)| (e, !r)).collect()
}

fn canonical(side: &[HalfEdge]) -> (Vec<HalfEdge>, bool) {
    let t = twin(side);
    if t.as_slice() < side {
        (t, true)
    } else {
        (side.to_vec(), false)
    }
}

/// Split the faces of the graph into blocks; every bounded face must have
/// exactly four corners and every separatrix side must be shared whole.
pub fn extract_blocks(splined: &SplinedGraph, domain: &Domain) -> Result<BlockSet, QuadError> {
    let graph = &splined.graph;
    let faces = graph.faces();
    let mut blocks = Vec::with_capacity(faces.len());
    for (fi, f) in faces.iter().enumerate() {
        if let Some(&(e, _)) = f.half_edges.iter().find(|&&(e, r)| f.half_edges.contains(&(e, !r))) {
            return Err(QuadError::DanglingEdge { edge: e });
        }
        if f.area <= 0.0 {
            return Err(QuadError::DisconnectedLoop);
        }
        let nodes = f.corner_nodes(graph);
        if nodes.len() != 4 {
            return Err(QuadError::NonQuadFace { face: fi, corners: nodes.len(), nodes });
        }
        let sides = f.sides();
        let first = (0..4).min_by_key(|&k| nodes[k]).unwrap();
        let corners = std::array::from_fn(|k| nodes[(first + k) % 4]);
        let sides = std::array::from_fn(|k| sides[(first + k) % 4].clone());
        blocks.push(QuadBlock { id: blocks.len(), corners, sides, neighbors: [None; 4], area: f.area });
    }
    let mut shared: HashMap<Vec<HalfEdge>, Vec<(usize, usize)>> = HashMap::new();
    for b in &blocks {
        for (s, side) in b.sides.iter().enumerate() {
            if side.iter().all(|&(e, _)| graph.edges[e].is_boundary()) {
                continue;
            }
            shared.entry(canonical(side).0).or_default().push((b.id, s));
        }
    }
    for (key, users) in &shared {
        match users.as_slice() {
            [(a, sa), (b, sb)] if twin(&blocks[*a].sides[*sa]) == blocks[*b].sides[*sb] => {
                blocks[*a].neighbors[*sa] = Some((*b, *sb));
                blocks[*b].neighbors[*sb] = Some((*a, *sa));
            }
            _ => {
                let (b, s) = users[0];
                log::error!("side {key:?} is used by {users:?}");
                return Err(QuadError::NonConforming { block: b, side: s });
            }
        }
    }
    Ok(BlockSet { splined: splined.clone(), domain: domain.clone(), blocks })
}

impl BlockSet {
    fn edge_length(&self, e: usize) -> f64 {
        let edge = &self.splined.graph.edges[e];
        match edge.kind {
            EdgeKind::Boundary { curve, t0, t1 } => self.domain.curve(curve).length_between(t0, t1),
            EdgeKind::Separatrix { .. } => edge.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum(),
        }
    }

    /// Point at fraction g ∈ [0, 1] along an edge from `nodes[0]`.
    fn edge_point(&self, e: usize, g: f64) -> Vec2 {
        let edge = &self.splined.graph.edges[e];
        let nodes = &self.splined.graph.nodes;
        if g == 0.0 {
            return nodes[edge.nodes[0]].location;
        }
        if g == 1.0 {
            return nodes[edge.nodes[1]].location;
        }
        match edge.kind {
            EdgeKind::Boundary { curve, t0, t1 } => self.domain.curve(curve).point(t0 + g * (t1 - t0)),
            EdgeKind::Separatrix { .. } => {
                let s = self.splined.splines[e].as_ref().expect("separatrix edges are splined");
                s.eval(g * s.param_range().1)
            }
        }
    }

    fn chain_point(&self, chain: &[HalfEdge], lengths: &[f64], s: f64) -> Vec2 {
        let total: f64 = lengths.iter().sum();
        let mut target = s * total;
        for (k, &(e, rev)) in chain.iter().enumerate() {
            let last = k + 1 == chain.len();
            if target <= lengths[k] || last {
                let f = if s == 1.0 && last { 1.0 } else { (target / lengths[k]).clamp(0.0, 1.0) };
                return self.edge_point(e, if rev { 1.0 - f } else { f });
            }
            target -= lengths[k];
        }
        unreachable!("chain is non-empty")
    }

    /// Points of block side `side` at the fractions `params`, which must be
    /// symmetric about 1/2. Both blocks sharing a side get identical points.
    pub fn side_points(&self, block: usize, side: usize, params: &[f64]) -> Vec<Vec2> {
        let (chain, flipped) = canonical(&self.blocks[block].sides[side]);
        let lengths: Vec<f64> = chain.iter().map(|&(e, _)| self.edge_length(e)).collect();
        let mut pts: Vec<Vec2> = params.iter().map(|&s| self.chain_point(&chain, &lengths, s)).collect();
        if flipped {
            pts.reverse();
        }
        pts
    }

    /// Boundary curves along a side lying entirely on ∂Ω.
    pub fn boundary_curves(&self, block: usize, side: usize) -> Option<Vec<usize>> {
        let edges = &self.splined.graph.edges;
        let mut curves = Vec::new();
        for &(e, _) in &self.blocks[block].sides[side] {
            match edges[e].kind {
                EdgeKind::Boundary { curve, .. } => {
                    if !curves.contains(&curve) {
                        curves.push(curve);
                    }
                }
                EdgeKind::Separatrix { .. } => return None,
            }
        }
        Some(curves)
    }
}

/// Combinatorial Euler characteristic V − E + F of the block decomposition
/// (F counts the outer face) against 3 − (number of boundary loops).
#[derive(Clone, Debug, Serialize)]
pub struct EulerCheck {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub value: i64,
    pub expected: i64,
}

impl EulerCheck {
    pub fn holds(&self) -> bool {
        self.value == self.expected
    }
}

pub fn euler_check(set: &BlockSet) -> EulerCheck {
    let g = &set.splined.graph;
    let mut used = vec![false; g.nodes.len()];
    for e in &g.edges {
        used[e.nodes[0]] = true;
        used[e.nodes[1]] = true;
    }
    let vertices = used.iter().filter(|&&u| u).count();
    let edges = g.edges.len();
    let faces = set.blocks.len() + 1;
    EulerCheck {
        vertices,
        edges,
        faces,
        value: vertices as i64 - edges as i64 + faces as i64,
        expected: 3 - set.domain.loop_count() as i64,
    }
}
