//! Isoparametric splitting: sub-elements are sampled from the parent mapping
//! on a grid of reference-space sub-squares.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chords::{ChordPin, Chords};
use super::mesh::{BoundarySide, ElementMap, NodePool, QuadElement, QuadMesh};
use super::QuadError;
use crate::geometry::{Domain, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Count for every chord without a pin.
    pub default_count: usize,
    pub pins: Vec<ChordPin>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { default_count: 4, pins: Vec::new() }
    }
}

struct Piece {
    points: Vec<Vec2>,
    block: usize,
    sub: [usize; 2],
    boundary: Vec<(usize, Vec<usize>)>,
}

/// Split every element of `mesh` into n × m sub-elements with the counts of
/// its two chords. On elements with sides on ∂Ω the parent mapping is first
/// corrected by the blended displacement X(ξ, 1) → nearest boundary point
/// (η for side 2, and likewise for the other sides), which vanishes at the
/// parent's corners and interior sides and puts every boundary node on the
/// exact curve.
pub fn refine(mesh: &QuadMesh, config: &SplitConfig) -> Result<(QuadMesh, Chords), QuadError> {
    let chords = Chords::build(mesh, config.default_count, &config.pins)?;
    let domain: Option<Domain> = mesh.domain().transpose()?;
    let q = mesh.order;
    let basis = mesh.basis();
    let s = &basis.nodes;
    let mut tags: Vec<[Option<&Vec<usize>>; 4]> = vec![[None; 4]; mesh.n_elements()];
    for b in &mesh.boundary {
        tags[b.element][b.side] = Some(&b.curves);
    }
    let pieces: Vec<Vec<Piece>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let map = ElementMap::new(&basis, mesh.element_points(e));
            let tx = chords.breakpoints(e, 0);
            let ty = chords.breakpoints(e, 1);
            let (n, m) = (tx.len() - 1, ty.len() - 1);
            let parent = mesh.elements[e].sub;
            let sub_of = |a: usize, b: usize| [parent[0] * n + a, parent[1] * m + b];
            let coord = |t: &[f64], k: usize, i: usize| match i {
                0 => t[k],
                i if i == q => t[k + 1],
                i => t[k] + s[i] * (t[k + 1] - t[k]),
            };
            let params = |t: &[f64]| -> Vec<f64> {
                (0..t.len() - 1).flat_map(|k| (0..=q).map(move |i| (k, i))).map(|(k, i)| coord(t, k, i)).collect()
            };
            let (xs, ys) = (params(&tx), params(&ty));
            let displacement = |side: usize, ts: &[f64]| -> Vec<Vec2> {
                let (Some(d), Some(curves)) = (&domain, tags[e][side]) else { return vec![Vec2::zeros(); ts.len()] };
                ts.iter()
                    .map(|&t| {
                        let x = match side {
                            0 => map.point(t, 0.0),
                            1 => map.point(1.0, t),
                            2 => map.point(t, 1.0),
                            _ => map.point(0.0, t),
                        };
                        project_onto(d, curves, x) - x
                    })
                    .collect()
            };
            let delta = [displacement(0, &xs), displacement(1, &ys), displacement(2, &xs), displacement(3, &ys)];
            let mut out = Vec::with_capacity(n * m);
            for b in 0..m {
                for a in 0..n {
                    let on_side = [b == 0, a + 1 == n, b + 1 == m, a == 0];
                    let mut points = Vec::with_capacity((q + 1) * (q + 1));
                    for j in 0..=q {
                        for i in 0..=q {
                            let (u, v) = (a * (q + 1) + i, b * (q + 1) + j);
                            let (xi, eta) = (xs[u], ys[v]);
                            let blend = delta[0][u] * (1.0 - eta)
                                + delta[1][v] * xi
                                + delta[2][u] * eta
                                + delta[3][v] * (1.0 - xi);
                            points.push(map.point(xi, eta) + blend);
                        }
                    }
                    let boundary = (0..4)
                        .filter_map(|side| Some((side, tags[e][side].filter(|_| on_side[side])?.clone())))
                        .collect();
                    out.push(Piece { points, block: mesh.elements[e].block, sub: sub_of(a, b), boundary });
                }
            }
            out
        })
        .collect();
    let tol = QuadMesh::node_tolerance(mesh.nodes.iter().copied());
    let mut pool = NodePool::new(tol);
    let mut elements = Vec::new();
    let mut boundary = Vec::new();
    for piece in pieces.into_iter().flatten() {
        let nodes = piece.points.iter().map(|&p| pool.insert(p)).collect();
        for (side, curves) in piece.boundary {
            boundary.push(BoundarySide { element: elements.len(), side, curves });
        }
        elements.push(QuadElement { nodes, block: piece.block, sub: piece.sub });
    }
    let refined = QuadMesh { order: q, nodes: pool.nodes, elements, boundary, geometry: mesh.geometry.clone() };
    Ok((refined, chords))
}

fn project_onto(domain: &Domain, curves: &[usize], p: Vec2) -> Vec2 {
    curves
        .iter()
        .map(|&c| domain.curve(c).project(p))
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
        .map_or(p, |pr| pr.point)
}
