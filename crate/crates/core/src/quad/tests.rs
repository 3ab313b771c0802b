use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use super::mesh::NodePool;
use super::*;
use crate::adapt::{adapt_loop, AdaptConfig};
use crate::analysis::analyze;
use crate::geometry::{fixtures, Domain, Vec2};
use crate::sem::mesher;
use crate::solver::{DiscretizationConfig, Scheme};
use crate::trace::{trace, GraphNode, NodeKind, Origin, SeparatrixGraph, SeparatrixPath, TraceConfig};

/// Graph with one node per curve start and the given separatrix paths.
fn graph_with(domain: &Domain, mut extra: Vec<GraphNode>, paths: Vec<SeparatrixPath>, step: f64) -> SeparatrixGraph {
    let mut nodes: Vec<GraphNode> = Vec::new();
    for id in 0..domain.curves().len() {
        let c = domain.curve(id);
        let corner = domain.corner_at_curve_start(id).map(|c| c.id);
        nodes.push(GraphNode {
            id,
            kind: if corner.is_some() { NodeKind::Corner } else { NodeKind::Junction },
            location: c.start(),
            valence: if corner.is_some() { 1 } else { 2 },
            radius: 0.0,
            corner,
            curve: Some(id),
            t: Some(c.param_range().0),
        });
    }
    for mut n in extra.drain(..) {
        n.id = nodes.len();
        nodes.push(n);
    }
    SeparatrixGraph::build(domain, nodes, paths, step, step).unwrap()
}

fn straight(a: Vec2, b: Vec2, n: usize) -> Vec<Vec2> {
    (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect()
}

fn path(start: usize, end: usize, points: Vec<Vec2>) -> SeparatrixPath {
    SeparatrixPath { start, end, origins: vec![Origin { node: start, branch: 0 }], points, merged: false }
}

fn blocks_of(domain: &Domain, graph: &SeparatrixGraph) -> BlockSet {
    extract_blocks(&spline_separatrices(graph).unwrap(), domain).unwrap()
}

fn square_blocks() -> BlockSet {
    let d = fixtures::unit_square();
    blocks_of(&d, &graph_with(&d, vec![], vec![], 0.05))
}

/// Unit square cut by a horizontal and a vertical line into four blocks.
fn cross_blocks() -> BlockSet {
    let d = fixtures::unit_square();
    let mids: Vec<GraphNode> = (0..4)
        .map(|i| {
            let c = d.curve(i);
            let (t0, t1) = c.param_range();
            let t = 0.5 * (t0 + t1);
            GraphNode::boundary(0, c.point(t), i, t)
        })
        .collect();
    let loc: Vec<Vec2> = mids.iter().map(|n| n.location).collect();
    let paths = vec![path(4, 6, straight(loc[0], loc[2], 10)), path(5, 7, straight(loc[1], loc[3], 10))];
    blocks_of(&d, &graph_with(&d, mids, paths, 0.05))
}

struct Solved {
    domain: Domain,
    graph: SeparatrixGraph,
}

fn solve_and_trace(domain: Domain) -> Solved {
    let mesh = Arc::new(mesher::triangulate(&domain, 0.1 * domain.diag()).unwrap());
    let scheme = if domain.corners().iter().all(|c| c.is_right_angle_multiple()) { Scheme::Cg } else { Scheme::Dg };
    let disc = DiscretizationConfig::uniform(scheme, mesh.n_elements(), 3);
    let field = adapt_loop(&domain, &mesh, &AdaptConfig::default(), &disc).unwrap().field;
    let report = analyze(&field, &domain).unwrap();
    let graph = trace(&field, &domain, &report, &TraceConfig::default()).unwrap().graph;
    Solved { domain, graph }
}

fn half_disc() -> &'static Solved {
    static CASE: OnceLock<Solved> = OnceLock::new();
    CASE.get_or_init(|| solve_and_trace(fixtures::half_disc()))
}

fn half_disc_blocks() -> BlockSet {
    let c = half_disc();
    blocks_of(&c.domain, &c.graph)
}

fn distance_to_polyline(p: Vec2, poly: &[Vec2]) -> f64 {
    poly.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let t = ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (p - (w[0] + d * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn spline_samples(s: &crate::geometry::CubicSpline, n: usize) -> Vec<Vec2> {
    let (a, b) = s.param_range();
    (0..=n).map(|k| s.eval(a + (b - a) * k as f64 / n as f64)).collect()
}

#[test]
fn straight_polyline_gives_straight_spline() {
    let pts = straight(Vec2::new(0.2, -1.0), Vec2::new(3.0, 4.0), 57);
    let s = spline_polyline(&pts, 0.1).unwrap();
    let dir = (pts[57] - pts[0]).normalize();
    for p in spline_samples(&s, 500) {
        let r = p - pts[0];
        assert!((r.x * dir.y - r.y * dir.x).abs() <= 1e-10);
    }
}

#[test]
fn arc_polyline_spline_stays_on_arc() {
    let (r, c) = (2.0f64, Vec2::new(1.0, -0.5));
    let h = 0.02 * r;
    let n = (1.5 * r / h).ceil() as usize;
    let pts: Vec<Vec2> = (0..=n)
        .map(|k| {
            let a = 0.3 + 1.5 * k as f64 / n as f64;
            c + Vec2::new(a.cos(), a.sin()) * r
        })
        .collect();
    let s = spline_polyline(&pts, h).unwrap();
    for p in spline_samples(&s, 100) {
        assert!(((p - c).norm() - r).abs() <= 1e-3 * r);
    }
}

#[test]
fn short_polyline_is_rejected() {
    let p = Vec2::new(1.0, 1.0);
    assert!(matches!(spline_polyline(&[p, p], 0.1), Err(QuadError::ShortPolyline { points: 1 })));
}

#[test]
fn half_disc_splines_follow_polylines_and_keep_endpoints() {
    let c = half_disc();
    let sg = spline_separatrices(&c.graph).unwrap();
    for (e, s) in sg.graph.edges.iter().zip(&sg.splines) {
        let Some(s) = s else { continue };
        let (a, b) = s.param_range();
        assert_eq!(s.eval(a), e.points[0]);
        assert!((s.eval(b) - *e.points.last().unwrap()).norm() <= 1e-12);
        for p in spline_samples(s, 200) {
            assert!(distance_to_polyline(p, &e.points) <= 2.0 * c.graph.step);
        }
    }
}

#[test]
fn square_is_one_block() {
    let set = square_blocks();
    assert_eq!(set.blocks.len(), 1);
    assert!(euler_check(&set).holds());
}

#[test]
fn half_disc_blocks_are_quads_matching_euler_count() {
    let set = half_disc_blocks();
    let g = &set.splined.graph;
    let check = euler_check(&set);
    assert!(check.holds(), "{check:?}");
    let predicted = (1 + check.edges as i64 - check.vertices as i64) as usize;
    assert_eq!(set.blocks.len(), predicted);
    assert_eq!(g.non_quad_faces().len(), 0);
    let area: f64 = set.blocks.iter().map(|b| b.area).sum();
    assert!((area - PI / 2.0).abs() <= 1e-3 * PI / 2.0);
}

#[test]
fn dangling_edge_is_an_error() {
    let d = fixtures::unit_square();
    let foot = GraphNode::boundary(0, Vec2::new(0.5, 0.0), 0, 0.5);
    let tip = GraphNode::interior(0, NodeKind::Irregular, Vec2::new(0.5, 0.4), 1);
    let g = graph_with(&d, vec![foot, tip], vec![path(5, 4, straight(Vec2::new(0.5, 0.4), Vec2::new(0.5, 0.0), 8))], 0.05);
    let r = extract_blocks(&spline_separatrices(&g).unwrap(), &d);
    assert!(matches!(r, Err(QuadError::DanglingEdge { .. })), "{r:?}");
}

#[test]
fn non_quad_face_is_reported() {
    let d = fixtures::unit_square();
    let g = graph_with(&d, vec![], vec![path(0, 2, straight(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 10))], 0.05);
    let r = extract_blocks(&spline_separatrices(&g).unwrap(), &d);
    assert!(matches!(r, Err(QuadError::NonQuadFace { corners: 3, .. })), "{r:?}");
}

#[test]
fn shared_sides_point_to_each_other() {
    let set = cross_blocks();
    assert_eq!(set.blocks.len(), 4);
    for b in &set.blocks {
        assert_eq!(b.neighbors.iter().flatten().count(), 2);
        for (s, n) in b.neighbors.iter().enumerate() {
            if let Some((nb, ns)) = n {
                assert_eq!(set.blocks[*nb].neighbors[*ns], Some((b.id, s)));
                let mut mine = set.side_points(b.id, s, &[0.0, 0.3, 0.7, 1.0]);
                mine.reverse();
                assert_eq!(mine, set.side_points(*nb, *ns, &[0.0, 0.3, 0.7, 1.0]));
            }
        }
    }
}

#[test]
fn square_block_is_affine() {
    let mesh = coarse_mesh(&square_blocks(), 3).unwrap();
    let dets = mesh.jacobian_dets(0);
    for d in &dets {
        assert!((d - 1.0).abs() < 1e-12);
    }
    assert!((mesh.scaled_jacobian(0) - 1.0).abs() < 1e-12);
    assert_eq!(mesh.nodes.len(), 16);
    assert_eq!(mesh.boundary.len(), 4);
}

#[test]
fn half_disc_coarse_mesh_is_valid() {
    let mesh = coarse_mesh(&half_disc_blocks(), 4).unwrap();
    let report = validate(&mesh, &ValidationThresholds::default());
    assert!(report.passed, "{:?}", report.failures);
    assert!(report.min_scaled_jacobian > 0.2, "{}", report.min_scaled_jacobian);
    assert!((mesh.area() - PI / 2.0).abs() <= 1e-3 * PI / 2.0);
}

#[test]
fn annular_sector_nodes_are_inside() {
    let d = fixtures::annular_sector();
    let set = blocks_of(&d, &graph_with(&d, vec![], vec![], 0.02 * d.diag()));
    assert_eq!(set.blocks.len(), 1);
    let mesh = coarse_mesh(&set, 5).unwrap();
    let q = mesh.order;
    let (r0, r1) = (1.0, 2.0);
    for j in 1..q {
        for i in 1..q {
            let p = mesh.nodes[mesh.elements[0].nodes[j * (q + 1) + i]];
            let (r, a) = (p.norm(), p.y.atan2(p.x));
            assert!(r > r0 && r < r1 && a > 0.0 && a < PI / 2.0, "{p:?}");
            assert!(d.contains(p));
        }
    }
}

#[test]
fn single_block_two_by_three() {
    let mesh = coarse_mesh(&square_blocks(), 2).unwrap();
    let pins = vec![
        ChordPin { block: 0, direction: 0, count: Some(2), grading: None },
        ChordPin { block: 0, direction: 1, count: Some(3), grading: None },
    ];
    let (fine, chords) = refine(&mesh, &SplitConfig { default_count: 4, pins }).unwrap();
    assert_eq!(fine.n_elements(), 6);
    assert_eq!(chords.predicted_elements(), 6);
    assert_eq!(fine.nodes.len(), (2 * 2 + 1) * (3 * 2 + 1));
    let report = validate(&fine, &ValidationThresholds::default());
    assert!(report.passed, "{:?}", report.failures);
    assert!((fine.area() - 1.0).abs() < 1e-13);
}

#[test]
fn shared_chords_give_coincident_sub_edges() {
    let mesh = coarse_mesh(&cross_blocks(), 2).unwrap();
    for grading in [None, Some(1.7)] {
        let pins = vec![ChordPin { block: 0, direction: 0, count: None, grading }];
        let (fine, chords) = refine(&mesh, &SplitConfig { default_count: 4, pins }).unwrap();
        assert_eq!(chords.counts.len(), 4);
        assert_eq!(fine.n_elements(), 64);
        assert_eq!(fine.nodes.len(), 17 * 17);
        let report = validate(&fine, &ValidationThresholds::default());
        assert!(report.conformity_violations.is_empty());
        assert!(report.passed, "{:?}", report.failures);
    }
}

#[test]
fn grading_spaces_breakpoints_geometrically() {
    let mesh = coarse_mesh(&square_blocks(), 1).unwrap();
    let pins = vec![ChordPin { block: 0, direction: 1, count: Some(3), grading: Some(2.0) }];
    let chords = Chords::build(&mesh, 4, &pins).unwrap();
    let t = chords.breakpoints(0, 1);
    let oracle = [0.0, 1.0 / 7.0, 3.0 / 7.0, 1.0];
    for (a, b) in t.iter().zip(oracle) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn conflicting_pins_are_rejected() {
    let set = cross_blocks();
    let mesh = coarse_mesh(&set, 1).unwrap();
    let chords = Chords::build(&mesh, 4, &[]).unwrap();
    let (c, _) = chords.of[0][0];
    let &(other, dir, _) = chords.members[c].iter().find(|m| m.0 != 0).unwrap();
    let pins = vec![
        ChordPin { block: 0, direction: 0, count: Some(2), grading: None },
        ChordPin { block: other, direction: dir, count: Some(3), grading: None },
    ];
    assert!(matches!(Chords::build(&mesh, 4, &pins), Err(QuadError::ConflictingPins { a: 2, b: 3, .. })));
    let bad = vec![ChordPin { block: 9, direction: 0, count: Some(2), grading: None }];
    assert!(matches!(Chords::build(&mesh, 4, &bad), Err(QuadError::UnknownPin { block: 9, .. })));
}

#[test]
fn half_disc_refinement_counts_and_quality() {
    let set = half_disc_blocks();
    let coarse = coarse_mesh(&set, 4).unwrap();
    let (fine, chords) = refine(&coarse, &SplitConfig::default()).unwrap();
    let expected: usize = (0..coarse.n_elements()).map(|e| chords.count(e, 0) * chords.count(e, 1)).sum();
    assert_eq!(fine.n_elements(), expected);
    assert_eq!(fine.n_elements(), 16 * coarse.n_elements());
    let report = validate(&fine, &ValidationThresholds::default());
    assert!(report.passed, "{:?}", report.failures);
    assert!((fine.area() - PI / 2.0).abs() <= 1e-6 * PI / 2.0, "{}", fine.area());
    for e in 0..coarse.n_elements() {
        let parent = coarse.scaled_jacobian(e);
        let worst = (0..fine.n_elements())
            .filter(|&k| fine.elements[k].block == coarse.elements[e].block)
            .map(|k| fine.scaled_jacobian(k))
            .fold(f64::INFINITY, f64::min);
        assert!(worst >= 0.9 * parent, "block {e}: {worst} < 0.9 × {parent}");
    }
}

#[test]
fn chord_propagation_is_a_fixed_point() {
    let coarse = coarse_mesh(&half_disc_blocks(), 2).unwrap();
    let pins = vec![ChordPin { block: 0, direction: 1, count: Some(3), grading: Some(1.3) }];
    let chords = Chords::build(&coarse, 5, &pins).unwrap();
    let again = Chords::build(&coarse, 5, &chords.as_pins()).unwrap();
    assert_eq!(again.counts, chords.counts);
    assert_eq!(again.of, chords.of);
    for (a, b) in again.grading.iter().zip(&chords.grading) {
        assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn inverted_element_fails_validation() {
    let mut mesh = coarse_mesh(&cross_blocks(), 1).unwrap();
    mesh.elements[2].nodes.swap(1, 2);
    let report = validate(&mesh, &ValidationThresholds::default());
    assert!(!report.passed);
    assert!(report.inverted.contains(&2), "{:?}", report.inverted);
}

#[test]
fn unmatched_interior_side_is_a_conformity_violation() {
    let mut mesh = coarse_mesh(&cross_blocks(), 1).unwrap();
    let copy = mesh.nodes[mesh.elements[0].nodes[1]];
    mesh.nodes.push(copy);
    let last = mesh.nodes.len() - 1;
    mesh.elements[0].nodes[1] = last;
    let report = validate(&mesh, &ValidationThresholds::default());
    assert!(!report.conformity_violations.is_empty());
    assert!(!report.passed);
}

#[test]
fn gmsh_export_lists_every_element() {
    let (fine, _) = refine(&coarse_mesh(&square_blocks(), 2).unwrap(), &SplitConfig::default()).unwrap();
    let text = to_gmsh(&fine).unwrap();
    let quads = text.lines().filter(|l| l.split(' ').nth(1) == Some("10")).count();
    let lines = text.lines().filter(|l| l.split(' ').nth(1) == Some("8")).count();
    assert_eq!(quads, 16);
    assert_eq!(lines, 16);
    assert!(text.contains(&format!("$Nodes\n{}\n", 9 * 9)));
    let six = coarse_mesh(&square_blocks(), 6).unwrap();
    assert!(matches!(to_gmsh(&six), Err(QuadError::BadOrder { order: 6, max: 4 })));
}

#[test]
fn mesh_json_round_trip() {
    let mesh = coarse_mesh(&cross_blocks(), 3).unwrap();
    let back = QuadMesh::from_json(&mesh.to_json()).unwrap();
    assert_eq!(back.nodes, mesh.nodes);
    assert_eq!(back.elements.len(), 4);
    assert!(back.domain().unwrap().is_ok());
    assert!(QuadMesh::from_json(r#"{"order":2,"nodes":[],"elements":[{"nodes":[0],"block":0,"sub":[0,0]}],"boundary":[]}"#).is_err());
}

#[test]
fn svg_draws_every_element() {
    let set = cross_blocks();
    let mesh = coarse_mesh(&set, 2).unwrap();
    let svg = mesh_svg(&mesh, Some(&set.splined.graph), None);
    assert_eq!(svg.matches("<polygon").count(), 4);
    assert!(svg.ends_with("</svg>\n"));
}

proptest! {
    #[test]
    fn node_pool_merges_within_tolerance(x in -10.0f64..10.0, y in -10.0f64..10.0, dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let tol = 1e-9;
        let mut pool = NodePool::new(tol);
        let a = pool.insert(Vec2::new(x, y));
        let off = Vec2::new(dx, dy) * 0.5e-9;
        prop_assert_eq!(pool.insert(Vec2::new(x, y) + off), a);
        let far = Vec2::new(dx, dy).normalize() * 1e-6;
        prop_assert_ne!(pool.insert(Vec2::new(x, y) + far), a);
    }

    #[test]
    fn refinement_tiles_the_square(n in 1usize..5, m in 1usize..5, r in 0.5f64..2.0, q in 1usize..4) {
        let mesh = coarse_mesh(&cross_blocks(), q).unwrap();
        let pins = vec![
            ChordPin { block: 1, direction: 0, count: Some(n), grading: Some(r) },
            ChordPin { block: 1, direction: 1, count: Some(m), grading: None },
        ];
        let (fine, chords) = refine(&mesh, &SplitConfig { default_count: 2, pins }).unwrap();
        prop_assert_eq!(fine.n_elements(), chords.predicted_elements());
        prop_assert!((fine.area() - 1.0).abs() < 1e-12);
        let report = validate(&fine, &ValidationThresholds::default());
        prop_assert!(report.passed, "{:?}", report.failures);
    }
}
