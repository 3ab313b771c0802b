use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use super::graph::seed_nodes;
use super::integrate::Tracer;
use super::*;
use crate::adapt::{adapt_loop, AdaptConfig};
use crate::analysis::analyze;
use crate::geometry::{fixtures, point_in_polygon};
use crate::sem::mesher;
use crate::solver::{DiscretizationConfig, Scheme};

struct Case {
    domain: Domain,
    field: FieldSolution,
    report: AnalysisReport,
}

fn solve_case(domain: Domain) -> Case {
    let mesh = Arc::new(mesher::triangulate(&domain, 0.1 * domain.diag()).unwrap());
    let scheme = if domain.corners().iter().all(|c| c.is_right_angle_multiple()) { Scheme::Cg } else { Scheme::Dg };
    let disc = DiscretizationConfig::uniform(scheme, mesh.n_elements(), 3);
    let field = adapt_loop(&domain, &mesh, &AdaptConfig::default(), &disc).unwrap().field;
    let report = analyze(&field, &domain).unwrap();
    Case { domain, field, report }
}

fn half_disc() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| solve_case(fixtures::half_disc()))
}

fn half_disc_trace() -> &'static TraceResult {
    static RESULT: OnceLock<TraceResult> = OnceLock::new();
    RESULT.get_or_init(|| {
        let c = half_disc();
        trace(&c.field, &c.domain, &c.report, &TraceConfig::default()).unwrap()
    })
}

fn constant_field(domain: &Domain, u: f64, v: f64) -> FieldSolution {
    let mesh = Arc::new(mesher::triangulate(domain, 0.2 * domain.diag()).unwrap());
    let n = mesh.n_elements();
    FieldSolution::project(mesh, vec![1; n], |_| (u, v)).unwrap()
}

fn hausdorff(a: &[Vec2], b: &[Vec2]) -> f64 {
    let one = |p: &[Vec2], q: &[Vec2]| {
        p.iter().map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

fn densify(p: &[Vec2], spacing: f64) -> Vec<Vec2> {
    let mut out = vec![p[0]];
    for w in p.windows(2) {
        let n = ((w[1] - w[0]).norm() / spacing).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|k| w[0] + (w[1] - w[0]) * (k as f64 / n as f64)));
    }
    out
}

#[test]
fn adjusted_direction_snaps_to_nearest_branch() {
    let d = fixtures::unit_square();
    let f = constant_field(&d, 1.0, 0.0);
    let x = Vec2::new(0.4, 0.6);
    let a = adjusted_direction(&f, x, Vec2::new(1.0, 0.0)).unwrap();
    assert!((a - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    let b = adjusted_direction(&f, x, Vec2::new(0.1, 0.995).normalize()).unwrap();
    assert!((b - Vec2::new(0.0, 1.0)).norm() < 1e-12);
}

#[test]
fn config_rejects_small_merge_distance() {
    let d = fixtures::unit_square();
    let cfg = TraceConfig { step: Some(0.1), merge_distance: Some(0.05), aggressive: false };
    assert!(matches!(cfg.validate(&d), Err(TraceError::InvalidConfig(_))));
    let agg = TraceConfig { aggressive: true, ..TraceConfig::default() };
    assert!((agg.merge_distance_for(&d) - 5.0 * agg.step_for(&d)).abs() < 1e-15);
    assert!((TraceConfig::default().step_for(&d) - 0.02 * 2f64.sqrt()).abs() < 1e-15);
}

/// Directions where the linearized field J·d has phase equal to the
/// direction angle modulo π/2, by sign changes and bisection.
fn linearized_branches(grad_u: Vec2, grad_v: Vec2) -> Vec<f64> {
    let residual = |th: f64| {
        let d = Vec2::new(th.cos(), th.sin());
        let w = Vec2::new(grad_u.dot(&d), grad_v.dot(&d));
        crate::analysis::wrap_quarter(w.y.atan2(w.x) / 4.0 - th)
    };
    let n = 20_000;
    let mut out = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (2.0 * PI * k as f64 / n as f64, 2.0 * PI * (k + 1) as f64 / n as f64);
        let (ra, rb) = (residual(a), residual(b));
        if (ra < 0.0) == (rb < 0.0) || (ra - rb).abs() > 0.5 {
            continue;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if (residual(m) < 0.0) == (ra < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[test]
fn half_disc_directions_match_linearized_field() {
    let c = half_disc();
    for cp in c.report.irregular_points() {
        let (_, fv) = c.field.eval_at(cp.location, None).unwrap();
        let want = linearized_branches(fv.grad_u, fv.grad_v);
        assert_eq!(want.len(), 3);
        let dirs = initial_directions(&c.field, cp.location, 3, None, cp.radius).unwrap();
        assert_eq!(dirs.len(), 3);
        for d in &dirs {
            let a = angle_of(*d);
            let err = want.iter().map(|w| (a - w + PI).rem_euclid(2.0 * PI) - PI).map(f64::abs).fold(f64::INFINITY, f64::min);
            assert!(err < 0.1, "direction {a} vs {want:?}");
        }
        let gaps: f64 = (0..3).map(|i| (angle_of(dirs[(i + 1) % 3]) - angle_of(dirs[i])).rem_euclid(2.0 * PI)).sum();
        assert!((gaps - 2.0 * PI).abs() < 1e-9);
    }
}

#[test]
fn reentrant_corner_directions_are_wall_aligned() {
    let d = fixtures::l_shape();
    let f = constant_field(&d, 1.0, 0.0);
    let c = d.corners().iter().find(|c| c.interior_angle > PI).unwrap();
    let dirs = initial_directions(&f, c.location, 3, Some((c.sweep_start(), c.interior_angle)), 0.1).unwrap();
    assert_eq!(dirs.len(), 2);
    for (k, dir) in dirs.iter().enumerate() {
        let want = c.sweep_start() + (k + 1) as f64 * FRAC_PI_2;
        assert!((dir - Vec2::new(want.cos(), want.sin())).norm() < 1e-9);
    }
}

#[test]
fn valence_one_corner_has_no_branches() {
    let d = fixtures::unit_square();
    let f = constant_field(&d, 1.0, 0.0);
    let c = &d.corners()[0];
    let dirs = initial_directions(&f, c.location, 1, Some((c.sweep_start(), c.interior_angle)), 0.1).unwrap();
    assert!(dirs.is_empty());
}

#[test]
fn constant_field_streamline_is_uniformly_spaced() {
    let d = fixtures::unit_square();
    let f = constant_field(&d, 1.0, 0.0);
    let h = 0.05;
    let tracer = Tracer::new(&f, &d, h, h);
    let x0 = Vec2::new(0.0, 0.5);
    let mut s = tracer.start(0, Origin { node: 0, branch: 0 }, x0, Vec2::new(1.0, 0.0));
    let mut nodes = Vec::new();
    for _ in 0..12 {
        tracer.advance(&mut s, &mut nodes).unwrap();
    }
    for (k, p) in s.points.iter().enumerate() {
        assert!((p - (x0 + Vec2::new(k as f64 * h, 0.0))).norm() < 1e-12, "point {k}: {p:?}");
    }
    while s.is_active() {
        tracer.advance(&mut s, &mut nodes).unwrap();
    }
    let end = s.front();
    assert!((end - Vec2::new(1.0, 0.5)).norm() <= d.tau_geom());
    assert!(matches!(s.status, Status::Boundary { .. }));
}

proptest! {
    #[test]
    fn blend_keeps_endpoints(
        a in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..8),
        b in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..8),
        n in 1usize..40,
    ) {
        let a: Vec<Vec2> = a.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
        let b: Vec<Vec2> = b.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
        let m = blend(&a, &b, n);
        prop_assert_eq!(m.len(), n + 1);
        prop_assert_eq!(m[0], a[0]);
        prop_assert_eq!(m[n], b[0]);
    }

    #[test]
    fn blend_weight_is_monotone_in_unit_interval(s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        prop_assert!(blend_weight(lo) >= blend_weight(hi));
        prop_assert!((0.0..=1.0).contains(&blend_weight(s)));
    }
}

#[test]
fn blend_weight_endpoints() {
    assert_eq!(blend_weight(0.0), 1.0);
    assert!(blend_weight(1.0).abs() < 1e-16);
    assert!((blend_weight(0.5) - 0.5).abs() < 1e-15);
}

fn line(id: usize, node: usize, points: &[(f64, f64)], heading: (f64, f64)) -> Streamline {
    Streamline {
        id,
        origin: Origin { node, branch: 0 },
        points: points.iter().map(|&(x, y)| Vec2::new(x, y)).collect(),
        heading: Vec2::new(heading.0, heading.1),
        status: Status::Active,
        history: Vec::new(),
        hint: None,
    }
}

#[test]
fn parallel_streamlines_are_not_merged() {
    let lines =
        [line(0, 0, &[(0.0, 0.0), (0.1, 0.0)], (1.0, 0.0)), line(1, 1, &[(0.0, 0.05), (0.1, 0.05)], (1.0, 0.0))];
    assert!(merge::merge_scan(&lines, 0.1).is_empty());
}

#[test]
fn opposing_fronts_merge_once() {
    let lines = [
        line(0, 0, &[(0.0, 0.0), (0.1, 0.0)], (1.0, 0.0)),
        line(1, 1, &[(0.3, 0.02), (0.2, 0.02)], (-1.0, 0.0)),
        line(2, 2, &[(0.35, -0.02), (0.25, -0.02)], (-1.0, 0.0)),
    ];
    assert_eq!(merge::merge_scan(&lines, 0.15), vec![(0, 1)]);
}

#[test]
fn fronts_that_pass_within_a_round_merge() {
    // Sampled front distance is 0.2 before and after the round; the fronts
    // come within 0.05 halfway through it.
    let lines =
        [line(0, 0, &[(0.0, 0.0), (0.2, 0.0)], (1.0, 0.0)), line(1, 1, &[(0.2, 0.05), (0.0, 0.05)], (-1.0, 0.0))];
    assert_eq!(merge::merge_scan(&lines, 0.1), vec![(0, 1)]);
    let receding =
        [line(0, 0, &[(0.2, 0.0), (0.4, 0.0)], (1.0, 0.0)), line(1, 1, &[(0.2, 0.05), (0.0, 0.05)], (-1.0, 0.0))];
    assert!(merge::merge_scan(&receding, 0.1).is_empty());
}

/// Unit square with four boundary midpoint nodes, an interior node and
/// straight paths from it; `cross` instead runs two boundary-to-boundary
/// paths that cross at the center.
fn square_graph(cross: bool) -> SeparatrixGraph {
    let d = fixtures::unit_square();
    let mut nodes: Vec<GraphNode> = (0..4)
        .map(|i| {
            let c = d.curve(i);
            GraphNode {
                id: i,
                kind: NodeKind::Corner,
                location: c.start(),
                valence: 1,
                radius: 0.0,
                corner: Some(i),
                curve: Some(i),
                t: Some(c.param_range().0),
            }
        })
        .collect();
    for i in 0..4 {
        let c = d.curve(i);
        let (t0, t1) = c.param_range();
        let t = 0.5 * (t0 + t1);
        nodes.push(GraphNode::boundary(nodes.len(), c.point(t), i, t));
    }
    let center = Vec2::new(0.5, 0.5);
    let straight = |a: Vec2, b: Vec2| (0..=10).map(|k| a + (b - a) * (k as f64 / 10.0)).collect::<Vec<_>>();
    let mut paths = Vec::new();
    if cross {
        for (a, b) in [(4, 6), (5, 7)] {
            paths.push(SeparatrixPath {
                start: a,
                end: b,
                origins: vec![Origin { node: a, branch: 0 }],
                points: straight(nodes[a].location, nodes[b].location),
                merged: false,
            });
        }
    } else {
        let hub = nodes.len();
        nodes.push(GraphNode::interior(hub, NodeKind::Irregular, center, 4));
        for (branch, b) in (4..8).enumerate() {
            paths.push(SeparatrixPath {
                start: hub,
                end: b,
                origins: vec![Origin { node: hub, branch }],
                points: straight(center, nodes[b].location),
                merged: false,
            });
        }
    }
    SeparatrixGraph::build(&d, nodes, paths, 0.05, 0.05).unwrap()
}

#[test]
fn square_with_hub_has_four_quads() {
    for cross in [false, true] {
        let g = square_graph(cross);
        let faces = g.faces();
        assert_eq!(faces.len(), 4);
        for f in &faces {
            assert_eq!(f.corners.len(), 4);
            assert!((f.area - 0.25).abs() < 1e-12);
        }
        assert!(g.crossing_violations().is_empty());
        if cross {
            assert_eq!(g.nodes.iter().filter(|n| n.kind == NodeKind::Junction).count(), 1);
        } else {
            assert!(g.valence_violations().is_empty());
        }
    }
}

#[test]
fn graph_json_round_trip() {
    let g = square_graph(false);
    let back = SeparatrixGraph::from_json(&g.to_json()).unwrap();
    assert_eq!(back.nodes.len(), g.nodes.len());
    assert_eq!(back.edges.len(), g.edges.len());
    assert_eq!(back.faces().len(), 4);
    let svg = graph_svg(&g);
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
}

#[test]
fn half_disc_partition_is_all_quad() {
    let r = half_disc_trace();
    let g = &r.graph;
    let faces = g.faces();
    assert!(!faces.is_empty());
    assert!(g.non_quad_faces().is_empty(), "{:?}", g.non_quad_faces());
    let area: f64 = faces.iter().map(|f| f.area).sum();
    assert!((area - half_disc().domain.area()).abs() < 1e-3);
    assert!(r.streamlines.iter().all(|s| !s.is_active()));
}

#[test]
fn half_disc_bookkeeping_and_crossings() {
    let g = &half_disc_trace().graph;
    assert!(g.valence_violations().is_empty(), "{:?}", g.valence_violations());
    assert!(g.crossing_violations().is_empty());
}

#[test]
fn merged_paths_end_at_origins() {
    let g = &half_disc_trace().graph;
    for p in g.paths.iter().filter(|p| p.merged) {
        assert_eq!(p.points[0], g.nodes[p.start].location);
        assert_eq!(*p.points.last().unwrap(), g.nodes[p.end].location);
        assert_eq!(p.origins.len(), 2);
    }
}

#[test]
fn interior_steps_have_step_length() {
    let r = half_disc_trace();
    let h = r.graph.step;
    for s in &r.streamlines {
        let n = s.points.len();
        for w in s.points[..n - 1].windows(2) {
            let l = (w[1] - w[0]).norm();
            assert!((l - h).abs() <= 0.1 * h, "streamline {} step {l} vs {h}", s.id);
        }
    }
}

#[test]
fn adjusted_direction_turns_slowly_across_jump_lines() {
    let r = half_disc_trace();
    for s in &r.streamlines {
        let n = s.points.len();
        for w in s.points[..n - 1].windows(3) {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            let turn = (a.x * b.y - a.y * b.x).atan2(a.dot(&b)).abs();
            assert!(turn < 0.1, "streamline {} turns {turn}", s.id);
        }
    }
}

#[test]
fn halving_the_step_moves_separatrices_little() {
    let c = half_disc();
    let coarse = &half_disc_trace().graph;
    let h = coarse.step;
    let cfg = TraceConfig { step: Some(0.5 * h), ..TraceConfig::default() };
    let fine = trace(&c.field, &c.domain, &c.report, &cfg).unwrap().graph;
    let key = |p: &SeparatrixPath| p.origins.iter().map(|o| (o.node, o.branch)).collect::<BTreeSet<_>>();
    assert_eq!(coarse.paths.len(), fine.paths.len());
    for p in &coarse.paths {
        let q = fine.paths.iter().find(|q| key(q) == key(p)).expect("matching separatrix");
        let dist = hausdorff(&densify(&p.points, 0.1 * h), &densify(&q.points, 0.1 * h));
        assert!(dist <= 5.0 * h, "Hausdorff {dist} > 5h = {}", 5.0 * h);
    }
}

#[test]
fn nautilus_streamlines_all_terminate() {
    let c = solve_case(fixtures::nautilus());
    let r = trace(&c.field, &c.domain, &c.report, &TraceConfig::default()).unwrap();
    assert!(r.streamlines.iter().all(|s| !s.is_active()));
    assert!(r.graph.non_quad_faces().is_empty());
    assert!(r.graph.valence_violations().is_empty());
}

#[test]
fn sharp_corner_block_is_divided_into_quads() {
    let c = solve_case(fixtures::sharp_polygon());
    let r = trace(&c.field, &c.domain, &c.report, &TraceConfig::default()).unwrap();
    let g = &r.graph;
    let mids: Vec<&GraphNode> = g.nodes.iter().filter(|n| n.kind == NodeKind::Midpoint).collect();
    assert_eq!(mids.len(), 1);
    assert!(c.domain.contains(mids[0].location));
    assert!(g.non_quad_faces().is_empty(), "{:?}", g.non_quad_faces());
    assert!(g.valence_violations().is_empty(), "{:?}", g.valence_violations());
    assert!(g.crossing_violations().is_empty());
    let around = g.faces().iter().filter(|f| f.corner_nodes(g).contains(&mids[0].id)).count();
    assert_eq!(around, 3);
}

#[test]
fn midpoint_node_lies_inside_its_block() {
    // The undivided graph of the sharp polygon holds the triangular block.
    let c = solve_case(fixtures::sharp_polygon());
    let h = TraceConfig::default().step_for(&c.domain);
    let tracer = Tracer::new(&c.field, &c.domain, h, h);
    let mut nodes = seed_nodes(&c.domain, &c.report);
    let obtuse = nodes.iter().find(|n| n.kind == NodeKind::Corner && n.valence == 2).unwrap().clone();
    let corner = &c.domain.corners()[obtuse.corner.unwrap()];
    let dirs =
        initial_directions(&c.field, obtuse.location, 2, Some((corner.sweep_start(), corner.interior_angle)), obtuse.radius)
            .unwrap();
    let origin = Origin { node: obtuse.id, branch: 0 };
    let (points, end) = tracer.run_to_end(origin, obtuse.location, dirs[0], &mut nodes).unwrap();
    let path = SeparatrixPath { start: obtuse.id, end, origins: vec![origin], points, merged: false };
    let g = SeparatrixGraph::build(&c.domain, nodes, vec![path], h, h).unwrap();
    let sharp = g.nodes.iter().find(|n| n.kind == NodeKind::Corner && n.valence == 0).unwrap();
    let faces = g.faces();
    let block = faces.iter().find(|f| f.corner_nodes(&g).contains(&sharp.id)).unwrap();
    assert_eq!(block.corners.len(), 3);
    let outline = block.outline(&g);
    let divided = midpoint_division(&c.field, &c.domain, &g, sharp.corner.unwrap()).unwrap();
    let mid = divided.nodes.iter().find(|n| n.kind == NodeKind::Midpoint).unwrap();
    assert!(point_in_polygon(mid.location, &outline));
    assert!(divided.non_quad_faces().is_empty());
}

#[test]
fn midpoint_division_refuses_regular_corner() {
    let c = half_disc();
    let g = &half_disc_trace().graph;
    let err = midpoint_division(&c.field, &c.domain, g, 0).unwrap_err();
    assert!(matches!(err, TraceError::NotDegenerate { corner: 0, valence: 1 }));
}

