//! Background triangle meshes: structured meshes for canonical shapes and a
//! constrained Delaunay mesher for general domains.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::mesh::{BoundaryTag, TriMesh};
use super::SemError;
use crate::geometry::{BoundaryCurve, Domain, Vec2};

/// (curve id, parameter) pairs of a boundary vertex.
type Membership = Vec<(usize, f64)>;

fn add_membership(domain: &Domain, m: &mut Membership, curve: usize, t: f64) {
    let c = domain.curve(curve);
    let (t0, t1) = c.param_range();
    let eps = 1e-12 * (1.0 + (t1 - t0).abs());
    let push = |m: &mut Membership, t: f64| {
        if !m.iter().any(|&(ci, ti)| ci == curve && (ti - t).abs() <= eps) {
            m.push((curve, t));
        }
    };
    push(m, t);
    // A closed curve meets itself; its start vertex is also its end vertex.
    if (c.start() - c.end()).norm() <= domain.tau_geom() {
        if (t - t0).abs() <= eps {
            push(m, t1);
        } else if (t - t1).abs() <= eps {
            push(m, t0);
        }
    }
    // Curve endpoints also belong to the neighbouring curve.
    if (t - t1).abs() <= eps {
        let next = domain.next_curve(curve);
        if next != curve {
            push_other(domain, m, next, domain.curve(next).param_range().0);
        }
    } else if (t - t0).abs() <= eps {
        let prev = domain.prev_curve(curve);
        if prev != curve {
            push_other(domain, m, prev, domain.curve(prev).param_range().1);
        }
    }
}

fn push_other(domain: &Domain, m: &mut Membership, curve: usize, t: f64) {
    let (t0, t1) = domain.curve(curve).param_range();
    let eps = 1e-12 * (1.0 + (t1 - t0).abs());
    if !m.iter().any(|&(ci, ti)| ci == curve && (ti - t).abs() <= eps) {
        m.push((curve, t));
    }
}

/// Membership of a vertex found by projection, for meshes without boundary bookkeeping.
fn membership_by_projection(domain: &Domain, p: Vec2) -> Membership {
    let mut m = Vec::new();
    let tol = 1e-9 * domain.diag();
    for (id, c) in domain.curves().iter().enumerate() {
        let pr = c.project(p);
        if pr.distance <= tol {
            let (t0, t1) = c.param_range();
            let snap = |t: f64| {
                if (c.point(t0) - p).norm() <= tol {
                    t0
                } else if (c.point(t1) - p).norm() <= tol {
                    t1
                } else {
                    t
                }
            };
            add_membership(domain, &mut m, id, snap(pr.t));
        }
    }
    m
}

/// Tag boundary edges, split triangles with two or more curved edges, and build the mesh.
fn finalize(
    domain: &Domain,
    mut vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    members: &HashMap<usize, Membership>,
) -> Result<TriMesh, SemError> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut tags = Vec::new();
    let mut tag_of: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    let mut keys: Vec<_> = count.iter().filter(|(_, &c)| c == 1).map(|(k, _)| *k).collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let (ma, mb) = match (members.get(&a), members.get(&b)) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(SemError::UntaggedBoundaryEdge(a, b)),
        };
        let mut best: Option<BoundaryTag> = None;
        for &(ca, ta) in ma {
            for &(cb, tb) in mb {
                if ca != cb {
                    continue;
                }
                let better = best.map_or(true, |bt| (ta - tb).abs() < (bt.ta - bt.tb).abs());
                if better {
                    best = Some(BoundaryTag { va: a, vb: b, curve: ca, ta, tb });
                }
            }
        }
        let tag = best.ok_or(SemError::UntaggedBoundaryEdge(a, b))?;
        tags.push(tag);
        tag_of.insert((a, b), tag);
    }
    let mut out = Vec::with_capacity(triangles.len());
    for t in triangles {
        let curved = (0..3)
            .filter(|&k| {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                tag_of.get(&(a.min(b), a.max(b))).is_some_and(|tag| !domain.curve(tag.curve).is_straight())
            })
            .count();
        if curved >= 2 {
            let c = (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
            vertices.push(c);
            let ci = vertices.len() - 1;
            out.push([t[0], t[1], ci]);
            out.push([t[1], t[2], ci]);
            out.push([t[2], t[0], ci]);
        } else {
            out.push(t);
        }
    }
    TriMesh::new(vertices, out, tags, domain)
}

/// Build a mesh from raw vertices and triangles, recovering boundary tags by
/// projecting vertices onto the domain boundary.
pub fn from_triangles(domain: &Domain, vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<TriMesh, SemError> {
    let mut on_boundary = HashSet::new();
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    for ((a, b), c) in count {
        if c == 1 {
            on_boundary.insert(a);
            on_boundary.insert(b);
        }
    }
    let members = on_boundary.into_iter().map(|v| (v, membership_by_projection(domain, vertices[v]))).collect();
    finalize(domain, vertices, triangles, &members)
}

/// Structured meshes for the canonical fixtures: `"square"` (any axis-aligned
/// rectangle), `"half_disc"` and `"annular_sector"`. `n` controls resolution.
pub fn structured(domain: &Domain, kind: &str, n: usize) -> Result<TriMesh, SemError> {
    let n = n.max(1);
    let (verts, tris) = match kind {
        "square" => {
            let (lo, hi) = domain.bbox();
            let mut v = Vec::new();
            for j in 0..=n {
                for i in 0..=n {
                    let s = i as f64 / n as f64;
                    let t = j as f64 / n as f64;
                    v.push(Vec2::new(lo.x + s * (hi.x - lo.x), lo.y + t * (hi.y - lo.y)));
                }
            }
            let id = |i: usize, j: usize| j * (n + 1) + i;
            let mut t = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    // Alternate diagonals for a symmetric pattern.
                    if (i + j) % 2 == 0 {
                        t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                        t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                    } else {
                        t.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                        t.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                    }
                }
            }
            (v, t)
        }
        "half_disc" => polar_rings(n, 0.0, 1.0, 0.0, PI),
        "annular_sector" => {
            let (r0, r1) = (1.0, 2.0);
            let m = 2 * n;
            let mut v = Vec::new();
            for j in 0..=n {
                for i in 0..=m {
                    let r = r0 + (r1 - r0) * j as f64 / n as f64;
                    let a = PI / 2.0 * i as f64 / m as f64;
                    v.push(Vec2::new(r * a.cos(), r * a.sin()));
                }
            }
            let id = |i: usize, j: usize| j * (m + 1) + i;
            let mut t = Vec::new();
            for j in 0..n {
                for i in 0..m {
                    t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                    t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                }
            }
            (v, t)
        }
        other => return Err(SemError::Meshing(format!("no structured mesher for {other}"))),
    };
    from_triangles(domain, verts, tris)
}

/// Rings of radius r0 + (r1 - r0) i / n between angles a0 and a1; ring i has
/// 2i segments, the innermost ring collapses to the center point when r0 = 0.
fn polar_rings(n: usize, r0: f64, r1: f64, a0: f64, a1: f64) -> (Vec<Vec2>, Vec<[usize; 3]>) {
    let mut v = vec![Vec2::zeros()];
    let mut rings: Vec<Vec<(usize, f64)>> = vec![vec![(0, 0.0)]];
    for i in 1..=n {
        let r = r0 + (r1 - r0) * i as f64 / n as f64;
        let m = 2 * i;
        let ring = (0..=m)
            .map(|j| {
                let s = j as f64 / m as f64;
                let a = a0 + s * (a1 - a0);
                v.push(Vec2::new(r * a.cos(), r * a.sin()));
                (v.len() - 1, s)
            })
            .collect();
        rings.push(ring);
    }
    let mut t = Vec::new();
    for fan in &rings[1].windows(2).collect::<Vec<_>>() {
        t.push([0, fan[0].0, fan[1].0]);
    }
    for i in 2..=n {
        let (inner, outer) = (&rings[i - 1], &rings[i]);
        let (mut a, mut b) = (0, 0);
        while a + 1 < inner.len() || b + 1 < outer.len() {
            let advance_outer = if a + 1 >= inner.len() {
                true
            } else if b + 1 >= outer.len() {
                false
            } else {
                outer[b + 1].1 <= inner[a + 1].1
            };
            if advance_outer {
                t.push([inner[a].0, outer[b].0, outer[b + 1].0]);
                b += 1;
            } else {
                t.push([inner[a].0, outer[b].0, inner[a + 1].0]);
                a += 1;
            }
        }
    }
    (v, t)
}

/// Boundary sample parameters for one curve: pieces no longer than `h` and
/// turning at most pi/12.
fn sample_curve(c: &BoundaryCurve, h: f64) -> Vec<f64> {
    let n = (c.length() / h).ceil().max(1.0) as usize;
    let mut ts: Vec<f64> = (0..=n).map(|k| c.param_at_length_fraction(k as f64 / n as f64)).collect();
    let max_turn = PI / 12.0;
    let mut i = 0;
    while i + 1 < ts.len() {
        let (a, b) = (ts[i], ts[i + 1]);
        let da = c.derivative(a);
        let db = c.derivative(b);
        let turn = (da.x * db.y - da.y * db.x).atan2(da.dot(&db)).abs();
        let dm = c.derivative(0.5 * (a + b));
        let turn2 = (da.x * dm.y - da.y * dm.x).atan2(da.dot(&dm)).abs();
        if (turn > max_turn || turn2 > max_turn) && (b - a) > 1e-9 * (1.0 + b.abs()) {
            ts.insert(i + 1, 0.5 * (a + b));
        } else {
            i += 1;
        }
    }
    ts
}

/// Constrained Delaunay mesh with target edge length `h`.
pub fn triangulate(domain: &Domain, h: f64) -> Result<TriMesh, SemError> {
    if !(h > 0.0) {
        return Err(SemError::Meshing(format!("mesh size must be positive, got {h}")));
    }
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut members: HashMap<usize, Membership> = HashMap::new();
    // Chords of the boundary polygon: (curve, ta, tb, pa, pb).
    let mut chords: Vec<(usize, f64, f64, Vec2, Vec2)> = Vec::new();
    let err = |e: spade::InsertionError| SemError::Meshing(format!("{e:?}"));
    for li in 0..domain.loop_count() {
        let mut loop_handles = Vec::new();
        for id in domain.loop_curves(li) {
            let c = domain.curve(id);
            let ts = sample_curve(c, h);
            for w in ts.windows(2) {
                chords.push((id, w[0], w[1], c.point(w[0]), c.point(w[1])));
            }
            for &t in &ts[..ts.len() - 1] {
                let p = c.point(t);
                let handle = cdt.insert(Point2::new(p.x, p.y)).map_err(err)?;
                let m = members.entry(handle.index()).or_default();
                add_membership(domain, m, id, t);
                loop_handles.push(handle);
            }
        }
        for k in 0..loop_handles.len() {
            let (a, b) = (loop_handles[k], loop_handles[(k + 1) % loop_handles.len()]);
            if cdt.can_add_constraint(a, b) {
                cdt.add_constraint(a, b);
            } else {
                return Err(SemError::Meshing("boundary sampling produced crossing constraints".into()));
            }
        }
    }
    let params = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .with_max_allowed_area(h * h * 3f64.sqrt() / 4.0)
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .with_max_additional_vertices(200_000);
    let result = cdt.refine(params);
    let excluded: HashSet<usize> = result.excluded_faces.iter().map(|f| f.index()).collect();

    let mut vertices: Vec<Vec2> = cdt.vertices().map(|v| Vec2::new(v.position().x, v.position().y)).collect();
    // Vertices inserted on boundary chords are moved onto the curves.
    let scale = domain.diag();
    for (idx, p) in vertices.iter_mut().enumerate() {
        if members.contains_key(&idx) {
            continue;
        }
        for &(id, ta, tb, pa, pb) in &chords {
            let d = pb - pa;
            let s = (*p - pa).dot(&d) / d.norm_squared();
            if !(0.0..=1.0).contains(&s) {
                continue;
            }
            let off = (pa + d * s - *p).norm();
            if off <= 1e-10 * scale {
                let c = domain.curve(id);
                let t = ta + s * (tb - ta);
                *p = c.point(t);
                let m = members.entry(idx).or_default();
                add_membership(domain, m, id, t);
                break;
            }
        }
    }
    let mut used = vec![false; vertices.len()];
    let mut triangles = Vec::new();
    for f in cdt.inner_faces() {
        if excluded.contains(&f.fix().index()) {
            continue;
        }
        let vs = f.vertices();
        let t = [vs[0].fix().index(), vs[1].fix().index(), vs[2].fix().index()];
        for &i in &t {
            used[i] = true;
        }
        triangles.push(t);
    }
    // Compact away unused vertices.
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut compact = Vec::new();
    let mut cmembers = HashMap::new();
    for (i, p) in vertices.into_iter().enumerate() {
        if used[i] {
            remap[i] = compact.len();
            if let Some(m) = members.remove(&i) {
                cmembers.insert(compact.len(), m);
            }
            compact.push(p);
        }
    }
    for t in &mut triangles {
        for v in t.iter_mut() {
            *v = remap[*v];
        }
    }
    finalize(domain, compact, triangles, &cmembers)
}

/// Structured mesh for known fixture names, Delaunay otherwise.
pub fn auto(domain: &Domain, fixture: Option<&str>, h: f64) -> Result<TriMesh, SemError> {
    match fixture {
        Some(kind @ ("square" | "half_disc" | "annular_sector")) => {
            let n = (domain.diag() / h / std::f64::consts::SQRT_2).ceil().max(2.0) as usize;
            structured(domain, kind, n)
        }
        _ => triangulate(domain, h),
    }
}
