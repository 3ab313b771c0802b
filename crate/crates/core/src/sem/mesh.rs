use std::collections::HashMap;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::basis::{barycentric, curved_points, tri_rule, EDGE_VERTICES, REF_VERTICES};
use super::SemError;
use crate::geometry::{orient2d, BoundaryCurve, Domain, Vec2};
use crate::quadrature;

/// Barycentric tolerance for "inside the reference triangle".
pub const TAU_REF: f64 = 1e-8;

/// Boundary edge tag as stored in mesh files: the edge (va, vb) lies on
/// `curve`, with va at parameter `ta` and vb at `tb`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTag {
    pub va: usize,
    pub vb: usize,
    pub curve: usize,
    pub ta: f64,
    pub tb: f64,
}

/// Boundary edge resolved against its owning element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub elem: usize,
    pub local_edge: usize,
    pub curve: usize,
    /// Curve parameter at the first vertex of the local edge.
    pub t_start: f64,
    /// Curve parameter at the second vertex of the local edge.
    pub t_end: f64,
}

#[derive(Clone, Debug)]
pub struct CurvedEdge {
    pub local_edge: usize,
    pub curve: BoundaryCurve,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug)]
struct Affine {
    jac: Matrix2<f64>,
    jinv: Matrix2<f64>,
}

#[derive(Clone, Debug)]
struct Locator {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl Locator {
    fn cell_of(&self, p: Vec2) -> Option<usize> {
        let fx = ((p.x - self.origin.x) / self.cell).floor();
        let fy = ((p.y - self.origin.y) / self.cell).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some(fy as usize * self.nx + fx as usize)
    }
}

/// Conforming triangle mesh; boundary triangles may carry one curved edge.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    tags: Vec<BoundaryTag>,
    boundary: Vec<BoundaryEdge>,
    curved: Vec<Option<CurvedEdge>>,
    edges: Vec<[usize; 2]>,
    elem_edges: Vec<[usize; 3]>,
    edge_elems: Vec<Vec<(usize, usize)>>,
    affine: Vec<Affine>,
    diameters: Vec<f64>,
    locator: Locator,
}

#[derive(Serialize, Deserialize)]
struct TriMeshFile {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryTag>,
}

/// Blending kernel of a curved edge: with s the edge coordinate in [0, 1]
/// and gap(s) the deviation of the curve from its chord, returns
/// gap / (s (1 - s)) and its derivative in s.
fn edge_kernel(c: &CurvedEdge, s: f64) -> (Vec2, Vec2) {
    let dt = c.t_end - c.t_start;
    let (ga, gb) = (c.curve.point(c.t_start), c.curve.point(c.t_end));
    let chord = gb - ga;
    if (0.05..=0.95).contains(&s) {
        let ts = c.t_start + s * dt;
        let gap = c.curve.point(ts) - ga - chord * s;
        let dgap = c.curve.derivative(ts) * dt - chord;
        let q = s * (1.0 - s);
        return (gap / q, (dgap * q - gap * (1.0 - 2.0 * s)) / (q * q));
    }
    let rule = quadrature::gauss_legendre(10);
    let (mut d1, mut d2) = (Vec2::zeros(), Vec2::zeros());
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let u = (1.0 + x) / 2.0;
        let w = w / 2.0;
        let t = if s < 0.5 { c.t_start + u * s * dt } else { c.t_end - u * (1.0 - s) * dt };
        d1 += c.curve.derivative(t) * (w * dt);
        d2 += c.curve.second_derivative(t) * (w * u * dt * dt);
    }
    if s < 0.5 {
        let h = d1 - chord;
        let r = 1.0 - s;
        (h / r, d2 / r + h / (r * r))
    } else {
        let k = chord - d1;
        (k / s, -d2 / s - k / (s * s))
    }
}

impl TriMesh {
    /// Build and validate a mesh. Triangles are reoriented counter-clockwise;
    /// every edge with a single neighbour must be tagged.
    pub fn new(
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        tags: Vec<BoundaryTag>,
        domain: &Domain,
    ) -> Result<Self, SemError> {
        for (e, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(SemError::Format(format!("triangle {e} references a missing vertex")));
            }
            let o = orient2d(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if o.abs() <= 1e-14 * domain.diag() * domain.diag() {
                return Err(SemError::DegenerateTriangle(e));
            }
            if o < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_elems: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut elem_edges = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            let mut ids = [0; 3];
            for (k, &(a, b)) in EDGE_VERTICES.iter().enumerate() {
                let key = (t[a].min(t[b]), t[a].max(t[b]));
                let id = *edge_map.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_elems.push(Vec::new());
                    edges.len() - 1
                });
                edge_elems[id].push((e, k));
                if edge_elems[id].len() > 2 {
                    return Err(SemError::NonManifoldEdge(key.0, key.1));
                }
                ids[k] = id;
            }
            elem_edges.push(ids);
        }
        let mut tag_map: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for tag in &tags {
            let key = (tag.va.min(tag.vb), tag.va.max(tag.vb));
            match edge_map.get(&key) {
                Some(&id) if edge_elems[id].len() == 1 => {}
                _ => return Err(SemError::DanglingTag(tag.va, tag.vb)),
            }
            if tag.curve >= domain.curves().len() {
                return Err(SemError::Format(format!("boundary tag references missing curve {}", tag.curve)));
            }
            tag_map.insert(key, *tag);
        }
        let mut boundary = Vec::new();
        let mut curved: Vec<Option<CurvedEdge>> = vec![None; triangles.len()];
        for (id, adj) in edge_elems.iter().enumerate() {
            if adj.len() != 1 {
                continue;
            }
            let key = (edges[id][0], edges[id][1]);
            let tag = tag_map.get(&key).ok_or(SemError::UntaggedBoundaryEdge(key.0, key.1))?;
            let (e, k) = adj[0];
            let first = triangles[e][EDGE_VERTICES[k].0];
            let (t_start, t_end) = if first == tag.va { (tag.ta, tag.tb) } else { (tag.tb, tag.ta) };
            boundary.push(BoundaryEdge { elem: e, local_edge: k, curve: tag.curve, t_start, t_end });
            let curve = domain.curve(tag.curve);
            if !curve.is_straight() {
                if curved[e].is_some() {
                    return Err(SemError::MultipleCurvedEdges(e));
                }
                curved[e] = Some(CurvedEdge { local_edge: k, curve: curve.clone(), t_start, t_end });
            }
        }
        boundary.sort_by_key(|b| (b.curve, b.elem, b.local_edge));

        let affine = triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
                let jac = Matrix2::from_columns(&[(b - a) / 2.0, (c - a) / 2.0]);
                Affine { jac, jinv: jac.try_inverse().unwrap() }
            })
            .collect();

        let mut mesh = Self {
            vertices,
            triangles,
            tags,
            boundary,
            curved,
            edges,
            elem_edges,
            edge_elems,
            affine,
            diameters: Vec::new(),
            locator: Locator { origin: Vec2::zeros(), cell: 1.0, nx: 0, ny: 0, bins: Vec::new() },
        };
        mesh.diameters = (0..mesh.n_elements())
            .map(|e| {
                let t = mesh.triangles[e];
                let p = [mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]];
                (p[0] - p[1]).norm().max((p[1] - p[2]).norm()).max((p[2] - p[0]).norm())
            })
            .collect();
        mesh.check_jacobians()?;
        mesh.build_locator();
        Ok(mesh)
    }

    fn check_jacobians(&self) -> Result<(), SemError> {
        let rule = tri_rule(curved_points(8));
        for e in 0..self.n_elements() {
            let pts: Vec<[f64; 2]> = if self.is_curved(e) {
                rule.points.iter().copied().chain(REF_VERTICES).collect()
            } else {
                vec![[-1.0 / 3.0, -1.0 / 3.0]]
            };
            for xi in pts {
                let det = self.map(e, xi).1.determinant();
                if det <= 0.0 || !det.is_finite() {
                    return Err(SemError::InvertedElement { elem: e, det });
                }
            }
        }
        Ok(())
    }

    fn element_bbox(&self, e: usize) -> (Vec2, Vec2) {
        let t = self.triangles[e];
        let mut lo = self.vertices[t[0]];
        let mut hi = lo;
        let mut add = |p: Vec2| {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        };
        for &v in &t {
            add(self.vertices[v]);
        }
        if let Some(c) = &self.curved[e] {
            for k in 0..=16 {
                let s = k as f64 / 16.0;
                add(c.curve.point(c.t_start + s * (c.t_end - c.t_start)));
            }
        }
        (lo, hi)
    }

    fn build_locator(&mut self) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        let boxes: Vec<(Vec2, Vec2)> = (0..self.n_elements()).map(|e| self.element_bbox(e)).collect();
        for b in &boxes {
            lo = lo.inf(&b.0);
            hi = hi.sup(&b.1);
        }
        let span = hi - lo;
        let n = (self.n_elements() as f64).sqrt().ceil().max(1.0);
        let cell = (span.x.max(span.y) / n).max(1e-300);
        let pad = Vec2::repeat(1e-9 * span.norm());
        let origin = lo - pad;
        let nx = ((span.x + 2.0 * pad.x) / cell).ceil().max(1.0) as usize;
        let ny = ((span.y + 2.0 * pad.y) / cell).ceil().max(1.0) as usize;
        let mut bins = vec![Vec::new(); nx * ny];
        for (e, b) in boxes.iter().enumerate() {
            let i0 = (((b.0.x - origin.x) / cell).floor() as usize).min(nx - 1);
            let i1 = (((b.1.x - origin.x) / cell).floor() as usize).min(nx - 1);
            let j0 = (((b.0.y - origin.y) / cell).floor() as usize).min(ny - 1);
            let j1 = (((b.1.y - origin.y) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(e);
                }
            }
        }
        self.locator = Locator { origin, cell, nx, ny, bins };
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    /// Boundary edges sorted by (curve, element, local edge).
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn curved_edge(&self, e: usize) -> Option<&CurvedEdge> {
        self.curved[e].as_ref()
    }

    pub fn is_curved(&self, e: usize) -> bool {
        self.curved[e].is_some()
    }

    /// Global edges as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn element_edges(&self, e: usize) -> [usize; 3] {
        self.elem_edges[e]
    }

    /// (element, local edge) pairs adjacent to a global edge.
    pub fn edge_elements(&self, edge: usize) -> &[(usize, usize)] {
        &self.edge_elems[edge]
    }

    /// Whether local edge `k` of element `e` runs against its global orientation
    /// (global edges run from the lower to the higher vertex id).
    pub fn edge_reversed(&self, e: usize, k: usize) -> bool {
        let t = self.triangles[e];
        let (a, b) = EDGE_VERTICES[k];
        t[a] > t[b]
    }

    pub fn neighbors(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        self.elem_edges[e]
            .iter()
            .flat_map(move |&id| self.edge_elems[id].iter().map(|x| x.0).filter(move |&o| o != e))
    }

    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn element_vertices(&self, e: usize) -> [Vec2; 3] {
        let t = self.triangles[e];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn centroid(&self, e: usize) -> Vec2 {
        self.map(e, [-1.0 / 3.0, -1.0 / 3.0]).0
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let rule = tri_rule(curved_points(16));
        if !self.is_curved(e) {
            return 2.0 * self.affine[e].jac.determinant();
        }
        rule.points.iter().zip(&rule.weights).map(|(xi, w)| w * self.map(e, *xi).1.determinant()).sum()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    /// Physical point and Jacobian d x / d xi of the element mapping.
    pub fn map_to_physical(&self, e: usize, xi: [f64; 2]) -> Result<(Vec2, Matrix2<f64>), SemError> {
        if e >= self.n_elements() {
            return Err(SemError::InvalidElement(e));
        }
        Ok(self.map(e, xi))
    }

    pub(crate) fn map(&self, e: usize, xi: [f64; 2]) -> (Vec2, Matrix2<f64>) {
        let t = self.triangles[e];
        let l = barycentric(xi);
        let x0 = self.vertices[t[0]];
        let mut x = x0 * l[0] + self.vertices[t[1]] * l[1] + self.vertices[t[2]] * l[2];
        let mut jac = self.affine[e].jac;
        if let Some(c) = &self.curved[e] {
            let (a, b) = EDGE_VERTICES[c.local_edge];
            let dl = [[-0.5, -0.5], [0.5, 0.0], [0.0, 0.5]];
            let s = (1.0 + l[b] - l[a]) / 2.0;
            let (phi, dphi) = edge_kernel(c, s);
            let w = l[a] * l[b];
            x += phi * w;
            for k in 0..2 {
                let dw = dl[a][k] * l[b] + l[a] * dl[b][k];
                let ds = (dl[b][k] - dl[a][k]) / 2.0;
                let col = phi * dw + dphi * (w * ds);
                jac[(0, k)] += col.x;
                jac[(1, k)] += col.y;
            }
        }
        (x, jac)
    }

    /// Reference coordinates of a physical point for element `e`. The result
    /// may lie outside the reference triangle.
    pub fn inverse_map(&self, e: usize, x: Vec2) -> Result<[f64; 2], SemError> {
        if e >= self.n_elements() {
            return Err(SemError::InvalidElement(e));
        }
        let x0 = self.vertices[self.triangles[e][0]];
        let lin = self.affine[e].jinv * (x - x0);
        let mut xi = [lin.x - 1.0, lin.y - 1.0];
        if !self.is_curved(e) {
            return Ok(xi);
        }
        let tol = 1e-13 * self.diameters[e];
        for _ in 0..25 {
            let (p, jac) = self.map(e, xi);
            let r = p - x;
            if r.norm() <= tol {
                return Ok(xi);
            }
            let inv = jac.try_inverse().ok_or(SemError::NotInElement { elem: e })?;
            let d = inv * r;
            xi = [xi[0] - d.x, xi[1] - d.y];
            if !(xi[0].is_finite() && xi[1].is_finite()) || xi[0].abs() > 10.0 || xi[1].abs() > 10.0 {
                return Err(SemError::NotInElement { elem: e });
            }
        }
        let (p, _) = self.map(e, xi);
        if (p - x).norm() <= 1e3 * tol {
            Ok(xi)
        } else {
            Err(SemError::NotInElement { elem: e })
        }
    }

    /// Whether a reference point lies in the closed reference triangle up to `TAU_REF`.
    pub fn inside_reference(xi: [f64; 2]) -> bool {
        barycentric(xi).iter().all(|&l| l >= -TAU_REF)
    }

    fn try_element(&self, e: usize, x: Vec2) -> Option<[f64; 2]> {
        match self.inverse_map(e, x) {
            Ok(xi) if Self::inside_reference(xi) => Some(xi),
            _ => None,
        }
    }

    /// Find the element containing `x`, trying `hint` and its neighbours first.
    /// Ties between elements go to the lowest element id among grid candidates.
    pub fn locate(&self, x: Vec2, hint: Option<usize>) -> Option<(usize, [f64; 2])> {
        if let Some(h) = hint.filter(|&h| h < self.n_elements()) {
            if let Some(xi) = self.try_element(h, x) {
                return Some((h, xi));
            }
            for n in self.neighbors(h) {
                if let Some(xi) = self.try_element(n, x) {
                    return Some((n, xi));
                }
            }
        }
        let cell = self.locator.cell_of(x)?;
        for &e in &self.locator.bins[cell] {
            if let Some(xi) = self.try_element(e, x) {
                return Some((e, xi));
            }
        }
        None
    }

    pub fn to_json(&self) -> String {
        let f = TriMeshFile {
            vertices: self.vertices.iter().map(|p| [p.x, p.y]).collect(),
            triangles: self.triangles.clone(),
            boundary: self.tags.clone(),
        };
        serde_json::to_string(&f).expect("mesh serializes")
    }

    pub fn from_json(text: &str, domain: &Domain) -> Result<Self, SemError> {
        let f: TriMeshFile = serde_json::from_str(text).map_err(|e| SemError::Format(e.to_string()))?;
        let vertices = f.vertices.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        Self::new(vertices, f.triangles, f.boundary, domain)
    }
}
