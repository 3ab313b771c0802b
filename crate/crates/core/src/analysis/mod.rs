//! Topology of the guiding field: phase, critical points, indices and valences.

mod contour;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use contour::{offset_boundary_index, offset_boundary_loops, raw_jumps, wrap_quarter, ContourIntegral, MAX_INCREMENT};
use contour::{circle, integrate_path, PhaseSampler};

use crate::geometry::{Corner, Domain, Vec2};
use crate::sem::{FieldSolution, TriMesh};

/// Largest accepted distance of a pre-rounding valence from its integer.
pub const TAU_ROUND: f64 = 0.2;
const NEWTON_ITERATIONS: usize = 60;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("phase is undefined at a critical point (|v| = {magnitude:e})")]
    AtCriticalPoint { magnitude: f64 },
    #[error("contour point ({x}, {y}) lies outside the mesh")]
    OutsideMesh { x: f64, y: f64 },
    #[error("circle of radius {radius:e} around ({x}, {y}) leaves the domain")]
    CircleOutside { x: f64, y: f64, radius: f64 },
    #[error("circle of radius {radius:e} around ({x}, {y}) also encloses the critical point at ({ox}, {oy}); shrink the radius")]
    OtherPointInside { x: f64, y: f64, radius: f64, ox: f64, oy: f64 },
    #[error("phase along the contour is not resolved with {samples} samples")]
    Unresolved { samples: usize },
    #[error(
        "critical point at ({x}, {y}) has index {index}; higher-index points are degenerate, perturb the mesh or geometry to split it"
    )]
    DegenerateIndex { x: f64, y: f64, index: i64 },
    #[error("corner {corner}: valence {value:.3} is not within {TAU_ROUND} of an integer; the field is under-resolved near the corner")]
    CornerUnresolved { corner: usize, value: f64 },
    #[error("corner {corner}: negative valence {value:.3}")]
    NegativeValence { corner: usize, value: f64 },
    #[error("probe radius must be positive and finite, got {0}")]
    BadRadius(f64),
}

/// ψ = atan2(v, u) / 4 in [−π/4, π/4].
pub fn psi(u: f64, v: f64, tau_crit: f64) -> Result<f64, AnalysisError> {
    let magnitude = u.hypot(v);
    if magnitude <= tau_crit {
        return Err(AnalysisError::AtCriticalPoint { magnitude });
    }
    Ok(v.atan2(u) / 4.0)
}

/// The four cross directions at ψ + kπ/2.
pub fn cross_directions(psi: f64) -> [Vec2; 4] {
    std::array::from_fn(|k| {
        let a = psi + k as f64 * FRAC_PI_2;
        Vec2::new(a.cos(), a.sin())
    })
}

/// Critical-point threshold 1e-8 · max |v|.
pub fn tau_crit(field: &FieldSolution) -> f64 {
    1e-8 * field.max_magnitude()
}

/// A zero of the field found by Newton iteration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalRoot {
    pub location: Vec2,
    pub element: usize,
    pub xi: [f64; 2],
    pub magnitude: f64,
}

/// Critical point with its Poincaré index and valence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec2,
    pub element: usize,
    pub xi: [f64; 2],
    pub index: i64,
    pub valence: i64,
    pub radius: f64,
    /// Valence other than 3 or 5.
    pub degenerate: bool,
}

/// Valence of a boundary corner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CornerValence {
    pub corner: usize,
    pub location: Vec2,
    pub delta_theta: f64,
    /// Open-arc integral of dψ / (π/2) from the outgoing to the incoming wall.
    pub integral: f64,
    pub valence: i64,
    /// Distance of the pre-rounding value from `valence`.
    pub residual: f64,
    pub radius: f64,
    pub degenerate: bool,
}

/// Index measured on a closed contour.
#[derive(Clone, Copy, Debug)]
pub struct IndexMeasurement {
    pub index: i64,
    pub value: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tau_crit: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub corners: Vec<CornerValence>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Irregular interior points (valence other than 4).
    pub fn irregular_points(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points.iter().filter(|c| c.valence != 4)
    }
}

pub fn interior_valence(index: i64) -> i64 {
    4 - index
}

fn reference_lattice(m: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for j in 0..=m {
        for i in 0..=m - j {
            pts.push([-1.0 + 2.0 * i as f64 / m as f64, -1.0 + 2.0 * j as f64 / m as f64]);
        }
    }
    pts
}

/// Whether both components change sign over a lattice of the element.
fn is_candidate(field: &FieldSolution, e: usize) -> bool {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for xi in reference_lattice(field.order(e) + 3) {
        let (u, v) = field.value(e, xi);
        for (k, x) in [u, v].into_iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    (0..2).all(|k| lo[k] <= 0.0 && hi[k] >= 0.0)
}

fn newton(field: &FieldSolution, e: usize, mut xi: [f64; 2], tau: f64) -> Option<CriticalRoot> {
    let mesh = field.mesh();
    for _ in 0..NEWTON_ITERATIONS {
        let val = field.eval(e, xi);
        let (x, jac) = mesh.map_to_physical(e, xi).ok()?;
        let magnitude = val.magnitude();
        if magnitude <= tau {
            if !TriMesh::inside_reference(xi) {
                return None;
            }
            return Some(CriticalRoot { location: x, element: e, xi, magnitude });
        }
        let g = Matrix2::new(val.grad_u.x, val.grad_u.y, val.grad_v.x, val.grad_v.y);
        let step = (g * jac).try_inverse()? * Vec2::new(val.u, val.v);
        xi = [xi[0] - step.x, xi[1] - step.y];
        if !(xi[0].is_finite() && xi[1].is_finite()) || xi[0].abs() > 4.0 || xi[1].abs() > 4.0 {
            return None;
        }
    }
    None
}

const SEEDS: [[f64; 2]; 5] = [[-1.0 / 3.0, -1.0 / 3.0], [-0.8, -0.8], [0.6, -0.8], [-0.8, 0.6], [-0.5, -0.5]];

/// Zeros of the field, located per candidate element by Newton iteration in
/// reference coordinates. Roots within 1e-6 · bbox diagonal of each other are
/// merged, keeping the smaller residual. Sorted by location.
pub fn find_critical_points(field: &FieldSolution) -> Vec<CriticalRoot> {
    let mesh = field.mesh();
    let tau = tau_crit(field);
    let found: Vec<CriticalRoot> = (0..mesh.n_elements())
        .into_par_iter()
        .filter(|&e| is_candidate(field, e))
        .flat_map_iter(|e| {
            let roots: Vec<CriticalRoot> = SEEDS.iter().filter_map(|&s| newton(field, e, s, tau)).collect();
            if roots.is_empty() {
                log::debug!("no critical point converged in candidate element {e}");
            }
            roots
        })
        .collect();
    let tau_dup = 1e-6 * mesh_diag(mesh);
    let mut kept: Vec<CriticalRoot> = Vec::new();
    for r in found {
        match kept.iter_mut().find(|k| (k.location - r.location).norm() <= tau_dup) {
            Some(k) if r.magnitude < k.magnitude => *k = r,
            Some(_) => {}
            None => kept.push(r),
        }
    }
    kept.sort_by(|a, b| a.location.x.total_cmp(&b.location.x).then(a.location.y.total_cmp(&b.location.y)));
    kept
}

fn mesh_diag(mesh: &TriMesh) -> f64 {
    let (mut lo, mut hi) = (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY));
    for p in mesh.vertices() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Poincaré index on the counter-clockwise circle of radius `radius`.
/// `others` are the remaining known critical points, none of which may lie
/// inside the circle.
pub fn poincare_index(
    field: &FieldSolution,
    center: Vec2,
    radius: f64,
    others: &[Vec2],
) -> Result<IndexMeasurement, AnalysisError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(AnalysisError::BadRadius(radius));
    }
    if let Some(o) = others.iter().find(|o| (*o - center).norm() <= radius) {
        return Err(AnalysisError::OtherPointInside { x: center.x, y: center.y, radius, ox: o.x, oy: o.y });
    }
    let mut sampler = PhaseSampler::new(field, tau_crit(field));
    let r = integrate_path(&mut sampler, 64, circle(center, radius)).map_err(|err| match err {
        AnalysisError::OutsideMesh { .. } => AnalysisError::CircleOutside { x: center.x, y: center.y, radius },
        other => other,
    })?;
    Ok(IndexMeasurement { index: r.value.round() as i64, value: r.value, samples: r.samples })
}

/// Default probe radius: the smallest of half the distance to the nearest
/// other critical point, a quarter of the owning element's diameter and the
/// distance to the boundary minus τ_geom.
pub fn default_radius(domain: &Domain, mesh: &TriMesh, root: &CriticalRoot, others: &[Vec2]) -> f64 {
    let nearest = others.iter().map(|o| (o - root.location).norm()).fold(f64::INFINITY, f64::min);
    let wall = domain.project_to_boundary(root.location).distance - domain.tau_geom();
    (0.5 * nearest).min(0.25 * mesh.diameter(root.element)).min(wall)
}

/// Valence of a corner from the open arc of radius `radius` swept through the
/// domain: 𝒱 = Δθ/(π/2) − I(θ0, θf).
pub fn corner_valence(
    field: &FieldSolution,
    domain: &Domain,
    corner: &Corner,
    radius: f64,
) -> Result<CornerValence, AnalysisError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(AnalysisError::BadRadius(radius));
    }
    let (theta0, dtheta) = (corner.sweep_start(), corner.interior_angle);
    let center = corner.location;
    let arc = move |s: f64| {
        let a = theta0 + dtheta * s;
        center + Vec2::new(a.cos(), a.sin()) * radius
    };
    let mut sampler = PhaseSampler::new(field, tau_crit(field)).with_boundary_fallback(domain);
    let n0 = (64.0 * dtheta / PI).ceil() as usize;
    let r = integrate_path(&mut sampler, n0, arc)?;
    let value = dtheta / FRAC_PI_2 - r.value;
    let valence = value.round();
    let residual = (value - valence).abs();
    if residual > TAU_ROUND {
        return Err(AnalysisError::CornerUnresolved { corner: corner.id, value });
    }
    if valence < 0.0 {
        return Err(AnalysisError::NegativeValence { corner: corner.id, value });
    }
    Ok(CornerValence {
        corner: corner.id,
        location: center,
        delta_theta: dtheta,
        integral: r.value,
        valence: valence as i64,
        residual,
        radius,
        degenerate: valence == 0.0,
    })
}

/// Default corner arc radius: a quarter of the smallest element touching the
/// corner, and at most half the distance to any interior critical point.
pub fn default_corner_radius(mesh: &TriMesh, corner: &Corner, critical: &[Vec2], tol: f64) -> f64 {
    let verts = mesh.vertices();
    let smallest = (0..mesh.n_elements())
        .filter(|&e| mesh.triangles()[e].iter().any(|&v| (verts[v] - corner.location).norm() <= tol))
        .map(|e| mesh.diameter(e))
        .fold(f64::INFINITY, f64::min);
    let nearest = critical.iter().map(|c| (c - corner.location).norm()).fold(f64::INFINITY, f64::min);
    (0.25 * smallest).min(0.5 * nearest)
}

/// Groups of roots closer than a quarter of their owning elements' diameter
/// (single linkage). A discretized higher-index zero splits into such a group.
pub fn cluster_roots(mesh: &TriMesh, roots: &[CriticalRoot]) -> Vec<Vec<usize>> {
    let n = roots.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let reach = 0.25 * mesh.diameter(roots[i].element).max(mesh.diameter(roots[j].element));
            if (roots[i].location - roots[j].location).norm() < reach {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut label, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Critical points with indices and valences, and every corner's valence.
pub fn analyze(field: &FieldSolution, domain: &Domain) -> Result<AnalysisReport, AnalysisError> {
    let mesh = field.mesh();
    let roots = find_critical_points(field);
    let groups = cluster_roots(mesh, &roots);
    let reps: Vec<CriticalRoot> = groups
        .iter()
        .map(|g| {
            let mut rep = roots[g[0]];
            if g.len() > 1 {
                let centroid = g.iter().map(|&i| roots[i].location).sum::<Vec2>() / g.len() as f64;
                if let Some((e, xi)) = mesh.locate(centroid, Some(rep.element)) {
                    rep = CriticalRoot { location: centroid, element: e, xi, magnitude: rep.magnitude };
                }
            }
            rep
        })
        .collect();
    let locations: Vec<Vec2> = reps.iter().map(|r| r.location).collect();
    let critical_points = reps
        .par_iter()
        .zip(&groups)
        .enumerate()
        .map(|(i, (root, group))| {
            let others: Vec<Vec2> =
                locations.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
            let spread = group.iter().map(|&k| (roots[k].location - root.location).norm()).fold(0.0, f64::max);
            let radius = default_radius(domain, mesh, root, &others).max(2.0 * spread);
            let m = poincare_index(field, root.location, radius, &others)?;
            if m.index.abs() > 1 {
                return Err(AnalysisError::DegenerateIndex { x: root.location.x, y: root.location.y, index: m.index });
            }
            let valence = interior_valence(m.index);
            Ok(CriticalPoint {
                location: root.location,
                element: root.element,
                xi: root.xi,
                index: m.index,
                valence,
                radius,
                degenerate: valence != 3 && valence != 5,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let corners = domain
        .corners()
        .iter()
        .map(|c| {
            let radius = default_corner_radius(mesh, c, &locations, domain.tau_geom());
            corner_valence(field, domain, c, radius)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AnalysisReport { tau_crit: tau_crit(field), critical_points, corners })
}
