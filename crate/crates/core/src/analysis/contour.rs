//! Phase winding along sampled contours.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use serde::Serialize;

use super::AnalysisError;
use crate::geometry::{wrap_angle, Domain, Vec2};
use crate::sem::FieldSolution;

/// Largest accepted wrapped ψ increment between consecutive samples.
pub const MAX_INCREMENT: f64 = FRAC_PI_8;
const MAX_SAMPLES: usize = 1 << 17;

/// Wrap a ψ increment into (−π/4, π/4].
pub fn wrap_quarter(d: f64) -> f64 {
    wrap_angle(4.0 * d) / 4.0
}

/// Result of integrating dψ along a sampled path.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ContourIntegral {
    /// Sum of wrapped ψ increments divided by π/2.
    pub value: f64,
    pub samples: usize,
    /// Largest |wrapped increment| after refinement.
    pub max_increment: f64,
}

/// Field phase sampler with a location hint.
pub(crate) struct PhaseSampler<'a> {
    field: &'a FieldSolution,
    tau_crit: f64,
    fallback: Option<&'a Domain>,
    hint: Option<usize>,
}

impl<'a> PhaseSampler<'a> {
    pub fn new(field: &'a FieldSolution, tau_crit: f64) -> Self {
        Self { field, tau_crit, fallback: None, hint: None }
    }

    /// Points outside the mesh are evaluated at their nearest boundary point.
    pub fn with_boundary_fallback(mut self, domain: &'a Domain) -> Self {
        self.fallback = Some(domain);
        self
    }

    pub fn psi(&mut self, x: Vec2) -> Result<f64, AnalysisError> {
        let mesh = self.field.mesh();
        let found = mesh.locate(x, self.hint).or_else(|| {
            let d = self.fallback?;
            mesh.locate(d.project_to_boundary(x).point, self.hint)
        });
        let (e, xi) = found.ok_or(AnalysisError::OutsideMesh { x: x.x, y: x.y })?;
        self.hint = Some(e);
        let (u, v) = self.field.value(e, xi);
        super::psi(u, v, self.tau_crit)
    }
}

/// Integrate dψ / (π/2) along `path(s)`, s ∈ [0, 1]. Sampling starts at `n0`
/// uniform intervals and doubles until every wrapped increment is at most
/// `MAX_INCREMENT`. Closed paths must satisfy path(0) = path(1).
pub(crate) fn integrate_path(
    sampler: &mut PhaseSampler,
    n0: usize,
    path: impl Fn(f64) -> Vec2,
) -> Result<ContourIntegral, AnalysisError> {
    let mut n = n0.max(2);
    let mut psi = Vec::with_capacity(n + 1);
    for k in 0..=n {
        psi.push(sampler.psi(path(k as f64 / n as f64))?);
    }
    loop {
        let incs: Vec<f64> = psi.windows(2).map(|w| wrap_quarter(w[1] - w[0])).collect();
        let max_increment = incs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if max_increment <= MAX_INCREMENT {
            let value = incs.iter().sum::<f64>() / FRAC_PI_2;
            return Ok(ContourIntegral { value, samples: n, max_increment });
        }
        if 2 * n > MAX_SAMPLES {
            return Err(AnalysisError::Unresolved { samples: n });
        }
        let mut next = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            next.push(psi[k]);
            next.push(sampler.psi(path((2 * k + 1) as f64 / (2 * n) as f64))?);
        }
        next.push(psi[n]);
        psi = next;
        n *= 2;
    }
}

/// Counter-clockwise circle.
pub(crate) fn circle(center: Vec2, radius: f64) -> impl Fn(f64) -> Vec2 {
    move |s| {
        let a = 2.0 * PI * s;
        center + Vec2::new(a.cos(), a.sin()) * radius
    }
}

/// Piecewise-linear path through `pts`, parametrized by normalized arc length.
pub(crate) fn polyline(pts: Vec<Vec2>) -> impl Fn(f64) -> Vec2 {
    let mut acc = vec![0.0];
    for w in pts.windows(2) {
        acc.push(acc.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *acc.last().unwrap();
    move |s| {
        let target = s.clamp(0.0, 1.0) * total;
        let i = acc.partition_point(|&a| a <= target).clamp(1, pts.len() - 1);
        let len = acc[i] - acc[i - 1];
        let f = if len > 0.0 { (target - acc[i - 1]) / len } else { 0.0 };
        pts[i - 1] + (pts[i] - pts[i - 1]) * f
    }
}

/// Closed polylines offset inward from each boundary loop by `offset`, with
/// mitred joints at corners. Each loop keeps its orientation, so the domain
/// stays on the left.
pub fn offset_boundary_loops(domain: &Domain, offset: f64) -> Vec<Vec<Vec2>> {
    let normal = |a: f64| Vec2::new(-a.sin(), a.cos());
    (0..domain.loop_count())
        .map(|li| {
            let mut pts = Vec::new();
            for id in domain.loop_curves(li) {
                let c = domain.curve(id);
                let (t0, t1) = c.param_range();
                let m = if c.is_straight() { 16 } else { 1024 };
                for k in 0..m {
                    let t = t0 + (t1 - t0) * k as f64 / m as f64;
                    let p = c.point(t);
                    if k == 0 {
                        if let Some(corner) = domain.corner_at_curve_start(id) {
                            let (n1, n2) = (normal(corner.incoming_angle), normal(corner.outgoing_angle));
                            pts.push(p + (n1 + n2) * (offset / (1.0 + n1.dot(&n2))));
                            continue;
                        }
                    }
                    let d = c.unit_tangent(t);
                    pts.push(p + Vec2::new(-d.y, d.x) * offset);
                }
            }
            pts.push(pts[0]);
            pts
        })
        .collect()
}

/// Integral of dψ / (π/2) around the inward offset of every boundary loop.
/// By the argument principle this equals the summed index of the enclosed
/// critical points.
pub fn offset_boundary_index(
    field: &FieldSolution,
    domain: &Domain,
    offset: f64,
    tau_crit: f64,
) -> Result<ContourIntegral, AnalysisError> {
    let mut total = ContourIntegral { value: 0.0, samples: 0, max_increment: 0.0 };
    for pts in offset_boundary_loops(domain, offset) {
        let n0 = 4 * pts.len();
        let mut sampler = PhaseSampler::new(field, tau_crit);
        let r = integrate_path(&mut sampler, n0, polyline(pts))?;
        total.value += r.value;
        total.samples += r.samples;
        total.max_increment = total.max_increment.max(r.max_increment);
    }
    Ok(total)
}

/// Raw (unwrapped) ψ increments that exceed π/4 in magnitude.
pub fn raw_jumps(psi: &[f64]) -> Vec<usize> {
    psi.windows(2).enumerate().filter(|(_, w)| (w[1] - w[0]).abs() > FRAC_PI_4).map(|(i, _)| i).collect()
}
