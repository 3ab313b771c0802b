//! Direction field, initial branch directions and the AB4 stepper.

use std::f64::consts::{FRAC_PI_4, PI};

use super::graph::{GraphNode, NodeKind};
use super::{Origin, Status, Streamline, TraceError};
use crate::analysis::{self, cross_directions, wrap_quarter};
use crate::geometry::{Domain, Vec2};
use crate::sem::FieldSolution;

const FIXED_POINT_TOL: f64 = 1e-10;
const FIXED_POINT_ITERATIONS: usize = 50;
const COLLAPSE_TOL: f64 = 1e-6;

/// Cross branch at `x` with the largest dot product against `prev`; ties
/// within 1e-9 go to the lowest branch index.
pub fn adjusted_direction(field: &FieldSolution, x: Vec2, prev: Vec2) -> Result<Vec2, TraceError> {
    let tau = analysis::tau_crit(field);
    let (_, val) = field.eval_at(x, None).ok_or(TraceError::Lost { x: x.x, y: x.y })?;
    let psi = analysis::psi(val.u, val.v, tau).map_err(|_| TraceError::CriticalDirection { x: x.x, y: x.y })?;
    Ok(nearest_branch(psi, prev))
}

pub(crate) fn nearest_branch(psi: f64, prev: Vec2) -> Vec2 {
    let dirs = cross_directions(psi);
    let mut best = 0;
    for k in 1..4 {
        if dirs[k].dot(&prev) > dirs[best].dot(&prev) + 1e-9 {
            best = k;
        }
    }
    if (0..4).any(|k| k != best && (dirs[k].dot(&prev) - dirs[best].dot(&prev)).abs() <= 1e-9) {
        log::debug!("ambiguous cross branch for direction ({}, {})", prev.x, prev.y);
    }
    dirs[best]
}

fn unit(a: f64) -> Vec2 {
    Vec2::new(a.cos(), a.sin())
}

/// ψ at a physical point, evaluated with the owning element's expansion.
fn psi_at(field: &FieldSolution, x: Vec2, tau: f64) -> Option<f64> {
    let (e, xi) = field.mesh().locate(x, None)?;
    let (u, v) = field.value(e, xi);
    analysis::psi(u, v, tau).ok()
}

/// Fixed-point refinement of a branch angle: evaluate ψ at `center + c·d̂`
/// and move d̂ to the nearest cross branch.
fn refine_angle(field: &FieldSolution, center: Vec2, radius: f64, mut a: f64, tau: f64) -> Result<f64, TraceError> {
    for _ in 0..FIXED_POINT_ITERATIONS {
        let x = center + unit(a) * radius;
        let psi = psi_at(field, x, tau).ok_or(TraceError::DirectionNotConverged { x: center.x, y: center.y })?;
        let next = a + wrap_quarter(psi - a);
        if (next - a).abs() < FIXED_POINT_TOL {
            return Ok(next);
        }
        a = next;
    }
    Err(TraceError::DirectionNotConverged { x: center.x, y: center.y })
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Interior branch directions of a node of valence `valence`. Interior nodes
/// (`sweep = None`) get `valence` directions; corners with sweep (θ0, Δθ) get
/// `valence − 1` directions strictly inside the sweep. Initial guesses are
/// the multiples of Δθ/𝒱; if guesses collapse onto the same branch, the
/// fixed points are bracketed by scanning the circle.
pub fn initial_directions(
    field: &FieldSolution,
    center: Vec2,
    valence: usize,
    sweep: Option<(f64, f64)>,
    radius: f64,
) -> Result<Vec<Vec2>, TraceError> {
    let tau = analysis::tau_crit(field);
    let (theta0, dtheta, guesses): (f64, f64, Vec<usize>) = match sweep {
        None => (0.0, 2.0 * PI, (0..valence).collect()),
        Some((t0, dt)) => (t0, dt, (1..valence).collect()),
    };
    let expected = guesses.len();
    if expected == 0 {
        return Ok(Vec::new());
    }
    let inside = |a: f64| match sweep {
        None => true,
        Some(_) => {
            let rel = (a - theta0).rem_euclid(2.0 * PI);
            rel > 1e-6 && rel < dtheta - 1e-6
        }
    };
    let mut found: Vec<f64> = Vec::new();
    let push = |a: f64, found: &mut Vec<f64>| {
        if inside(a) && found.iter().all(|&b| angle_gap(a, b) > COLLAPSE_TOL) {
            found.push(a);
        }
    };
    for k in &guesses {
        let a = refine_angle(field, center, radius, theta0 + *k as f64 * dtheta / valence as f64, tau)?;
        push(a, &mut found);
    }
    if found.len() != expected {
        found.clear();
        for a in scan_fixed_points(field, center, radius, theta0, dtheta, tau) {
            if let Ok(r) = refine_angle(field, center, radius, a, tau) {
                push(r, &mut found);
            }
        }
    }
    if found.len() != expected {
        return Err(TraceError::CollapsedBranches { x: center.x, y: center.y, expected, found: found.len() });
    }
    found.sort_by(|a, b| (a - theta0).rem_euclid(2.0 * PI).total_cmp(&(b - theta0).rem_euclid(2.0 * PI)));
    Ok(found.into_iter().map(unit).collect())
}

/// Angles where the residual wrap(ψ − θ) changes sign continuously.
fn scan_fixed_points(field: &FieldSolution, center: Vec2, radius: f64, theta0: f64, dtheta: f64, tau: f64) -> Vec<f64> {
    let n = 1440;
    let samples: Vec<(f64, Option<f64>)> = (0..=n)
        .map(|k| {
            let a = theta0 + dtheta * k as f64 / n as f64;
            (a, psi_at(field, center + unit(a) * radius, tau).map(|p| wrap_quarter(p - a)))
        })
        .collect();
    samples
        .windows(2)
        .filter_map(|w| match (w[0].1, w[1].1) {
            (Some(r0), Some(r1)) if (r0 <= 0.0) != (r1 <= 0.0) && (r1 - r0).abs() < FRAC_PI_4 => {
                Some(w[0].0 + (w[1].0 - w[0].0) * r0 / (r0 - r1))
            }
            _ => None,
        })
        .collect()
}

enum Probe {
    Dir(Vec2),
    Outside,
    Critical,
}

/// Streamline integrator bound to a field and domain.
pub(crate) struct Tracer<'a> {
    pub field: &'a FieldSolution,
    pub domain: &'a Domain,
    pub h: f64,
    pub dm: f64,
    tau: f64,
}

impl<'a> Tracer<'a> {
    pub fn new(field: &'a FieldSolution, domain: &'a Domain, h: f64, dm: f64) -> Self {
        Self { field, domain, h, dm, tau: analysis::tau_crit(field) }
    }

    pub fn start(&self, id: usize, origin: Origin, x0: Vec2, d: Vec2) -> Streamline {
        Streamline { id, origin, points: vec![x0], heading: d, status: Status::Active, history: Vec::new(), hint: None }
    }

    fn probe(&self, x: Vec2, prev: Vec2, hint: &mut Option<usize>) -> Probe {
        let Some((e, xi)) = self.field.mesh().locate(x, *hint) else {
            return Probe::Outside;
        };
        *hint = Some(e);
        let (u, v) = self.field.value(e, xi);
        match analysis::psi(u, v, self.tau) {
            Ok(psi) => Probe::Dir(nearest_branch(psi, prev)),
            Err(_) => Probe::Critical,
        }
    }

    fn rk4(&self, x: Vec2, d: Vec2, h: f64, hint: &mut Option<usize>) -> Option<Vec2> {
        let k1 = d;
        let Probe::Dir(k2) = self.probe(x + k1 * (0.5 * h), k1, hint) else { return None };
        let Probe::Dir(k3) = self.probe(x + k2 * (0.5 * h), k2, hint) else { return None };
        let Probe::Dir(k4) = self.probe(x + k3 * h, k3, hint) else { return None };
        let s = k1 + k2 * 2.0 + k3 * 2.0 + k4;
        Some(x + s.normalize() * h)
    }

    /// Candidate next point: AB4 once four directions are known, RK4 before.
    /// Steps whose direction turns by more than π/4 are redone with four RK4
    /// sub-steps.
    fn next_point(&self, s: &mut Streamline) -> Option<Vec2> {
        let x = s.front();
        let h = self.h;
        let f = &s.history;
        let candidate = if f.len() >= 4 {
            let n = f.len();
            let c = f[n - 1] * 55.0 - f[n - 2] * 59.0 + f[n - 3] * 37.0 - f[n - 4] * 9.0;
            Some(x + c.normalize() * h)
        } else {
            self.rk4(x, s.heading, h, &mut s.hint)
        };
        let turned = candidate.is_some_and(|y| {
            let mut hint = s.hint;
            match self.probe(y, s.heading, &mut hint) {
                Probe::Dir(d) => d.dot(&s.heading) < FRAC_PI_4.cos(),
                _ => false,
            }
        });
        if candidate.is_some() && !turned {
            return candidate;
        }
        s.history.clear();
        let mut y = x;
        let mut d = s.heading;
        for _ in 0..4 {
            let Some(z) = self.rk4(y, d, 0.25 * h, &mut s.hint) else {
                return Some(y + d * (h - (y - x).norm()));
            };
            match self.probe(z, d, &mut s.hint) {
                Probe::Dir(nd) => d = nd,
                _ => return Some(z),
            }
            y = z;
        }
        Some(y)
    }

    /// Advance one step; clips at the boundary and stops near critical points.
    pub fn advance(&self, s: &mut Streamline, nodes: &mut Vec<GraphNode>) -> Result<(), TraceError> {
        let x = s.front();
        if s.points.len() == 1 {
            let y = x + s.heading * self.h;
            return self.accept(s, y, nodes);
        }
        let y = self.next_point(s).unwrap_or(x + s.heading * self.h);
        self.accept(s, y, nodes)
    }

    fn accept(&self, s: &mut Streamline, y: Vec2, nodes: &mut Vec<GraphNode>) -> Result<(), TraceError> {
        let mut hint = s.hint;
        match self.probe(y, s.heading, &mut hint) {
            Probe::Dir(d) => {
                s.hint = hint;
                s.points.push(y);
                s.heading = d;
                s.history.push(d);
                if s.history.len() > 4 {
                    s.history.remove(0);
                }
                Ok(())
            }
            Probe::Outside => {
                let x = s.front();
                if self.domain.contains(y) && self.domain.project_to_boundary(y).distance > 1e3 * self.domain.tau_geom() {
                    return Err(TraceError::Lost { x: y.x, y: y.y });
                }
                let node = self.clip(x, y, nodes);
                s.points.push(nodes[node].location);
                s.status = Status::Boundary { node };
                Ok(())
            }
            Probe::Critical => {
                // Next to another critical point: end at the nearest node.
                let node = nearest_node(nodes, y, s.origin.node);
                match node {
                    Some(n) if (nodes[n].location - y).norm() <= 2.0 * self.h => {
                        s.points.push(nodes[n].location);
                        s.status = Status::Absorbed { node: n };
                        Ok(())
                    }
                    _ => Err(TraceError::CriticalDirection { x: y.x, y: y.y }),
                }
            }
        }
    }

    /// Boundary node where the segment from inside point `x` to outside point
    /// `y` leaves the domain. Hits within one step of a corner snap to the
    /// corner.
    pub fn clip(&self, x: Vec2, y: Vec2, nodes: &mut Vec<GraphNode>) -> usize {
        let mesh = self.field.mesh();
        let (mut a, mut b) = (x, y);
        let tol = self.domain.tau_geom();
        for _ in 0..200 {
            if (b - a).norm() <= tol {
                break;
            }
            let m = (a + b) * 0.5;
            if mesh.locate(m, None).is_some() {
                a = m;
            } else {
                b = m;
            }
        }
        let hit = self.domain.project_to_boundary(a);
        if let Some(c) = nodes
            .iter()
            .position(|n| n.kind == NodeKind::Corner && (n.location - hit.point).norm() <= self.h)
        {
            return c;
        }
        nodes.push(GraphNode::boundary(nodes.len(), hit.point, hit.curve, hit.t));
        nodes.len() - 1
    }

    /// End streamlines whose front is within one step of an irregular or
    /// midpoint node other than their origin.
    pub fn absorb(&self, lines: &mut [Streamline], nodes: &[GraphNode]) {
        for s in lines.iter_mut().filter(|s| s.is_active()) {
            let front = s.front();
            let hit = nodes.iter().position(|n| {
                matches!(n.kind, NodeKind::Irregular | NodeKind::Midpoint)
                    && n.id != s.origin.node
                    && (n.location - front).norm() <= self.h
            });
            if let Some(n) = hit {
                s.points.push(nodes[n].location);
                s.status = Status::Absorbed { node: n };
            }
        }
    }

    /// Trace from `x` along `d` until the streamline ends on the boundary or
    /// at a node; returns the points and the end node.
    pub fn run_to_end(
        &self,
        origin: Origin,
        x: Vec2,
        d: Vec2,
        nodes: &mut Vec<GraphNode>,
    ) -> Result<(Vec<Vec2>, usize), TraceError> {
        let mut s = self.start(0, origin, x, d);
        let max_steps = (20.0 * self.domain.perimeter() / self.h).ceil() as usize;
        while s.is_active() {
            if s.points.len() > max_steps {
                return Err(TraceError::LimitCycle { streamline: 0, steps: max_steps });
            }
            self.advance(&mut s, nodes)?;
            self.absorb(std::slice::from_mut(&mut s), nodes);
        }
        match s.status {
            Status::Boundary { node } | Status::Absorbed { node } => Ok((s.points, node)),
            _ => unreachable!("inactive streamline has an end node"),
        }
    }

    /// Continue a streamline from `x` in direction `d` until it leaves the
    /// domain, meets a critical point, or `stop` returns true. Returns the
    /// points after `x`.
    pub fn extend(&self, x: Vec2, d: Vec2, max_steps: usize, mut stop: impl FnMut(&[Vec2]) -> bool) -> Vec<Vec2> {
        let mut s = self.start(usize::MAX, Origin { node: usize::MAX, branch: 0 }, x, d);
        for _ in 0..max_steps {
            let y = self.next_point(&mut s).unwrap_or(s.front() + s.heading * self.h);
            let mut hint = s.hint;
            match self.probe(y, s.heading, &mut hint) {
                Probe::Dir(nd) => {
                    s.hint = hint;
                    s.points.push(y);
                    s.heading = nd;
                    s.history.push(nd);
                    if s.history.len() > 4 {
                        s.history.remove(0);
                    }
                }
                _ => break,
            }
            if stop(&s.points) {
                break;
            }
        }
        s.points.split_off(1)
    }
}

fn nearest_node(nodes: &[GraphNode], x: Vec2, exclude: usize) -> Option<usize> {
    nodes
        .iter()
        .filter(|n| n.id != exclude && matches!(n.kind, NodeKind::Irregular | NodeKind::Midpoint | NodeKind::Corner))
        .min_by(|a, b| (a.location - x).norm().total_cmp(&(b.location - x).norm()))
        .map(|n| n.id)
}
