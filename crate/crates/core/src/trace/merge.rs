//! Merging of opposing streamline fronts.

use std::f64::consts::PI;

use super::graph::{GraphNode, SeparatrixPath};
use super::integrate::Tracer;
use super::{opposing, Streamline, TraceError};
use crate::geometry::Vec2;

/// w(s) = (1 + cos πs) / 2.
pub fn blend_weight(s: f64) -> f64 {
    0.5 * (1.0 + (PI * s).cos())
}

fn length(p: &[Vec2]) -> f64 {
    p.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at normalized arc length `s` of a polyline.
pub(crate) fn at_fraction(p: &[Vec2], s: f64) -> Vec2 {
    let total = length(p);
    if p.len() == 1 || total == 0.0 {
        return p[0];
    }
    let mut target = s.clamp(0.0, 1.0) * total;
    for w in p.windows(2) {
        let l = (w[1] - w[0]).norm();
        if target <= l {
            return if l > 0.0 { w[0] + (w[1] - w[0]) * (target / l) } else { w[0] };
        }
        target -= l;
    }
    *p.last().unwrap()
}

/// Merged curve m(s) = w(s)·a(s) + (1 − w(s))·b(1 − s), where `a` runs from
/// the first origin toward the second and `b` the other way; `n` intervals.
/// The result starts at a(0) and ends at b(0) exactly.
pub fn blend(a: &[Vec2], b: &[Vec2], n: usize) -> Vec<Vec2> {
    let n = n.max(1);
    let mut out: Vec<Vec2> = (0..=n)
        .map(|k| {
            let s = k as f64 / n as f64;
            let w = blend_weight(s);
            at_fraction(a, s) * w + at_fraction(b, 1.0 - s) * (1.0 - w)
        })
        .collect();
    out[0] = a[0];
    out[n] = b[0];
    out
}

/// Closest approach of two fronts moving linearly over the last round, and
/// whether they were approaching at its start.
fn closest_approach(a: &Streamline, b: &Streamline) -> (f64, bool) {
    let prev = |s: &Streamline| s.points[s.points.len() - 2];
    let g0 = prev(b) - prev(a);
    let dg = (b.front() - prev(b)) - (a.front() - prev(a));
    let s = if dg.norm_squared() > 0.0 { (-g0.dot(&dg) / dg.norm_squared()).clamp(0.0, 1.0) } else { 1.0 };
    ((g0 + dg * s).norm(), g0.dot(&dg) < 0.0)
}

/// Eligible pairs (closest front distance during the round ≤ d_m, opposing,
/// approaching, distinct origins), matched greedily by increasing distance
/// with ties broken by id.
pub(crate) fn merge_scan(lines: &[Streamline], dm: f64) -> Vec<(usize, usize)> {
    let active: Vec<&Streamline> = lines.iter().filter(|s| s.is_active() && s.points.len() > 1).collect();
    let mut cand = Vec::new();
    for (i, a) in active.iter().enumerate() {
        for b in &active[i + 1..] {
            if a.origin.node == b.origin.node || !opposing(a.heading, b.heading) {
                continue;
            }
            let (d, approaching) = closest_approach(a, b);
            if d <= dm && approaching {
                cand.push((d, a.id, b.id));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (_, a, b) in cand {
        if used.contains(&a) || used.contains(&b) {
            continue;
        }
        used.insert(a);
        used.insert(b);
        out.push((a, b));
    }
    out
}

/// Extend `s` through the field toward `target`, stopping at the closest
/// approach. Falls back to `s` followed by the reversed partner when the
/// extension does not come near the target.
fn extended(tracer: &Tracer, s: &Streamline, partner: &Streamline, target: Vec2) -> Vec<Vec2> {
    let near = 2.0 * tracer.dm + 2.0 * tracer.h;
    let steps = (partner.length() / tracer.h).ceil() as usize + 10;
    let mut best = f64::INFINITY;
    let ext = tracer.extend(s.front(), s.heading, steps, |pts| {
        let d = (pts.last().unwrap() - target).norm();
        if d < best {
            best = d;
            d <= tracer.h
        } else {
            best <= near
        }
    });
    let cut = ext
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
        .map(|(i, p)| (i, (p - target).norm()));
    let mut pts = s.points.clone();
    match cut {
        Some((i, d)) if d <= near => pts.extend_from_slice(&ext[..=i]),
        _ => pts.extend(partner.points.iter().rev().skip(1)),
    }
    if (pts.last().unwrap() - target).norm() > 0.0 {
        pts.push(target);
    }
    pts
}

/// Merge two streamlines into one separatrix between their origins.
pub(crate) fn merge_pair(
    tracer: &Tracer,
    a: &Streamline,
    b: &Streamline,
    nodes: &[GraphNode],
) -> Result<SeparatrixPath, TraceError> {
    let oa = nodes[a.origin.node].location;
    let ob = nodes[b.origin.node].location;
    let pa = extended(tracer, a, b, ob);
    let pb = extended(tracer, b, a, oa);
    let n = ((0.5 * (length(&pa) + length(&pb))) / tracer.h).ceil() as usize;
    Ok(SeparatrixPath {
        start: a.origin.node,
        end: b.origin.node,
        origins: vec![a.origin, b.origin],
        points: blend(&pa, &pb, n),
        merged: true,
    })
}
