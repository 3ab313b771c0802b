//! SVG rendering of a separatrix graph.

use std::fmt::Write;

use super::graph::{NodeKind, SeparatrixGraph};
use crate::geometry::Vec2;

const WIDTH: f64 = 800.0;

/// Boundary in black, separatrices in red, nodes colored by kind.
pub fn graph_svg(graph: &SeparatrixGraph) -> String {
    let pts = graph.edges.iter().flat_map(|e| e.points.iter()).chain(graph.nodes.iter().map(|n| &n.location));
    let (lo, hi) = pts.fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    });
    let span = (hi - lo).max().max(1e-12);
    let pad = 0.03 * span;
    let scale = WIDTH / (span + 2.0 * pad);
    let map = |p: &Vec2| ((p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale);
    let height = ((hi.y - lo.y) + 2.0 * pad) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    for e in &graph.edges {
        let (color, width) = if e.is_boundary() { ("black", 2.0) } else { ("#c0392b", 1.5) };
        let path: Vec<String> = e
            .points
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#, path.join(" "));
    }
    for n in &graph.nodes {
        let (x, y) = map(&n.location);
        let color = match n.kind {
            NodeKind::Irregular => "#2471a3",
            NodeKind::Corner => "black",
            NodeKind::Boundary => "#7d3c98",
            NodeKind::Midpoint => "#d68910",
            NodeKind::Junction => "#7f8c8d",
        };
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
    }
    s.push_str("</svg>\n");
    s
}
