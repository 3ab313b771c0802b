//! Gmsh MSH 2.2 and SVG output for quad meshes.

use std::fmt::Write;

use super::mesh::{ElementMap, QuadMesh};
use super::QuadError;
use crate::geometry::Vec2;
use crate::sem::TriMesh;
use crate::trace::{NodeKind, SeparatrixGraph};

/// Polynomial orders of a triangle mesh, drawn as a heat fill.
#[derive(Clone, Debug)]
pub struct OrderMap {
    pub triangles: Vec<[Vec2; 3]>,
    pub orders: Vec<usize>,
}

impl OrderMap {
    pub fn new(mesh: &TriMesh, orders: &[usize]) -> Self {
        let triangles = (0..mesh.n_elements()).map(|e| mesh.element_vertices(e)).collect();
        Self { triangles, orders: orders.to_vec() }
    }
}

/// Grid indices in Gmsh order: corners, then side nodes counterclockwise,
/// then the interior recursively.
fn gmsh_order(q: usize) -> Vec<(usize, usize)> {
    fn rec(lo: usize, hi: usize, out: &mut Vec<(usize, usize)>) {
        if lo == hi {
            out.push((lo, lo));
            return;
        }
        out.extend([(lo, lo), (hi, lo), (hi, hi), (lo, hi)]);
        out.extend((lo + 1..hi).map(|i| (i, lo)));
        out.extend((lo + 1..hi).map(|j| (hi, j)));
        out.extend((lo + 1..hi).rev().map(|i| (i, hi)));
        out.extend((lo + 1..hi).rev().map(|j| (lo, j)));
        if hi - lo >= 2 {
            rec(lo + 1, hi - 1, out);
        }
    }
    let mut out = Vec::with_capacity((q + 1) * (q + 1));
    rec(0, q, &mut out);
    out
}

/// ASCII MSH 2.2 with quads of order ≤ 4 (types 3, 10, 36, 37) and
/// boundary lines tagged by curve id + 1.
pub fn to_gmsh(mesh: &QuadMesh) -> Result<String, QuadError> {
    let q = mesh.order;
    let (quad_type, line_type) = match q {
        1 => (3, 1),
        2 => (10, 8),
        3 => (36, 26),
        4 => (37, 27),
        _ => return Err(QuadError::BadOrder { order: q, max: 4 }),
    };
    let order = gmsh_order(q);
    let mut s = String::new();
    let _ = writeln!(s, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n{}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, p.x, p.y);
    }
    let _ = writeln!(s, "$EndNodes\n$Elements\n{}", mesh.boundary.len() + mesh.n_elements());
    let mut id = 1;
    for b in &mesh.boundary {
        let side = mesh.side_nodes(b.element, b.side);
        let tag = b.curves.first().map_or(0, |c| c + 1);
        let mut nodes = vec![side[0], side[q]];
        nodes.extend(&side[1..q]);
        let list: Vec<String> = nodes.iter().map(|n| (n + 1).to_string()).collect();
        let _ = writeln!(s, "{id} {line_type} 2 {tag} {tag} {}", list.join(" "));
        id += 1;
    }
    for el in &mesh.elements {
        let list: Vec<String> = order.iter().map(|&(i, j)| (el.nodes[j * (q + 1) + i] + 1).to_string()).collect();
        let _ = writeln!(s, "{id} {quad_type} 2 1 {} {}", el.block + 1, list.join(" "));
        id += 1;
    }
    s.push_str("$EndElements\n");
    Ok(s)
}

const WIDTH: f64 = 800.0;
const SIDE_SAMPLES: usize = 12;

fn heat(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t.min(0.5) * 2.0) as u8;
    let b = (255.0 * (1.0 - t).min(0.5) * 2.0) as u8;
    format!("rgb({r},{},{b})", 200 - (100.0 * (t - 0.5).abs()) as u8)
}

/// Curved element outlines, optionally over an order heat fill and with
/// the separatrix graph's nodes colored by valence.
pub fn mesh_svg(mesh: &QuadMesh, graph: Option<&SeparatrixGraph>, orders: Option<&OrderMap>) -> String {
    let basis = mesh.basis();
    let outlines: Vec<Vec<Vec2>> = (0..mesh.n_elements())
        .map(|e| {
            let map = ElementMap::new(&basis, mesh.element_points(e));
            let mut pts = Vec::with_capacity(4 * SIDE_SAMPLES);
            for side in 0..4 {
                for k in 0..SIDE_SAMPLES {
                    let t = k as f64 / SIDE_SAMPLES as f64;
                    let (xi, eta) = match side {
                        0 => (t, 0.0),
                        1 => (1.0, t),
                        2 => (1.0 - t, 1.0),
                        _ => (0.0, 1.0 - t),
                    };
                    pts.push(map.point(xi, eta));
                }
            }
            pts
        })
        .collect();
    let (lo, hi) = outlines
        .iter()
        .flatten()
        .fold((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let span = (hi - lo).max().max(1e-12);
    let pad = 0.03 * span;
    let scale = WIDTH / (span + 2.0 * pad);
    let map = |p: &Vec2| format!("{:.2},{:.2}", (p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale);
    let height = ((hi.y - lo.y).max(0.0) + 2.0 * pad) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    if let Some(om) = orders {
        let pmin = om.orders.iter().copied().min().unwrap_or(0);
        let pmax = om.orders.iter().copied().max().unwrap_or(0);
        for (tri, &p) in om.triangles.iter().zip(&om.orders) {
            let t = if pmax > pmin { (p - pmin) as f64 / (pmax - pmin) as f64 } else { 0.5 };
            let pts: Vec<String> = tri.iter().map(map).collect();
            let _ = writeln!(s, r#"<polygon fill="{}" stroke="none" points="{}"/>"#, heat(t), pts.join(" "));
        }
    }
    for outline in &outlines {
        let pts: Vec<String> = outline.iter().map(map).collect();
        let _ = writeln!(s, r#"<polygon fill="none" stroke="black" stroke-width="0.8" points="{}"/>"#, pts.join(" "));
    }
    if let Some(g) = graph {
        for n in g.nodes.iter().filter(|n| n.kind != NodeKind::Boundary && n.kind != NodeKind::Junction) {
            let color = match n.valence {
                0 => "#d68910",
                1 => "black",
                2 => "#7f8c8d",
                3 => "#2471a3",
                4 => "#27ae60",
                _ => "#c0392b",
            };
            let (x, y) = ((n.location.x - lo.x + pad) * scale, (hi.y - n.location.y + pad) * scale);
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gmsh_order_matches_reference_layouts() {
        assert_eq!(gmsh_order(1), vec![(0, 0), (1, 0), (1, 1), (0, 1)]);
        assert_eq!(
            gmsh_order(2),
            vec![(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)]
        );
        let o3 = gmsh_order(3);
        assert_eq!(&o3[4..12], &[(1, 0), (2, 0), (3, 1), (3, 2), (2, 3), (1, 3), (0, 2), (0, 1)]);
        assert_eq!(&o3[12..], &[(1, 1), (2, 1), (2, 2), (1, 2)]);
        for q in 1..=4 {
            let mut o = gmsh_order(q);
            o.sort_unstable();
            o.dedup();
            assert_eq!(o.len(), (q + 1) * (q + 1));
        }
    }
}
