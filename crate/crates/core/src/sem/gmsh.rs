//! Gmsh MSH 2.2 ASCII input for linear triangle meshes.
//!
//! Line elements carry the boundary curve in their physical tag as
//! `1 + curve id`. Triangles may carry any tags.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::mesh::TriMesh;
use super::{mesher, SemError};
use crate::geometry::{Domain, Vec2};

fn bad(msg: impl Into<String>) -> SemError {
    SemError::Format(msg.into())
}

pub fn read_msh(path: &Path, domain: &Domain) -> Result<TriMesh, SemError> {
    parse_msh(&std::fs::read_to_string(path)?, domain)
}

pub fn parse_msh(text: &str, domain: &Domain) -> Result<TriMesh, SemError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let mut nodes: HashMap<usize, usize> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut lines_tagged: Vec<(usize, usize, usize)> = Vec::new();
    let mut saw_format = false;
    while let Some(line) = lines.next() {
        match line {
            "$MeshFormat" => {
                let v = lines.next().ok_or_else(|| bad("truncated $MeshFormat"))?;
                let mut p = v.split_whitespace();
                let version = p.next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(bad(format!("unsupported MSH version {version}")));
                }
                if p.next() != Some("0") {
                    return Err(bad("only ASCII MSH files are supported"));
                }
                saw_format = true;
            }
            "$Nodes" => {
                let n: usize = lines.next().and_then(|l| l.parse().ok()).ok_or_else(|| bad("bad node count"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated $Nodes"))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(bad(format!("bad node line: {l}")));
                    }
                    let id: usize = f[0].parse().map_err(|_| bad("bad node id"))?;
                    let x: f64 = f[1].parse().map_err(|_| bad("bad coordinate"))?;
                    let y: f64 = f[2].parse().map_err(|_| bad("bad coordinate"))?;
                    nodes.insert(id, vertices.len());
                    vertices.push(Vec2::new(x, y));
                }
            }
            "$Elements" => {
                let n: usize = lines.next().and_then(|l| l.parse().ok()).ok_or_else(|| bad("bad element count"))?;
                for _ in 0..n {
                    let l = lines.next().ok_or_else(|| bad("truncated $Elements"))?;
                    let f: Vec<usize> = l
                        .split_whitespace()
                        .map(|x| x.parse().map_err(|_| bad(format!("bad element line: {l}"))))
                        .collect::<Result<_, _>>()?;
                    if f.len() < 3 {
                        return Err(bad(format!("bad element line: {l}")));
                    }
                    let (kind, ntags) = (f[1], f[2]);
                    let rest = &f[3 + ntags..];
                    let node = |k: usize| -> Result<usize, SemError> {
                        let id = *rest.get(k).ok_or_else(|| bad("missing element node"))?;
                        nodes.get(&id).copied().ok_or_else(|| bad(format!("unknown node {id}")))
                    };
                    match kind {
                        1 => {
                            let phys = if ntags > 0 { f[3] } else { 0 };
                            if phys == 0 {
                                return Err(bad("boundary line element without physical tag"));
                            }
                            lines_tagged.push((node(0)?, node(1)?, phys - 1));
                        }
                        2 => triangles.push([node(0)?, node(1)?, node(2)?]),
                        15 => {}
                        other => return Err(bad(format!("unsupported element type {other}"))),
                    }
                }
            }
            _ => {}
        }
    }
    if !saw_format {
        return Err(bad("missing $MeshFormat"));
    }
    if triangles.is_empty() {
        return Err(bad("no triangles"));
    }
    let tol = 1e-8 * domain.diag();
    for &(a, b, c) in &lines_tagged {
        let curve = domain.curves().get(c).ok_or_else(|| bad(format!("physical tag {} has no curve", c + 1)))?;
        for v in [a, b] {
            if curve.project(vertices[v]).distance > tol {
                return Err(bad(format!("node of line element is not on curve {c}")));
            }
        }
    }
    mesher::from_triangles(domain, vertices, triangles)
}

/// Write a mesh with boundary line elements tagged by curve.
pub fn write_msh(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    writeln!(s, "{}", mesh.vertices().len()).unwrap();
    for (i, p) in mesh.vertices().iter().enumerate() {
        writeln!(s, "{} {:e} {:e} 0", i + 1, p.x, p.y).unwrap();
    }
    s.push_str("$EndNodes\n$Elements\n");
    let tags = mesh.tags();
    writeln!(s, "{}", tags.len() + mesh.n_elements()).unwrap();
    let mut id = 1;
    for t in tags {
        writeln!(s, "{id} 1 2 {} {} {} {}", t.curve + 1, t.curve + 1, t.va + 1, t.vb + 1).unwrap();
        id += 1;
    }
    for t in mesh.triangles() {
        writeln!(s, "{id} 2 2 100 100 {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}
