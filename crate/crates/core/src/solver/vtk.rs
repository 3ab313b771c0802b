//! Legacy ASCII VTK export of a sampled field.

use std::fmt::Write as _;

use crate::sem::FieldSolution;

/// Unstructured grid with each element split into `m * m` sub-triangles and
/// point data u, v and ψ = atan2(v, u) / 4.
pub fn to_vtk(field: &FieldSolution, m: usize) -> String {
    let m = m.max(1);
    let mesh = field.mesh();
    let per = (m + 1) * (m + 2) / 2;
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    for e in 0..mesh.n_elements() {
        let base = points.len();
        let index = |i: usize, j: usize| base + j * (m + 1) - j * j.saturating_sub(1) / 2 + i;
        for j in 0..=m {
            for i in 0..=m - j {
                let xi = [-1.0 + 2.0 * i as f64 / m as f64, -1.0 + 2.0 * j as f64 / m as f64];
                let (x, _) = mesh.map_to_physical(e, xi).expect("valid element");
                points.push(x);
                values.push(field.value(e, xi));
            }
        }
        for j in 0..m {
            for i in 0..m - j {
                cells.push([index(i, j), index(i + 1, j), index(i, j + 1)]);
                if i + j + 1 < m {
                    cells.push([index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)]);
                }
            }
        }
        debug_assert_eq!(points.len() - base, per);
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nquadfield guiding field\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", points.len()).unwrap();
    for p in &points {
        writeln!(s, "{:e} {:e} 0", p.x, p.y).unwrap();
    }
    writeln!(s, "CELLS {} {}", cells.len(), 4 * cells.len()).unwrap();
    for c in &cells {
        writeln!(s, "3 {} {} {}", c[0], c[1], c[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {}", cells.len()).unwrap();
    for _ in &cells {
        s.push_str("5\n");
    }
    writeln!(s, "POINT_DATA {}", points.len()).unwrap();
    for (name, f) in [
        ("u", &(|u: f64, _: f64| u) as &dyn Fn(f64, f64) -> f64),
        ("v", &|_, v| v),
        ("psi", &|u: f64, v: f64| if u == 0.0 && v == 0.0 { 0.0 } else { v.atan2(u) / 4.0 }),
    ] {
        writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
        for &(u, v) in &values {
            writeln!(s, "{:e}", f(u, v)).unwrap();
        }
    }
    s
}
