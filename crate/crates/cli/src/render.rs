//! `render` and `validate` commands on standalone artifacts.

use std::fmt::Write as _;
use std::path::Path;

use quadfield::geometry::io::GeometryFile;
use quadfield::geometry::{Domain, Vec2};
use quadfield::quad::{mesh_svg, validate, QuadMesh, ValidationReport, ValidationThresholds};
use quadfield::trace::{graph_svg, SeparatrixGraph};
use serde_json::Value;

use crate::CliError;

fn read_json(path: &Path) -> Result<(String, Value), CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{} is not JSON: {e}", path.display())))?;
    Ok((text, value))
}

fn boundary_svg(domain: &Domain) -> String {
    let loops: Vec<&[Vec2]> = (0..domain.loop_count()).map(|l| domain.loop_polyline(l)).collect();
    let (lo, hi) = domain.bbox();
    let span = (hi - lo).max().max(1e-12);
    let pad = 0.03 * span;
    let width = 800.0;
    let scale = width / (span + 2.0 * pad);
    let height = ((hi.y - lo.y) + 2.0 * pad) * scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    for pts in loops {
        let p: Vec<String> = pts
            .iter()
            .map(|p| format!("{:.2},{:.2}", (p.x - lo.x + pad) * scale, (hi.y - p.y + pad) * scale))
            .collect();
        let _ = writeln!(s, r#"<polygon fill="none" stroke="black" stroke-width="2" points="{}"/>"#, p.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

/// SVG of a quad mesh, separatrix graph or geometry file, chosen by content.
pub fn render(input: &Path, out: &Path) -> Result<(), CliError> {
    let (text, value) = read_json(input)?;
    let bad = |e: &dyn std::fmt::Display| CliError::Input(format!("{}: {e}", input.display()));
    let svg = if value.get("elements").is_some() && value.get("order").is_some() {
        mesh_svg(&QuadMesh::from_json(&text).map_err(|e| bad(&e))?, None, None)
    } else if value.get("edges").is_some() && value.get("paths").is_some() {
        graph_svg(&SeparatrixGraph::from_json(&text).map_err(|e| bad(&e))?)
    } else if value.get("loops").is_some() {
        let g: GeometryFile = serde_json::from_value(value).map_err(|e| bad(&e))?;
        boundary_svg(&g.to_domain().map_err(|e| bad(&e))?)
    } else {
        return Err(CliError::Input(format!(
            "{} is not a quad mesh, separatrix graph or geometry file",
            input.display()
        )));
    };
    std::fs::write(out, svg).map_err(|source| CliError::Write { path: out.to_path_buf(), source })
}

/// Validation report of a mesh file; `Invalid` when it fails.
pub fn validate_file(path: &Path, thresholds: &ValidationThresholds) -> Result<ValidationReport, CliError> {
    let (text, _) = read_json(path)?;
    let mesh = QuadMesh::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(validate(&mesh, thresholds))
}
