//! Mesh quality and consistency report.

use serde::{Deserialize, Serialize};

use super::chords::side_pairs;
use super::mesh::QuadMesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationThresholds {
    /// Elements must have a scaled Jacobian strictly above this.
    pub min_scaled_jacobian: f64,
    /// Largest allowed distance of a boundary node from ∂Ω; the domain's
    /// geometric tolerance when `None`.
    pub max_boundary_deviation: Option<f64>,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        Self { min_scaled_jacobian: 0.0, max_boundary_deviation: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub element_count: usize,
    pub min_scaled_jacobian: f64,
    pub mean_scaled_jacobian: f64,
    /// Elements with a non-positive Jacobian determinant somewhere.
    pub inverted: Vec<usize>,
    /// (element, side) pairs with no matching neighbor off the boundary.
    pub conformity_violations: Vec<(usize, usize)>,
    pub boundary_deviation: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub fn validate(mesh: &QuadMesh, thresholds: &ValidationThresholds) -> ValidationReport {
    let n = mesh.n_elements();
    let mut failures = Vec::new();
    let mut inverted = Vec::new();
    let mut scaled = Vec::with_capacity(n);
    for e in 0..n {
        let dets = mesh.jacobian_dets(e);
        if dets.iter().any(|&d| d <= 0.0 || !d.is_finite()) {
            inverted.push(e);
        }
        scaled.push(mesh.scaled_jacobian(e));
    }
    let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = if n == 0 { f64::NAN } else { scaled.iter().sum::<f64>() / n as f64 };

    let domain = match mesh.domain().transpose() {
        Ok(d) => d,
        Err(err) => {
            failures.push(format!("geometry is unreadable: {err}"));
            None
        }
    };
    let mut tagged = vec![[false; 4]; n];
    for b in &mesh.boundary {
        if b.element < n && b.side < 4 {
            tagged[b.element][b.side] = true;
        } else {
            failures.push(format!("boundary tag refers to element {} side {}", b.element, b.side));
        }
    }
    let (_, lone) = side_pairs(mesh);
    let mut conformity_violations: Vec<(usize, usize)> = lone.into_iter().filter(|&(e, s)| !tagged[e][s]).collect();
    conformity_violations.sort_unstable();

    let boundary_deviation = domain.as_ref().map(|d| {
        mesh.boundary
            .iter()
            .filter(|b| b.element < n && b.side < 4)
            .flat_map(|b| mesh.side_nodes(b.element, b.side))
            .map(|i| d.project_to_boundary(mesh.nodes[i]).distance)
            .fold(0.0, f64::max)
    });

    if n == 0 {
        failures.push("mesh has no elements".into());
    }
    if !inverted.is_empty() {
        failures.push(format!("inverted elements: {inverted:?}"));
    }
    if !(min > thresholds.min_scaled_jacobian) && n > 0 {
        failures.push(format!(
            "min scaled Jacobian {min:.4} is not above {}",
            thresholds.min_scaled_jacobian
        ));
    }
    if !conformity_violations.is_empty() {
        failures.push(format!("non-conforming sides (element, side): {conformity_violations:?}"));
    }
    if let (Some(dev), Some(d)) = (boundary_deviation, &domain) {
        let limit = thresholds.max_boundary_deviation.unwrap_or(d.tau_geom());
        if dev > limit {
            failures.push(format!("boundary deviation {dev:e} exceeds {limit:e}"));
        }
    }
    ValidationReport {
        element_count: n,
        min_scaled_jacobian: min,
        mean_scaled_jacobian: mean,
        inverted,
        conformity_violations,
        boundary_deviation,
        passed: failures.is_empty(),
        failures,
    }
}
