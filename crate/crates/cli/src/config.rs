//! Versioned JSON pipeline configuration.
//!
//! Relative paths resolve against the directory holding the config file.
//! `QUADFIELD_OUTPUT_DIR`, when set, replaces `paths.output_dir`.

use std::path::{Path, PathBuf};

use quadfield::adapt::AdaptConfig;
use quadfield::geometry::Domain;
use quadfield::quad::{SplitConfig, ValidationThresholds};
use quadfield::solver::{LinearSolver, Scheme};
use quadfield::trace::TraceConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;
pub const OUTPUT_DIR_ENV: &str = "QUADFIELD_OUTPUT_DIR";
/// Largest default geometric order of the quad mesh.
pub const MAX_DEFAULT_QUAD_ORDER: usize = 6;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub geometry: PathBuf,
    /// Triangle mesh as `.json` or Gmsh `.msh`; generated when absent.
    #[serde(default)]
    pub tri_mesh: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredMesh {
    /// `square`, `half_disc` or `annular_sector`.
    pub kind: String,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSettings {
    /// Target triangle size as a fraction of the bounding-box diagonal.
    pub size: f64,
    pub structured: Option<StructuredMesh>,
}

impl Default for MeshSettings {
    fn default() -> Self {
        Self { size: 0.1, structured: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    /// CG when every corner is a multiple of π/2, DG otherwise.
    #[default]
    Auto,
    Cg,
    Dg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSettings {
    pub scheme: SchemeChoice,
    /// Interior penalty scaling σ₀ for DG.
    pub penalty: f64,
    pub linear_solver: LinearSolver,
    pub tolerance: f64,
}

impl Default for DiscretizationSettings {
    fn default() -> Self {
        Self { scheme: SchemeChoice::Auto, penalty: 4.0, linear_solver: LinearSolver::Direct, tolerance: 1e-10 }
    }
}

impl DiscretizationSettings {
    pub fn scheme_for(&self, domain: &Domain) -> Scheme {
        match self.scheme {
            SchemeChoice::Cg => Scheme::Cg,
            SchemeChoice::Dg => Scheme::Dg,
            SchemeChoice::Auto if domain.has_continuous_tangent_data() => Scheme::Cg,
            SchemeChoice::Auto => Scheme::Dg,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadSettings {
    /// Geometric order; the largest solver order, capped at 6, when absent.
    pub order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitFlags {
    /// SVG renderings of the graph and both quad meshes.
    pub svg: bool,
    /// VTK dump of the solved field.
    pub vtk: bool,
    /// Gmsh MSH 2.2 quad meshes (orders up to 4 only).
    pub gmsh: bool,
    /// The refined mesh as JSON; staged artifacts are always written.
    pub json: bool,
}

impl Default for EmitFlags {
    fn default() -> Self {
        Self { svg: true, vtk: false, gmsh: true, json: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub paths: Paths,
    #[serde(default)]
    pub mesh: MeshSettings,
    #[serde(default)]
    pub discretization: DiscretizationSettings,
    #[serde(default)]
    pub adaptation: AdaptConfig,
    #[serde(default)]
    pub tracing: TraceConfig,
    #[serde(default)]
    pub quad: QuadSettings,
    #[serde(default)]
    pub refinement: SplitConfig,
    #[serde(default)]
    pub validation: ValidationThresholds,
    #[serde(default)]
    pub emit: EmitFlags,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl PipelineConfig {
    /// Read, resolve paths, apply the output directory override and check
    /// every setting that does not need the geometry.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(&base);
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.paths.output_dir = PathBuf::from(dir);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| config_error(format!("config is not JSON: {e}")))?;
        match raw.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == CONFIG_VERSION as u64 => {}
            Some(v) => return Err(config_error(format!("unsupported config version {v}; expected {CONFIG_VERSION}"))),
            None => return Err(config_error("config has no integer \"version\"")),
        }
        serde_json::from_value(raw).map_err(|e| config_error(e.to_string()))
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        self.paths.geometry = join(&self.paths.geometry);
        self.paths.tri_mesh = self.paths.tri_mesh.as_ref().map(join);
        self.paths.output_dir = join(&self.paths.output_dir);
    }

    fn check(&self) -> Result<(), CliError> {
        if !self.paths.geometry.is_file() {
            return Err(config_error(format!("geometry file {} does not exist", self.paths.geometry.display())));
        }
        if let Some(m) = &self.paths.tri_mesh {
            if !m.is_file() {
                return Err(config_error(format!("triangle mesh {} does not exist", m.display())));
            }
        }
        if !(self.mesh.size > 0.0 && self.mesh.size.is_finite()) {
            return Err(config_error(format!("mesh.size must be positive, got {}", self.mesh.size)));
        }
        if let Some(s) = &self.mesh.structured {
            if !["square", "half_disc", "annular_sector"].contains(&s.kind.as_str()) || s.n == 0 {
                return Err(config_error(format!("unknown structured mesh {} with n = {}", s.kind, s.n)));
            }
        }
        let d = &self.discretization;
        if !(d.penalty > 0.0 && d.tolerance > 0.0) {
            return Err(config_error("discretization penalty and tolerance must be positive"));
        }
        self.adaptation.validate().map_err(|e| config_error(e.to_string()))?;
        if let Some(q) = self.quad.order {
            if q == 0 || q > quadfield::quad::MAX_ORDER {
                return Err(config_error(format!("quad.order must be in 1..={}", quadfield::quad::MAX_ORDER)));
            }
        }
        let r = &self.refinement;
        if r.default_count == 0 || r.pins.iter().any(|p| p.count == Some(0) || p.direction > 1) {
            return Err(config_error("refinement counts must be at least 1 and directions 0 or 1"));
        }
        if r.pins.iter().filter_map(|p| p.grading).any(|g| !(g > 0.0 && g.is_finite())) {
            return Err(config_error("grading ratios must be positive"));
        }
        std::fs::create_dir_all(&self.paths.output_dir).map_err(|e| {
            config_error(format!("output directory {} is not writable: {e}", self.paths.output_dir.display()))
        })?;
        let probe = self.paths.output_dir.join(".write_probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| config_error(format!("output directory {} is not writable: {e}", self.paths.output_dir.display())))?;
        Ok(())
    }

    /// Checks that need the geometry.
    pub fn check_with_domain(&self, domain: &Domain) -> Result<(), CliError> {
        self.tracing.validate(domain).map_err(|e| config_error(e.to_string()))
    }
}
