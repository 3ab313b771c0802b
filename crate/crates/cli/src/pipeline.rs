//! Stage execution, artifacts and the run summary.
//!
//! Every stage writes its artifacts to the output directory and a later
//! stage reads them back when it runs on its own, so a single stage can be
//! rerun with new settings without repeating the upstream work.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use quadfield::adapt::adapt_loop;
use quadfield::analysis::{analyze, AnalysisReport};
use quadfield::geometry::{io::read_domain, Domain};
use quadfield::quad::{
    coarse_mesh, euler_check, extract_blocks, mesh_svg, refine, spline_separatrices, to_gmsh, validate, EulerCheck,
    OrderMap, QuadMesh,
};
use quadfield::sem::{gmsh, mesher, FieldSolution, TriMesh};
use quadfield::solver::{vtk::to_vtk, DiscretizationConfig, Scheme};
use quadfield::trace::{graph_svg, trace, NodeKind, SeparatrixGraph};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, CONFIG_VERSION, MAX_DEFAULT_QUAD_ORDER};
use crate::{CliError, Stage};

pub const TRI_MESH: &str = "trimesh.json";
pub const FIELD: &str = "field.dump";
pub const ORDERS: &str = "orders.json";
pub const ADAPT_LOG: &str = "adapt_log.txt";
pub const FIELD_VTK: &str = "field.vtk";
pub const ANALYSIS: &str = "analysis.json";
pub const GRAPH: &str = "graph.json";
pub const GRAPH_SVG: &str = "graph.svg";
pub const BLOCKS: &str = "blocks.json";
pub const COARSE: &str = "coarse_mesh.json";
pub const COARSE_SVG: &str = "coarse_mesh.svg";
pub const COARSE_MSH: &str = "coarse_mesh.msh";
pub const CHORDS: &str = "chords.json";
pub const MESH: &str = "mesh.json";
pub const MESH_SVG: &str = "mesh.svg";
pub const MESH_MSH: &str = "mesh.msh";
pub const VALIDATION: &str = "validation.json";
pub const SUMMARY: &str = "summary.json";
pub const TIMINGS: &str = "timings.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub scheme: Option<Scheme>,
    pub triangles: usize,
    pub min_order: usize,
    pub max_order: usize,
    pub mean_order: f64,
    pub adapt_iterations: usize,
    pub adapt_converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub critical_points: usize,
    /// Valence of each critical point, in report order.
    pub valences: Vec<i64>,
    pub indices: Vec<i64>,
    /// Sum of the interior indices.
    pub index_sum: i64,
    pub corner_valences: Vec<i64>,
    pub degenerate: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub step: f64,
    pub merge_distance: f64,
    pub aggressive: bool,
    pub rounds: usize,
    pub streamlines: usize,
    pub unterminated: usize,
    pub limit_cycles: usize,
    pub nodes: usize,
    pub separatrix_edges: usize,
    pub boundary_edges: usize,
    pub merged_paths: usize,
    pub midpoint_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub blocks: usize,
    pub order: usize,
    pub euler_value: i64,
    pub euler_expected: i64,
    pub min_scaled_jacobian: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub elements: usize,
    pub predicted_elements: usize,
    pub chords: usize,
    pub min_scaled_jacobian: f64,
    pub mean_scaled_jacobian: f64,
    pub conformity_violations: usize,
    pub boundary_deviation: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: Stage,
    pub message: String,
}

/// Machine-readable outcome of a run. Timings live in `timings.json` so
/// this file is byte-identical across repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub version: u32,
    pub geometry: String,
    pub ok: bool,
    pub failure: Option<Failure>,
    pub solve: Option<SolveSummary>,
    pub analysis: Option<AnalysisSummary>,
    pub trace: Option<TraceSummary>,
    pub mesh: Option<MeshSummary>,
    pub refine: Option<RefineSummary>,
}

impl Summary {
    fn new(geometry: &Path) -> Self {
        Self {
            version: CONFIG_VERSION,
            geometry: geometry.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            ok: true,
            failure: None,
            solve: None,
            analysis: None,
            trace: None,
            mesh: None,
            refine: None,
        }
    }

    /// Drop the sections of `stage` and everything downstream of it.
    fn clear_from(&mut self, stage: Stage) {
        for s in Stage::ALL.into_iter().filter(|&s| s >= stage) {
            match s {
                Stage::Solve => self.solve = None,
                Stage::Analyze => self.analysis = None,
                Stage::Trace => self.trace = None,
                Stage::Mesh => self.mesh = None,
                Stage::Refine => self.refine = None,
            }
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: BTreeMap<Stage, f64>,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.stages.values().sum()
    }

    /// Fraction of the total spent in `stage`.
    pub fn share(&self, stage: Stage) -> f64 {
        self.stages.get(&stage).copied().unwrap_or(0.0) / self.total().max(f64::MIN_POSITIVE)
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    domain: Domain,
    tri: Option<Arc<TriMesh>>,
    field: Option<FieldSolution>,
    report: Option<AnalysisReport>,
    graph: Option<SeparatrixGraph>,
    coarse: Option<QuadMesh>,
}

fn stage_error(stage: Stage) -> impl Fn(&dyn std::fmt::Display) -> CliError {
    move |e| CliError::Stage { stage, message: e.to_string() }
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self, CliError> {
        let domain = read_domain(&config.paths.geometry)
            .map_err(|e| CliError::Config(format!("geometry {}: {e}", config.paths.geometry.display())))?;
        config.check_with_domain(&domain)?;
        Ok(Self { config, domain, tri: None, field: None, report: None, graph: None, coarse: None })
    }

    pub fn load(config_path: &Path) -> Result<Self, CliError> {
        Self::new(PipelineConfig::load(config_path)?)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.paths.output_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Write { path, source })
    }

    fn read(&self, stage: Stage, name: &str) -> Result<String, CliError> {
        let path = self.path(name);
        if !path.is_file() {
            return Err(CliError::MissingArtifact { stage, path });
        }
        std::fs::read_to_string(&path).map_err(|e| stage_error(stage)(&e))
    }

    /// All stages in order. The summary and timings are written even when a
    /// stage fails, and artifacts of completed stages are kept.
    pub fn run(&mut self) -> Result<(Summary, Timings), CliError> {
        let mut summary = Summary::new(&self.config.paths.geometry);
        let mut timings = Timings::default();
        let mut result = Ok(());
        for stage in Stage::ALL {
            result = self.execute(stage, &mut summary, &mut timings);
            if result.is_err() {
                break;
            }
        }
        self.finish(summary, timings, result)
    }

    /// One stage from the artifacts of the previous ones. Summary sections
    /// of this stage and later stages are replaced or dropped.
    pub fn run_stage(&mut self, stage: Stage) -> Result<(Summary, Timings), CliError> {
        let mut summary = self
            .read(stage, SUMMARY)
            .ok()
            .and_then(|t| serde_json::from_str::<Summary>(&t).ok())
            .unwrap_or_else(|| Summary::new(&self.config.paths.geometry));
        let mut timings =
            self.read(stage, TIMINGS).ok().and_then(|t| serde_json::from_str::<Timings>(&t).ok()).unwrap_or_default();
        summary.clear_from(stage);
        summary.ok = true;
        summary.failure = None;
        timings.stages.retain(|&s, _| s < stage);
        let result = self.execute(stage, &mut summary, &mut timings);
        self.finish(summary, timings, result)
    }

    fn finish(
        &self,
        mut summary: Summary,
        timings: Timings,
        result: Result<(), CliError>,
    ) -> Result<(Summary, Timings), CliError> {
        if let Err(e) = &result {
            let stage = match e {
                CliError::Stage { stage, .. } | CliError::MissingArtifact { stage, .. } => Some(*stage),
                _ => None,
            };
            summary.ok = false;
            summary.failure = stage.map(|stage| Failure { stage, message: e.to_string() });
        }
        self.write(SUMMARY, &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
        self.write(TIMINGS, &(serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n"))?;
        result.map(|_| (summary, timings))
    }

    fn execute(&mut self, stage: Stage, summary: &mut Summary, timings: &mut Timings) -> Result<(), CliError> {
        log::info!("stage={stage} event=start");
        let start = Instant::now();
        let result = match stage {
            Stage::Solve => self.solve(summary),
            Stage::Analyze => self.analyze(summary),
            Stage::Trace => self.trace(summary),
            Stage::Mesh => self.mesh(summary),
            Stage::Refine => self.refine(summary),
        };
        let seconds = start.elapsed().as_secs_f64();
        timings.stages.insert(stage, seconds);
        match &result {
            Ok(()) => log::info!("stage={stage} event=done seconds={seconds:.3}"),
            Err(e) => log::error!("stage={stage} event=failed seconds={seconds:.3} error=\"{e}\""),
        }
        result
    }

    fn tri_mesh(&mut self, stage: Stage) -> Result<Arc<TriMesh>, CliError> {
        if let Some(t) = &self.tri {
            return Ok(t.clone());
        }
        let text = self.read(stage, TRI_MESH)?;
        let t = Arc::new(TriMesh::from_json(&text, &self.domain).map_err(|e| stage_error(stage)(&e))?);
        self.tri = Some(t.clone());
        Ok(t)
    }

    fn field(&mut self, stage: Stage) -> Result<&FieldSolution, CliError> {
        if self.field.is_none() {
            let tri = self.tri_mesh(stage)?;
            let text = self.read(stage, FIELD)?;
            self.field = Some(FieldSolution::from_dump(&text, tri).map_err(|e| stage_error(stage)(&e))?);
        }
        Ok(self.field.as_ref().unwrap())
    }

    fn report(&mut self, stage: Stage) -> Result<&AnalysisReport, CliError> {
        if self.report.is_none() {
            let text = self.read(stage, ANALYSIS)?;
            self.report = Some(AnalysisReport::from_json(&text).map_err(|e| stage_error(stage)(&e))?);
        }
        Ok(self.report.as_ref().unwrap())
    }

    fn graph(&mut self, stage: Stage) -> Result<&SeparatrixGraph, CliError> {
        if self.graph.is_none() {
            let text = self.read(stage, GRAPH)?;
            self.graph = Some(SeparatrixGraph::from_json(&text).map_err(|e| stage_error(stage)(&e))?);
        }
        Ok(self.graph.as_ref().unwrap())
    }

    fn coarse(&mut self, stage: Stage) -> Result<&QuadMesh, CliError> {
        if self.coarse.is_none() {
            let text = self.read(stage, COARSE)?;
            self.coarse = Some(QuadMesh::from_json(&text).map_err(|e| stage_error(stage)(&e))?);
        }
        Ok(self.coarse.as_ref().unwrap())
    }

    /// Solver orders for heat maps, when the solve artifacts exist.
    fn order_map(&mut self, stage: Stage) -> Option<OrderMap> {
        let tri = self.tri_mesh(stage).ok()?;
        let orders: Vec<usize> = serde_json::from_str(&self.read(stage, ORDERS).ok()?).ok()?;
        (orders.len() == tri.n_elements()).then(|| OrderMap::new(&tri, &orders))
    }

    fn solve(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        let stage = Stage::Solve;
        let err = stage_error(stage);
        let cfg = &self.config;
        let tri = match &cfg.paths.tri_mesh {
            Some(p) if p.extension().is_some_and(|e| e == "msh") => gmsh::read_msh(p, &self.domain),
            Some(p) => std::fs::read_to_string(p)
                .map_err(quadfield::sem::SemError::from)
                .and_then(|t| TriMesh::from_json(&t, &self.domain)),
            None => match &cfg.mesh.structured {
                Some(s) => mesher::structured(&self.domain, &s.kind, s.n),
                None => mesher::triangulate(&self.domain, cfg.mesh.size * self.domain.diag()),
            },
        }
        .map_err(|e| err(&e))?;
        let tri = Arc::new(tri);
        let scheme = cfg.discretization.scheme_for(&self.domain);
        let mut disc = DiscretizationConfig::uniform(scheme, tri.n_elements(), cfg.adaptation.initial_order);
        disc.penalty = cfg.discretization.penalty;
        disc.tolerance = cfg.discretization.tolerance;
        disc.linear_solver = cfg.discretization.linear_solver;
        log::info!("stage=solve triangles={} scheme={scheme:?}", tri.n_elements());
        self.tri = Some(tri.clone());
        self.write(TRI_MESH, &tri.to_json())?;
        let result = adapt_loop(&self.domain, &tri, &cfg.adaptation, &disc).map_err(|e| err(&e))?;
        self.write(FIELD, &result.field.to_dump())?;
        self.write(ORDERS, &serde_json::to_string(&result.orders).expect("orders serialize"))?;
        self.write(ADAPT_LOG, &result.log.to_text())?;
        if self.config.emit.vtk {
            self.write(FIELD_VTK, &to_vtk(&result.field, 4))?;
        }
        let o = &result.orders;
        summary.solve = Some(SolveSummary {
            scheme: Some(scheme),
            triangles: tri.n_elements(),
            min_order: o.iter().copied().min().unwrap_or(0),
            max_order: o.iter().copied().max().unwrap_or(0),
            mean_order: o.iter().sum::<usize>() as f64 / o.len().max(1) as f64,
            adapt_iterations: result.log.iterations.len(),
            adapt_converged: result.log.converged,
        });
        self.field = Some(result.field);
        self.report = None;
        Ok(())
    }

    fn analyze(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        let stage = Stage::Analyze;
        self.field(stage)?;
        let report = analyze(self.field.as_ref().unwrap(), &self.domain).map_err(|e| stage_error(stage)(&e))?;
        self.write(ANALYSIS, &report.to_json())?;
        let cps = &report.critical_points;
        summary.analysis = Some(AnalysisSummary {
            critical_points: cps.len(),
            valences: cps.iter().map(|c| c.valence).collect(),
            indices: cps.iter().map(|c| c.index).collect(),
            index_sum: cps.iter().map(|c| c.index).sum(),
            corner_valences: report.corners.iter().map(|c| c.valence).collect(),
            degenerate: cps.iter().filter(|c| c.degenerate).count() + report.corners.iter().filter(|c| c.degenerate).count(),
        });
        self.report = Some(report);
        self.graph = None;
        Ok(())
    }

    fn trace(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        let stage = Stage::Trace;
        self.field(stage)?;
        self.report(stage)?;
        let cfg = &self.config.tracing;
        let result = trace(self.field.as_ref().unwrap(), &self.domain, self.report.as_ref().unwrap(), cfg)
            .map_err(|e| stage_error(stage)(&e))?;
        let g = &result.graph;
        self.write(GRAPH, &g.to_json())?;
        if self.config.emit.svg {
            self.write(GRAPH_SVG, &graph_svg(g))?;
        }
        summary.trace = Some(TraceSummary {
            step: g.step,
            merge_distance: g.merge_distance,
            aggressive: cfg.aggressive,
            rounds: result.rounds,
            streamlines: result.streamlines.len(),
            unterminated: result.streamlines.iter().filter(|s| s.is_active()).count(),
            limit_cycles: 0,
            nodes: g.nodes.len(),
            separatrix_edges: g.separatrix_edges().count(),
            boundary_edges: g.edges.iter().filter(|e| e.is_boundary()).count(),
            merged_paths: g.paths.iter().filter(|p| p.merged).count(),
            midpoint_nodes: g.nodes.iter().filter(|n| n.kind == NodeKind::Midpoint).count(),
        });
        self.graph = Some(result.graph);
        self.coarse = None;
        Ok(())
    }

    fn quad_order(&mut self, stage: Stage) -> usize {
        if let Some(q) = self.config.quad.order {
            return q;
        }
        let solver_max = self
            .read(stage, ORDERS)
            .ok()
            .and_then(|t| serde_json::from_str::<Vec<usize>>(&t).ok())
            .and_then(|o| o.into_iter().max())
            .unwrap_or(self.config.adaptation.p_max);
        solver_max.clamp(1, MAX_DEFAULT_QUAD_ORDER)
    }

    fn mesh(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        let stage = Stage::Mesh;
        let err = stage_error(stage);
        let order = self.quad_order(stage);
        let graph = self.graph(stage)?.clone();
        let splined = spline_separatrices(&graph).map_err(|e| err(&e))?;
        let blocks = extract_blocks(&splined, &self.domain).map_err(|e| err(&e))?;
        let euler: EulerCheck = euler_check(&blocks);
        self.write(BLOCKS, &serde_json::to_string_pretty(&blocks.blocks).expect("blocks serialize"))?;
        if !euler.holds() {
            return Err(err(&format!(
                "Euler characteristic {} of the block decomposition differs from {}",
                euler.value, euler.expected
            )));
        }
        let mesh = coarse_mesh(&blocks, order).map_err(|e| err(&e))?;
        self.write(COARSE, &mesh.to_json())?;
        self.emit_mesh(stage, &mesh, Some(&graph), COARSE_SVG, COARSE_MSH)?;
        let min = (0..mesh.n_elements()).map(|e| mesh.scaled_jacobian(e)).fold(f64::INFINITY, f64::min);
        summary.mesh = Some(MeshSummary {
            blocks: blocks.blocks.len(),
            order,
            euler_value: euler.value,
            euler_expected: euler.expected,
            min_scaled_jacobian: min,
        });
        self.coarse = Some(mesh);
        Ok(())
    }

    fn emit_mesh(
        &mut self,
        stage: Stage,
        mesh: &QuadMesh,
        graph: Option<&SeparatrixGraph>,
        svg: &str,
        msh: &str,
    ) -> Result<(), CliError> {
        if self.config.emit.svg {
            let orders = self.order_map(stage);
            self.write(svg, &mesh_svg(mesh, graph, orders.as_ref()))?;
        }
        if self.config.emit.gmsh {
            match to_gmsh(mesh) {
                Ok(text) => self.write(msh, &text)?,
                Err(e) => log::info!("stage={stage} gmsh export skipped: {e}"),
            }
        }
        Ok(())
    }

    fn refine(&mut self, summary: &mut Summary) -> Result<(), CliError> {
        let stage = Stage::Refine;
        let err = stage_error(stage);
        let coarse = self.coarse(stage)?.clone();
        let (fine, chords) = refine(&coarse, &self.config.refinement).map_err(|e| err(&e))?;
        let report = validate(&fine, &self.config.validation);
        self.write(CHORDS, &serde_json::to_string_pretty(&chords).expect("chords serialize"))?;
        self.write(VALIDATION, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
        if self.config.emit.json {
            self.write(MESH, &fine.to_json())?;
        }
        let graph = self.graph(stage).ok().cloned();
        self.emit_mesh(stage, &fine, graph.as_ref(), MESH_SVG, MESH_MSH)?;
        summary.refine = Some(RefineSummary {
            elements: fine.n_elements(),
            predicted_elements: chords.predicted_elements(),
            chords: chords.counts.len(),
            min_scaled_jacobian: report.min_scaled_jacobian,
            mean_scaled_jacobian: report.mean_scaled_jacobian,
            conformity_violations: report.conformity_violations.len(),
            boundary_deviation: report.boundary_deviation,
            passed: report.passed,
        });
        if !report.passed {
            return Err(err(&format!("refined mesh failed validation: {}", report.failures.join("; "))));
        }
        Ok(())
    }
}
