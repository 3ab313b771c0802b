//! Separatrix tracing from irregular nodes and corners, merging, and the
//! planar separatrix graph.

mod graph;
mod integrate;
mod merge;
mod midpoint;
mod svg;
#[cfg(test)]
mod tests;

use std::f64::consts::{FRAC_PI_6, PI};

use serde::{Deserialize, Serialize};

pub use graph::{EdgeKind, Face, GraphEdge, GraphNode, NodeKind, SeparatrixGraph, SeparatrixPath};
pub use integrate::{adjusted_direction, initial_directions};
pub use merge::{blend, blend_weight};
pub use midpoint::midpoint_division;
pub use svg::graph_svg;

use crate::analysis::{AnalysisError, AnalysisReport};
use crate::geometry::{Domain, Vec2};
use crate::sem::FieldSolution;
use integrate::Tracer;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("invalid tracing settings: {0}")]
    InvalidConfig(String),
    #[error("initial direction search at ({x}, {y}) did not converge in 50 iterations")]
    DirectionNotConverged { x: f64, y: f64 },
    #[error("node at ({x}, {y}): expected {expected} distinct branches, found {found}")]
    CollapsedBranches { x: f64, y: f64, expected: usize, found: usize },
    #[error("field vanishes at ({x}, {y}); no streamline direction")]
    CriticalDirection { x: f64, y: f64 },
    #[error("point ({x}, {y}) lies in no element but inside the domain")]
    Lost { x: f64, y: f64 },
    #[error("streamline {streamline} exceeded {steps} steps: possible limit cycle")]
    LimitCycle { streamline: usize, steps: usize },
    #[error("corner {corner} has valence {valence}; midpoint division needs a degenerate corner")]
    NotDegenerate { corner: usize, valence: i64 },
    #[error("block identification failed: {0}")]
    Block(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Step length; defaults to 0.02 × bounding-box diagonal.
    pub step: Option<f64>,
    /// Merge distance; defaults to the step, or 5 steps when aggressive.
    pub merge_distance: Option<f64>,
    pub aggressive: bool,
}

impl TraceConfig {
    pub fn step_for(&self, domain: &Domain) -> f64 {
        self.step.unwrap_or(0.02 * domain.diag())
    }

    pub fn merge_distance_for(&self, domain: &Domain) -> f64 {
        let h = self.step_for(domain);
        self.merge_distance.unwrap_or(if self.aggressive { 5.0 * h } else { h })
    }

    pub fn validate(&self, domain: &Domain) -> Result<(), TraceError> {
        let h = self.step_for(domain);
        if !(h > 0.0 && h.is_finite()) {
            return Err(TraceError::InvalidConfig(format!("step must be positive, got {h}")));
        }
        let dm = self.merge_distance_for(domain);
        if !(dm >= h && dm.is_finite()) {
            return Err(TraceError::InvalidConfig(format!("merge distance {dm} must be at least the step {h}")));
        }
        Ok(())
    }
}

/// Where a streamline started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub node: usize,
    pub branch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Status {
    Active,
    /// Ended on the boundary at the given graph node.
    Boundary { node: usize },
    /// Merged with the given streamline.
    Merged { partner: usize },
    /// Ran into the given node.
    Absorbed { node: usize },
}

/// A streamline of the jump-adjusted cross direction, parametrized by arc length.
#[derive(Clone, Debug, Serialize)]
pub struct Streamline {
    pub id: usize,
    pub origin: Origin,
    pub points: Vec<Vec2>,
    pub heading: Vec2,
    pub status: Status,
    #[serde(skip)]
    pub(crate) history: Vec<Vec2>,
    #[serde(skip)]
    pub(crate) hint: Option<usize>,
}

impl Streamline {
    pub fn front(&self) -> Vec2 {
        *self.points.last().expect("streamline has points")
    }

    pub fn is_active(&self) -> bool {
        self.status == Status::Active
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

/// Streamlines after tracing, plus the graph they induce.
#[derive(Clone, Debug)]
pub struct TraceResult {
    pub streamlines: Vec<Streamline>,
    pub graph: SeparatrixGraph,
    pub rounds: usize,
}

/// Seed streamlines at every irregular node and every corner with valence
/// above 1, trace them synchronously with merging, build the graph and split
/// degenerate corner blocks.
pub fn trace(
    field: &FieldSolution,
    domain: &Domain,
    report: &AnalysisReport,
    cfg: &TraceConfig,
) -> Result<TraceResult, TraceError> {
    cfg.validate(domain)?;
    let h = cfg.step_for(domain);
    let dm = cfg.merge_distance_for(domain);
    let mut nodes = graph::seed_nodes(domain, report);
    let tracer = Tracer::new(field, domain, h, dm);
    let mut lines = Vec::new();
    for (ni, node) in nodes.clone().iter().enumerate() {
        let (count, sweep, radius) = match node.kind {
            NodeKind::Irregular => (node.valence as usize, None, node.radius),
            NodeKind::Corner if node.valence >= 2 => {
                let c = &domain.corners()[node.corner.expect("corner node")];
                (node.valence as usize, Some((c.sweep_start(), c.interior_angle)), node.radius)
            }
            _ => continue,
        };
        let dirs = initial_directions(field, node.location, count, sweep, radius)?;
        for (branch, d) in dirs.into_iter().enumerate() {
            lines.push(tracer.start(lines.len(), Origin { node: ni, branch }, node.location, d));
        }
    }
    let total = domain.perimeter();
    let max_steps = (20.0 * total / h).ceil() as usize;
    let mut paths: Vec<SeparatrixPath> = Vec::new();
    let mut rounds = 0;
    while lines.iter().any(Streamline::is_active) {
        rounds += 1;
        for s in lines.iter_mut().filter(|s| s.is_active()) {
            if s.points.len() > max_steps {
                return Err(TraceError::LimitCycle { streamline: s.id, steps: max_steps });
            }
            tracer.advance(s, &mut nodes)?;
        }
        for (a, b) in merge::merge_scan(&lines, dm) {
            let merged = merge::merge_pair(&tracer, &lines[a], &lines[b], &nodes)?;
            lines[a].status = Status::Merged { partner: b };
            lines[b].status = Status::Merged { partner: a };
            paths.push(merged);
        }
        tracer.absorb(&mut lines, &nodes);
    }
    for s in &lines {
        let end = match s.status {
            Status::Boundary { node } | Status::Absorbed { node } => node,
            _ => continue,
        };
        paths.push(SeparatrixPath {
            start: s.origin.node,
            end,
            origins: vec![s.origin],
            points: s.points.clone(),
            merged: false,
        });
    }
    paths.sort_by_key(|p| p.origins.clone().into_iter().map(|o| (o.node, o.branch)).collect::<Vec<_>>());
    let mut graph = SeparatrixGraph::build(domain, nodes, paths, h, dm)?;
    let degenerate: Vec<usize> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Corner && n.valence == 0)
        .filter_map(|n| n.corner)
        .collect();
    for corner in degenerate {
        graph = midpoint_division(field, domain, &graph, corner)?;
    }
    Ok(TraceResult { streamlines: lines, graph, rounds })
}

/// Whether two unit headings point in opposite directions for merging.
pub fn opposing(a: Vec2, b: Vec2) -> bool {
    a.dot(&b) <= -FRAC_PI_6.cos()
}

/// Angle of a vector in [0, 2π).
pub(crate) fn angle_of(d: Vec2) -> f64 {
    let a = d.y.atan2(d.x);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}
