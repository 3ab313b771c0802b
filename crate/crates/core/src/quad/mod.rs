//! Quadrilateral blocks from the separatrix graph, the coarse high-order quad
//! mesh and its refinement by isoparametric splitting.

mod blocks;
mod chords;
mod export;
mod lagrange;
mod mesh;
mod refine;
mod spline;
#[cfg(test)]
mod tests;
mod validate;

pub use blocks::{euler_check, extract_blocks, BlockSet, EulerCheck, QuadBlock};
pub use chords::{ChordPin, Chords};
pub use export::{mesh_svg, to_gmsh, OrderMap};
pub use lagrange::Lagrange1d;
pub use mesh::{coarse_mesh, BoundarySide, QuadElement, QuadMesh, MAX_ORDER};
pub use refine::{refine, SplitConfig};
pub use spline::{spline_polyline, spline_separatrices, SplinedGraph};
pub use validate::{validate, ValidationReport, ValidationThresholds};

use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum QuadError {
    #[error("polyline has {points} distinct points; a spline needs at least 2")]
    ShortPolyline { points: usize },
    #[error("spline fit failed: {0}")]
    Spline(#[from] GeometryError),
    #[error("face {face} has {corners} corners (nodes {nodes:?}); every block needs 4")]
    NonQuadFace { face: usize, corners: usize, nodes: Vec<usize> },
    #[error("edge {edge} is dangling: it bounds the same face on both sides")]
    DanglingEdge { edge: usize },
    #[error("a boundary loop is not connected to the rest of the separatrix graph")]
    DisconnectedLoop,
    #[error("block {block} side {side} is not shared whole with a neighboring block")]
    NonConforming { block: usize, side: usize },
    #[error("block {block} has a non-positive Jacobian (min det {min_det:e})")]
    InvertedBlock { block: usize, min_det: f64 },
    #[error("geometric order must be between 1 and {max}, got {order}")]
    BadOrder { order: usize, max: usize },
    #[error("subdivision count must be at least 1, got {0}")]
    BadCount(usize),
    #[error("grading ratio must be positive and finite, got {0}")]
    BadGrading(f64),
    #[error("pins give chord {chord} the counts {a} and {b}")]
    ConflictingPins { chord: usize, a: usize, b: usize },
    #[error("pin refers to block {block} direction {direction}, which does not exist")]
    UnknownPin { block: usize, direction: usize },
    #[error("mesh file: {0}")]
    Format(String),
}
