//! Spectral elements on triangles: modal basis, meshes, mappings and fields.

pub mod basis;
mod field;
pub mod gmsh;
mod mesh;
pub mod mesher;

pub use field::{element_mass, FieldSolution, FieldValue};
pub use mesh::{BoundaryEdge, BoundaryTag, CurvedEdge, TriMesh, TAU_REF};

use crate::geometry::GeometryError;

#[derive(Debug, thiserror::Error)]
pub enum SemError {
    #[error("element {0} does not exist")]
    InvalidElement(usize),
    #[error("cannot project from order {from} up to order {to}")]
    OrderIncrease { from: usize, to: usize },
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("reference mass matrix is singular")]
    SingularMass,
    #[error("point not in element {elem}: inverse mapping did not converge")]
    NotInElement { elem: usize },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("element {elem} has non-positive Jacobian determinant {det:e}")]
    InvertedElement { elem: usize, det: f64 },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("boundary edge ({0}, {1}) carries no curve tag")]
    UntaggedBoundaryEdge(usize, usize),
    #[error("triangle {0} has more than one curved boundary edge; split it before ingestion")]
    MultipleCurvedEdges(usize),
    #[error("boundary tag ({0}, {1}) does not match a mesh edge")]
    DanglingTag(usize, usize),
    #[error("mesh file: {0}")]
    Format(String),
    #[error("mesh file: {0}")]
    Io(#[from] std::io::Error),
    #[error("meshing failed: {0}")]
    Meshing(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
