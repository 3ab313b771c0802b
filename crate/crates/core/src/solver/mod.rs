//! Spectral element solution of the guiding-field Laplace problem with
//! continuous or interior-penalty discontinuous Galerkin discretizations.

mod assemble;
mod boundary;
mod linear;
pub mod vtk;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use assemble::{assemble, LinearSystem};
pub use boundary::{boundary_data, cross_field_data, BoundaryData, BoundarySample};

use crate::geometry::{Domain, Vec2};
use crate::sem::{FieldSolution, SemError, TriMesh};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("boundary data is discontinuous at corners {corners:?}; use the DG scheme")]
    DiscontinuousData { corners: Vec<usize> },
    #[error("order map has {got} entries for {expected} elements")]
    OrderMapLength { expected: usize, got: usize },
    #[error("element {elem} has order 0; orders must be at least 1")]
    ZeroOrder { elem: usize },
    #[error("penalty scaling must be positive, got {0}")]
    BadPenalty(f64),
    #[error("linear system is singular or ill-conditioned ({reason}); element orders: {orders}")]
    Singular { reason: String, orders: String },
    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Cg,
    Dg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolver {
    Direct,
    /// Conjugate gradients with Jacobi preconditioning.
    Iterative,
}

#[derive(Clone, Debug)]
pub struct DiscretizationConfig {
    pub scheme: Scheme,
    pub orders: Vec<usize>,
    /// Interior penalty scaling for DG.
    pub penalty: f64,
    /// Relative residual tolerance of the linear solve.
    pub tolerance: f64,
    pub linear_solver: LinearSolver,
}

impl DiscretizationConfig {
    pub fn uniform(scheme: Scheme, n_elements: usize, order: usize) -> Self {
        Self {
            scheme,
            orders: vec![order; n_elements],
            penalty: 4.0,
            tolerance: 1e-10,
            linear_solver: LinearSolver::Direct,
        }
    }

    pub fn validate(&self, mesh: &TriMesh) -> Result<(), SolverError> {
        if self.orders.len() != mesh.n_elements() {
            return Err(SolverError::OrderMapLength { expected: mesh.n_elements(), got: self.orders.len() });
        }
        if let Some(elem) = self.orders.iter().position(|&p| p == 0) {
            return Err(SolverError::ZeroOrder { elem });
        }
        if !(self.penalty > 0.0) {
            return Err(SolverError::BadPenalty(self.penalty));
        }
        Ok(())
    }
}

/// Statistics of one solve.
#[derive(Clone, Debug, Serialize)]
pub struct SolveStats {
    pub scheme: Scheme,
    pub dofs: usize,
    pub nonzeros: usize,
    pub residual: f64,
    pub iterations: Option<usize>,
}

/// Dirichlet data as a function of (curve id, curve parameter, point).
pub type DirichletFn<'a> = dyn Fn(usize, f64, Vec2) -> (f64, f64) + Sync + 'a;

/// Solve for the guiding field with the cross boundary data.
pub fn solve(domain: &Domain, mesh: &Arc<TriMesh>, config: &DiscretizationConfig) -> Result<FieldSolution, SolverError> {
    solve_with_stats(domain, mesh, config).map(|(f, _)| f)
}

pub fn solve_with_stats(
    domain: &Domain,
    mesh: &Arc<TriMesh>,
    config: &DiscretizationConfig,
) -> Result<(FieldSolution, SolveStats), SolverError> {
    if config.scheme == Scheme::Cg {
        let corners: Vec<usize> =
            domain.corners().iter().filter(|c| !c.is_right_angle_multiple()).map(|c| c.id).collect();
        if !corners.is_empty() {
            return Err(SolverError::DiscontinuousData { corners });
        }
    }
    let data = cross_field_data(domain);
    solve_dirichlet(mesh, config, &data)
}

/// Solve two Laplace problems with arbitrary Dirichlet data.
pub fn solve_dirichlet(
    mesh: &Arc<TriMesh>,
    config: &DiscretizationConfig,
    data: &DirichletFn,
) -> Result<(FieldSolution, SolveStats), SolverError> {
    config.validate(mesh)?;
    let system = assemble(mesh, config, data)?;
    let (x, residual, iterations) = linear::solve(&system, config)?;
    let (u, v) = system.expand(&x);
    let field = FieldSolution::new(mesh.clone(), config.orders.clone(), u, v)?;
    let stats = SolveStats {
        scheme: config.scheme,
        dofs: system.n_free(),
        nonzeros: system.nonzeros(),
        residual,
        iterations,
    };
    log::debug!("solved {:?}: {} dofs, residual {:e}", stats.scheme, stats.dofs, residual);
    Ok((field, stats))
}

fn order_map_dump(orders: &[usize]) -> String {
    orders.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}
