//! Cross-field guided quadrilateral block decomposition of planar domains.

pub mod adapt;
pub mod analysis;
pub mod geometry;
pub mod quad;
pub mod quadrature;
pub mod sem;
pub mod solver;
pub mod trace;
