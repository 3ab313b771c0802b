//! Piecewise-smooth planar domains: boundary curves, corners, projection.

mod curve;
mod domain;
pub mod fixtures;
pub mod io;
mod spline;

use std::f64::consts::PI;

pub use curve::{BoundaryCurve, CurveGeometry, CurveProjection};
pub use domain::{BoundaryPoint, Corner, Domain, LoopRole, TAU_CORNER};
pub use spline::CubicSpline;

pub type Vec2 = nalgebra::Vector2<f64>;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("parameter {t} outside [{t0}, {t1}]")]
    ParameterOutOfRange { t: f64, t0: f64, t1: f64 },
    #[error("loop {loop_index} is open after curve {curve_index}: gap {gap:e}")]
    OpenLoop { loop_index: usize, curve_index: usize, gap: f64 },
    #[error("degenerate junction in loop {loop_index} before curve {curve_index}: interior angle {angle}")]
    DegenerateJunction { loop_index: usize, curve_index: usize, angle: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("geometry file: {0}")]
    Io(#[from] std::io::Error),
    #[error("geometry format: {0}")]
    Format(String),
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Boundary value of the guiding field for a tangent angle.
pub fn boundary_bc(theta: f64) -> (f64, f64) {
    let a = 4.0 * theta;
    (a.cos(), a.sin())
}

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
pub fn orient2d(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Winding-number point-in-polygon test on a closed polyline (last point need not repeat the first).
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    winding_number(p, poly) != 0
}

pub fn winding_number(p: Vec2, poly: &[Vec2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= p.y {
            if b.y > p.y && orient2d(a, b, p) > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && orient2d(a, b, p) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Signed area of a closed polyline.
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y).sum::<f64>() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn boundary_bc_examples() {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15;
        assert!(close(boundary_bc(0.0), (1.0, 0.0)));
        assert!(close(boundary_bc(FRAC_PI_2), (1.0, 0.0)));
        assert!(close(boundary_bc(PI / 8.0), (0.0, 1.0)));
    }

    proptest! {
        #[test]
        fn boundary_bc_quarter_turn_symmetry(theta in -10.0f64..10.0, k in -8i32..8) {
            let a = boundary_bc(theta);
            let b = boundary_bc(theta + k as f64 * FRAC_PI_2);
            prop_assert!((a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12);
        }

        #[test]
        fn wrap_angle_range(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            let k = ((a - w) / (2.0 * PI)).round();
            prop_assert!((a - w - 2.0 * PI * k).abs() < 1e-9);
        }
    }

    #[test]
    fn winding_number_of_square() {
        let sq = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        assert_eq!(winding_number(Vec2::new(0.5, 0.5), &sq), 1);
        assert_eq!(winding_number(Vec2::new(1.5, 0.5), &sq), 0);
        assert!((polygon_area(&sq) - 1.0).abs() < 1e-15);
    }
}
