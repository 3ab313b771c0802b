//! Interpolating cubic splines with chord-length knots.
//!
//! Used both for spline boundary curves and for smoothing traced separatrices.

use super::{GeometryError, Vec2};

/// Natural cubic spline through a point sequence, parametrized by cumulative
/// chord length.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    points: Vec<Vec2>,
    /// Second derivatives at the knots.
    moments: Vec<Vec2>,
}

impl CubicSpline {
    pub fn interpolate(points: &[Vec2]) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::InvalidCurve(format!(
                "spline needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(GeometryError::InvalidCurve("non-finite spline point".into()));
        }
        let mut knots = Vec::with_capacity(points.len());
        knots.push(0.0);
        for w in points.windows(2) {
            let h = (w[1] - w[0]).norm();
            if h <= 0.0 {
                return Err(GeometryError::InvalidCurve("repeated consecutive spline point".into()));
            }
            knots.push(knots.last().unwrap() + h);
        }
        let n = points.len() - 1;
        let mut moments = vec![Vec2::zeros(); n + 1];
        if n >= 2 {
            // Tridiagonal system for interior moments, natural ends (M_0 = M_n = 0).
            let m = n - 1;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut lower = vec![0.0; m];
            let mut rhs = vec![Vec2::zeros(); m];
            for k in 0..m {
                let i = k + 1;
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                lower[k] = h0;
                diag[k] = 2.0 * (h0 + h1);
                upper[k] = h1;
                rhs[k] = ((points[i + 1] - points[i]) / h1 - (points[i] - points[i - 1]) / h0) * 6.0;
            }
            // Thomas algorithm.
            for k in 1..m {
                let w = lower[k] / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                let prev = rhs[k - 1];
                rhs[k] -= prev * w;
            }
            let mut sol = vec![Vec2::zeros(); m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                sol[k] = (rhs[k] - sol[k + 1] * upper[k]) / diag[k];
            }
            moments[1..n].copy_from_slice(&sol);
        }
        Ok(Self { knots, points: points.to_vec(), moments })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn param_range(&self) -> (f64, f64) {
        (0.0, *self.knots.last().unwrap())
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Index of the knot interval containing `t` (clamped).
    pub fn segment_of(&self, t: f64) -> usize {
        let n = self.segment_count();
        match self.knots.binary_search_by(|k| k.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    fn local(&self, t: f64) -> (usize, f64, f64, f64) {
        let i = self.segment_of(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = self.knots[i + 1] - t;
        let b = t - self.knots[i];
        (i, h, a, b)
    }

    pub fn eval(&self, t: f64) -> Vec2 {
        let (i, h, a, b) = self.local(t);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        m0 * (a * a * a / (6.0 * h))
            + m1 * (b * b * b / (6.0 * h))
            + (p0 / h - m0 * (h / 6.0)) * a
            + (p1 / h - m1 * (h / 6.0)) * b
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        let (i, h, a, b) = self.local(t);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        -m0 * (a * a / (2.0 * h)) + m1 * (b * b / (2.0 * h)) - (p0 / h - m0 * (h / 6.0))
            + (p1 / h - m1 * (h / 6.0))
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        let (i, h, a, b) = self.local(t);
        (self.moments[i] * a + self.moments[i + 1] * b) / h
    }

    pub fn reversed(&self) -> Self {
        let mut pts = self.points.clone();
        pts.reverse();
        // Reversing the data reverses the natural spline exactly (same knot gaps).
        Self::interpolate(&pts).expect("reversal of a valid spline is valid")
    }
}
