use std::f64::consts::PI;
use std::sync::Arc;

use super::spline::CubicSpline;
use super::{wrap_angle, GeometryError, Vec2};
use crate::quadrature;

/// Underlying analytic geometry of a boundary curve.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveGeometry {
    /// Native parameter in [0, 1].
    Segment { start: Vec2, end: Vec2 },
    /// Native parameter in [0, 1], angle = start_angle + t * sweep.
    /// Positive sweep is counter-clockwise.
    Arc { center: Vec2, radius: f64, start_angle: f64, sweep: f64 },
    /// Native parameter is cumulative chord length.
    Spline(Arc<CubicSpline>),
}

/// An oriented boundary curve restricted to the parameter range `[t0, t1]`.
/// Forward traversal is increasing parameter; the domain lies on its left.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    geometry: CurveGeometry,
    t0: f64,
    t1: f64,
}

/// Nearest point on a single curve.
#[derive(Clone, Copy, Debug)]
pub struct CurveProjection {
    pub t: f64,
    pub point: Vec2,
    pub distance: f64,
}

impl BoundaryCurve {
    pub fn segment(start: Vec2, end: Vec2) -> Result<Self, GeometryError> {
        if !(start.iter().chain(end.iter()).all(|c| c.is_finite())) {
            return Err(GeometryError::InvalidCurve("non-finite segment end point".into()));
        }
        if (end - start).norm() == 0.0 {
            return Err(GeometryError::InvalidCurve("zero-length segment".into()));
        }
        Ok(Self { geometry: CurveGeometry::Segment { start, end }, t0: 0.0, t1: 1.0 })
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidCurve(format!("arc radius must be positive, got {radius}")));
        }
        if sweep == 0.0 || !sweep.is_finite() || sweep.abs() > 2.0 * PI + 1e-12 {
            return Err(GeometryError::InvalidCurve(format!("invalid arc sweep {sweep}")));
        }
        Ok(Self {
            geometry: CurveGeometry::Arc { center, radius, start_angle, sweep },
            t0: 0.0,
            t1: 1.0,
        })
    }

    pub fn spline(points: &[Vec2]) -> Result<Self, GeometryError> {
        let s = CubicSpline::interpolate(points)?;
        let (t0, t1) = s.param_range();
        Ok(Self { geometry: CurveGeometry::Spline(Arc::new(s)), t0, t1 })
    }

    /// A spline curve restricted to a sub-range of its native parameter.
    pub fn spline_range(spline: Arc<CubicSpline>, t0: f64, t1: f64) -> Result<Self, GeometryError> {
        let (a, b) = spline.param_range();
        if !(t0 < t1 && t0 >= a - 1e-12 && t1 <= b + 1e-12) {
            return Err(GeometryError::InvalidCurve(format!("spline range [{t0}, {t1}] outside [{a}, {b}]")));
        }
        Ok(Self { geometry: CurveGeometry::Spline(spline), t0, t1 })
    }

    pub fn geometry(&self) -> &CurveGeometry {
        &self.geometry
    }

    pub fn param_range(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn is_straight(&self) -> bool {
        matches!(self.geometry, CurveGeometry::Segment { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.geometry {
            CurveGeometry::Segment { .. } => "segment",
            CurveGeometry::Arc { .. } => "arc",
            CurveGeometry::Spline(_) => "spline",
        }
    }

    fn check_param(&self, t: f64) -> Result<(), GeometryError> {
        let eps = 1e-12 * (1.0 + (self.t1 - self.t0).abs());
        if t < self.t0 - eps || t > self.t1 + eps || !t.is_finite() {
            return Err(GeometryError::ParameterOutOfRange { t, t0: self.t0, t1: self.t1 });
        }
        Ok(())
    }

    pub fn point(&self, t: f64) -> Vec2 {
        match &self.geometry {
            CurveGeometry::Segment { start, end } => start + (end - start) * t,
            CurveGeometry::Arc { center, radius, start_angle, sweep } => {
                let a = start_angle + t * sweep;
                center + Vec2::new(a.cos(), a.sin()) * *radius
            }
            CurveGeometry::Spline(s) => s.eval(t),
        }
    }

    pub fn derivative(&self, t: f64) -> Vec2 {
        match &self.geometry {
            CurveGeometry::Segment { start, end } => end - start,
            CurveGeometry::Arc { radius, start_angle, sweep, .. } => {
                let a = start_angle + t * sweep;
                Vec2::new(-a.sin(), a.cos()) * (*radius * *sweep)
            }
            CurveGeometry::Spline(s) => s.derivative(t),
        }
    }

    pub fn second_derivative(&self, t: f64) -> Vec2 {
        match &self.geometry {
            CurveGeometry::Segment { .. } => Vec2::zeros(),
            CurveGeometry::Arc { radius, start_angle, sweep, .. } => {
                let a = start_angle + t * sweep;
                -Vec2::new(a.cos(), a.sin()) * (*radius * sweep * sweep)
            }
            CurveGeometry::Spline(s) => s.second_derivative(t),
        }
    }

    pub fn start(&self) -> Vec2 {
        self.point(self.t0)
    }

    pub fn end(&self) -> Vec2 {
        self.point(self.t1)
    }

    /// Angle of the forward tangent, in (-pi, pi].
    pub fn tangent_angle(&self, t: f64) -> Result<f64, GeometryError> {
        self.check_param(t)?;
        let d = self.derivative(t);
        Ok(wrap_angle(d.y.atan2(d.x)))
    }

    pub fn unit_tangent(&self, t: f64) -> Vec2 {
        self.derivative(t).normalize()
    }

    /// Arc length between two parameters (t_a <= t_b not required).
    pub fn length_between(&self, ta: f64, tb: f64) -> f64 {
        match &self.geometry {
            CurveGeometry::Segment { start, end } => (end - start).norm() * (tb - ta).abs(),
            CurveGeometry::Arc { radius, sweep, .. } => radius * sweep.abs() * (tb - ta).abs(),
            CurveGeometry::Spline(s) => {
                let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
                let mut total = 0.0;
                let knots = s.knots();
                let i0 = s.segment_of(lo);
                let i1 = s.segment_of(hi);
                for i in i0..=i1 {
                    let a = knots[i].max(lo);
                    let b = knots[i + 1].min(hi);
                    if b > a {
                        total += quadrature::integrate(a, b, 12, |t| s.derivative(t).norm());
                    }
                }
                total
            }
        }
    }

    pub fn length(&self) -> f64 {
        self.length_between(self.t0, self.t1)
    }

    /// Parameter at which the arc length measured from t0 equals `fraction * length`.
    pub fn param_at_length_fraction(&self, fraction: f64) -> f64 {
        let f = fraction.clamp(0.0, 1.0);
        match &self.geometry {
            CurveGeometry::Segment { .. } | CurveGeometry::Arc { .. } => self.t0 + f * (self.t1 - self.t0),
            CurveGeometry::Spline(_) => {
                let target = f * self.length();
                let (mut lo, mut hi) = (self.t0, self.t1);
                let mut t = self.t0 + f * (self.t1 - self.t0);
                for _ in 0..60 {
                    let g = self.length_between(self.t0, t) - target;
                    if g.abs() < 1e-14 * (1.0 + target) {
                        break;
                    }
                    if g > 0.0 {
                        hi = t;
                    } else {
                        lo = t;
                    }
                    let speed = self.derivative(t).norm();
                    let newton = t - g / speed;
                    t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
                }
                t
            }
        }
    }

    /// Net change of the tangent angle along the curve (unwrapped).
    pub fn total_turning(&self) -> f64 {
        match &self.geometry {
            CurveGeometry::Segment { .. } => 0.0,
            CurveGeometry::Arc { sweep, .. } => sweep * (self.t1 - self.t0),
            CurveGeometry::Spline(s) => {
                let n = 64 * s.segment_count().max(1);
                let mut total = 0.0;
                let mut prev = self.derivative(self.t0);
                for k in 1..=n {
                    let t = self.t0 + (self.t1 - self.t0) * k as f64 / n as f64;
                    let d = self.derivative(t);
                    total += (prev.x * d.y - prev.y * d.x).atan2(prev.dot(&d));
                    prev = d;
                }
                total
            }
        }
    }

    /// Same geometry traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        match &self.geometry {
            CurveGeometry::Segment { .. } => Self::segment(self.end(), self.start()).unwrap(),
            CurveGeometry::Arc { center, radius, start_angle, sweep } => {
                let a0 = start_angle + self.t0 * sweep;
                let a1 = start_angle + self.t1 * sweep;
                Self::arc(*center, *radius, a1, a0 - a1).unwrap()
            }
            CurveGeometry::Spline(s) => {
                let len = s.param_range().1;
                let r = Arc::new(s.reversed());
                Self { geometry: CurveGeometry::Spline(r), t0: len - self.t1, t1: len - self.t0 }
            }
        }
    }

    /// Split at an interior parameter. Segments and arcs are re-parametrized
    /// onto [0, 1]; spline pieces keep the parent's parameter.
    pub fn split_at(&self, t: f64) -> Result<(Self, Self), GeometryError> {
        let eps = 1e-12 * (1.0 + (self.t1 - self.t0).abs());
        if !(t > self.t0 + eps && t < self.t1 - eps) {
            return Err(GeometryError::ParameterOutOfRange { t, t0: self.t0, t1: self.t1 });
        }
        Ok(match &self.geometry {
            CurveGeometry::Segment { .. } => {
                let m = self.point(t);
                (Self::segment(self.start(), m)?, Self::segment(m, self.end())?)
            }
            CurveGeometry::Arc { center, radius, start_angle, sweep } => {
                let a0 = start_angle + self.t0 * sweep;
                let am = start_angle + t * sweep;
                let a1 = start_angle + self.t1 * sweep;
                (Self::arc(*center, *radius, a0, am - a0)?, Self::arc(*center, *radius, am, a1 - am)?)
            }
            CurveGeometry::Spline(s) => (
                Self::spline_range(s.clone(), self.t0, t)?,
                Self::spline_range(s.clone(), t, self.t1)?,
            ),
        })
    }

    /// Globally nearest point on this curve. Ties resolve to the lowest parameter.
    pub fn project(&self, p: Vec2) -> CurveProjection {
        let mut cands: Vec<f64> = vec![self.t0, self.t1];
        match &self.geometry {
            CurveGeometry::Segment { start, end } => {
                let d = end - start;
                let t = (p - start).dot(&d) / d.norm_squared();
                cands.push(t.clamp(self.t0, self.t1));
            }
            CurveGeometry::Arc { center, start_angle, sweep, .. } => {
                let r = p - center;
                if r.norm() > 0.0 {
                    let ang = r.y.atan2(r.x);
                    // Candidate parameters for every 2pi image of the angle.
                    for k in -2..=2 {
                        let t = (ang + 2.0 * PI * k as f64 - start_angle) / sweep;
                        if t >= self.t0 && t <= self.t1 {
                            cands.push(t);
                        }
                    }
                }
            }
            CurveGeometry::Spline(s) => {
                let knots = s.knots();
                let i0 = s.segment_of(self.t0);
                let i1 = s.segment_of(self.t1);
                for i in i0..=i1 {
                    let a = knots[i].max(self.t0);
                    let b = knots[i + 1].min(self.t1);
                    if b <= a {
                        continue;
                    }
                    for seed in 0..4 {
                        let mut t = a + (b - a) * seed as f64 / 3.0;
                        for _ in 0..30 {
                            let c = self.point(t) - p;
                            let d1 = self.derivative(t);
                            let d2 = self.second_derivative(t);
                            let f = c.dot(&d1);
                            let fp = d1.norm_squared() + c.dot(&d2);
                            let step = if fp > 0.0 { f / fp } else { f / d1.norm_squared() };
                            let tn = (t - step).clamp(a, b);
                            if (tn - t).abs() < 1e-15 * (1.0 + t.abs()) {
                                t = tn;
                                break;
                            }
                            t = tn;
                        }
                        cands.push(t);
                    }
                }
            }
        }
        let mut best = CurveProjection { t: f64::NAN, point: Vec2::zeros(), distance: f64::INFINITY };
        let scale = 1e-13 * (1.0 + self.length());
        for t in cands {
            let q = self.point(t);
            let d = (q - p).norm();
            if d < best.distance - scale || ((d - best.distance).abs() <= scale && t < best.t) {
                best = CurveProjection { t, point: q, distance: d };
            }
        }
        best
    }

    /// `n + 1` points equally spaced in parameter, endpoints included.
    pub fn sample_param(&self, n: usize) -> Vec<Vec2> {
        (0..=n).map(|k| self.point(self.t0 + (self.t1 - self.t0) * k as f64 / n as f64)).collect()
    }

    /// `n + 1` points equally spaced in arc length, endpoints included.
    pub fn sample(&self, n: usize) -> Vec<Vec2> {
        (0..=n).map(|k| self.point(self.param_at_length_fraction(k as f64 / n as f64))).collect()
    }
}
