//! JSON geometry files.
//!
//! ```json
//! {"loops": [[
//!   {"kind": "segment", "data": [[0, 0], [1, 0]]},
//!   {"kind": "arc", "data": {"center": [0, 0], "radius": 1, "start_angle": 0,
//!                            "end_angle": 3.14159, "direction": "ccw"}},
//!   {"kind": "spline", "data": [[x0, y0], [x1, y1], [x2, y2], [x3, y3]], "range": [a, b]}
//! ]]}
//! ```
//!
//! The first loop is the outer boundary. `range` is optional and restricts a
//! spline to part of its chord-length parameter.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BoundaryCurve, CubicSpline, CurveGeometry, Domain, GeometryError, Vec2};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryFile {
    pub loops: Vec<Vec<CurveRecord>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveRecord {
    pub kind: String,
    pub data: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArcData {
    center: [f64; 2],
    radius: f64,
    start_angle: f64,
    end_angle: f64,
    direction: String,
}

fn bad(msg: impl Into<String>) -> GeometryError {
    GeometryError::Format(msg.into())
}

fn points(v: &Value) -> Result<Vec<Vec2>, GeometryError> {
    let raw: Vec<[f64; 2]> = serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))?;
    Ok(raw.into_iter().map(|p| Vec2::new(p[0], p[1])).collect())
}

impl CurveRecord {
    pub fn to_curve(&self) -> Result<BoundaryCurve, GeometryError> {
        match self.kind.as_str() {
            "segment" => {
                let p = points(&self.data)?;
                if p.len() != 2 {
                    return Err(bad(format!("segment needs 2 points, got {}", p.len())));
                }
                BoundaryCurve::segment(p[0], p[1])
            }
            "arc" => {
                let a: ArcData = serde_json::from_value(self.data.clone()).map_err(|e| bad(e.to_string()))?;
                let raw = a.end_angle - a.start_angle;
                let sweep = match a.direction.as_str() {
                    "ccw" => {
                        let s = raw.rem_euclid(2.0 * PI);
                        if s == 0.0 {
                            2.0 * PI
                        } else {
                            s
                        }
                    }
                    "cw" => {
                        let s = (-raw).rem_euclid(2.0 * PI);
                        if s == 0.0 {
                            -2.0 * PI
                        } else {
                            -s
                        }
                    }
                    other => return Err(bad(format!("arc direction must be ccw or cw, got {other}"))),
                };
                BoundaryCurve::arc(Vec2::new(a.center[0], a.center[1]), a.radius, a.start_angle, sweep)
            }
            "spline" => {
                let p = points(&self.data)?;
                if p.len() < 4 {
                    return Err(bad(format!("spline needs at least 4 points, got {}", p.len())));
                }
                let s = Arc::new(CubicSpline::interpolate(&p)?);
                let (a, b) = self.range.map(|r| (r[0], r[1])).unwrap_or_else(|| s.param_range());
                BoundaryCurve::spline_range(s, a, b)
            }
            other => Err(bad(format!("unknown curve kind {other}"))),
        }
    }

    pub fn from_curve(c: &BoundaryCurve) -> Self {
        let (t0, t1) = c.param_range();
        match c.geometry() {
            CurveGeometry::Segment { .. } => {
                let (a, b) = (c.start(), c.end());
                Self { kind: "segment".into(), data: serde_json::json!([[a.x, a.y], [b.x, b.y]]), range: None }
            }
            CurveGeometry::Arc { center, radius, start_angle, sweep } => {
                let a0 = start_angle + t0 * sweep;
                let a1 = start_angle + t1 * sweep;
                let data = ArcData {
                    center: [center.x, center.y],
                    radius: *radius,
                    start_angle: a0,
                    end_angle: a1,
                    direction: if *sweep > 0.0 { "ccw".into() } else { "cw".into() },
                };
                Self { kind: "arc".into(), data: serde_json::to_value(data).unwrap(), range: None }
            }
            CurveGeometry::Spline(s) => {
                let pts: Vec<[f64; 2]> = s.points().iter().map(|p| [p.x, p.y]).collect();
                let full = s.param_range();
                let range = if (t0, t1) == full { None } else { Some([t0, t1]) };
                Self { kind: "spline".into(), data: serde_json::to_value(pts).unwrap(), range }
            }
        }
    }
}

impl GeometryFile {
    pub fn to_domain(&self) -> Result<Domain, GeometryError> {
        let loops = self
            .loops
            .iter()
            .map(|lp| lp.iter().map(CurveRecord::to_curve).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Domain::new(loops)
    }

    pub fn from_domain(d: &Domain) -> Self {
        let loops = (0..d.loop_count())
            .map(|li| d.loop_curves(li).map(|id| CurveRecord::from_curve(d.curve(id))).collect())
            .collect();
        Self { loops }
    }
}

pub fn parse_domain(text: &str) -> Result<Domain, GeometryError> {
    let f: GeometryFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    f.to_domain()
}

pub fn read_domain(path: &Path) -> Result<Domain, GeometryError> {
    parse_domain(&std::fs::read_to_string(path)?)
}

pub fn domain_to_json(d: &Domain) -> String {
    serde_json::to_string_pretty(&GeometryFile::from_domain(d)).expect("geometry serializes")
}
