//! Built-in test geometries.

use std::f64::consts::PI;

use super::{BoundaryCurve, Domain, Vec2};

fn polygon(pts: &[Vec2]) -> Vec<BoundaryCurve> {
    (0..pts.len())
        .map(|i| BoundaryCurve::segment(pts[i], pts[(i + 1) % pts.len()]).expect("distinct vertices"))
        .collect()
}

fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

pub fn unit_square() -> Domain {
    Domain::new(vec![polygon(&[v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)])]).unwrap()
}

pub fn l_shape() -> Domain {
    let pts = [v(0.0, 0.0), v(2.0, 0.0), v(2.0, 1.0), v(1.0, 1.0), v(1.0, 2.0), v(0.0, 2.0)];
    Domain::new(vec![polygon(&pts)]).unwrap()
}

/// Unit half disc above the x axis.
pub fn half_disc() -> Domain {
    let diameter = BoundaryCurve::segment(v(-1.0, 0.0), v(1.0, 0.0)).unwrap();
    let arc = BoundaryCurve::arc(Vec2::zeros(), 1.0, 0.0, PI).unwrap();
    Domain::new(vec![vec![diameter, arc]]).unwrap()
}

/// Box [-1, 1] x [0, height] whose top corners are rounded with radii
/// `right` and `left`; each rounding induces one valence-3 point.
pub fn rounded_box(right: f64, left: f64, height: f64) -> Domain {
    let mut c = vec![BoundaryCurve::segment(v(-1.0, 0.0), v(1.0, 0.0)).unwrap()];
    if right < height {
        c.push(BoundaryCurve::segment(v(1.0, 0.0), v(1.0, height - right)).unwrap());
    }
    c.push(BoundaryCurve::arc(v(1.0 - right, height - right), right, 0.0, PI / 2.0).unwrap());
    if right + left < 2.0 {
        c.push(BoundaryCurve::segment(v(1.0 - right, height), v(-1.0 + left, height)).unwrap());
    }
    c.push(BoundaryCurve::arc(v(-1.0 + left, height - left), left, PI / 2.0, PI / 2.0).unwrap());
    if left < height {
        c.push(BoundaryCurve::segment(v(-1.0, height - left), v(-1.0, 0.0)).unwrap());
    }
    Domain::new(vec![c]).unwrap()
}

/// Unit disc bounded by a single full circle.
pub fn disc() -> Domain {
    Domain::new(vec![vec![BoundaryCurve::arc(Vec2::zeros(), 1.0, 0.0, 2.0 * PI).unwrap()]]).unwrap()
}

/// Quarter annulus 1 <= r <= 2 in the first quadrant.
pub fn annular_sector() -> Domain {
    let c = vec![
        BoundaryCurve::segment(v(1.0, 0.0), v(2.0, 0.0)).unwrap(),
        BoundaryCurve::arc(Vec2::zeros(), 2.0, 0.0, PI / 2.0).unwrap(),
        BoundaryCurve::segment(v(0.0, 2.0), v(0.0, 1.0)).unwrap(),
        BoundaryCurve::arc(Vec2::zeros(), 1.0, PI / 2.0, -PI / 2.0).unwrap(),
    ];
    Domain::new(vec![c]).unwrap()
}

/// Growth rate of the logarithmic spiral r = exp(k theta) bounding the nautilus.
pub const NAUTILUS_GROWTH: f64 = 0.12;

/// Snail shell: one turn of a logarithmic spiral closed by a radial segment.
pub fn nautilus() -> Domain {
    let n = 96;
    let outer_r = (NAUTILUS_GROWTH * 2.0 * PI).exp();
    let mut pts: Vec<Vec2> = (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            let r = (NAUTILUS_GROWTH * th).exp();
            v(r * th.cos(), r * th.sin())
        })
        .collect();
    pts.push(v(outer_r, 0.0));
    let spiral = BoundaryCurve::spline(&pts).unwrap();
    let closing = BoundaryCurve::segment(v(outer_r, 0.0), v(1.0, 0.0)).unwrap();
    Domain::new(vec![vec![spiral, closing]]).unwrap()
}

/// Quadrilateral with a 30 degree corner at the origin, two right angles and
/// a 150 degree corner.
pub fn sharp_polygon() -> Domain {
    let h = 1.0;
    let pts = [v(0.0, 0.0), v(3.0, 0.0), v(3.0, h), v(h * 3f64.sqrt(), h)];
    Domain::new(vec![polygon(&pts)]).unwrap()
}

/// Half thickness of a NACA 0012 section with a closed trailing edge.
pub fn naca0012_thickness(x: f64) -> f64 {
    0.6 * (0.2969 * x.sqrt() - 0.1260 * x - 0.3516 * x * x + 0.2843 * x.powi(3) - 0.1036 * x.powi(4))
}

/// Unit-chord NACA 0012 profile inside a rectangular box.
pub fn naca0012_in_box() -> Domain {
    let n = 40;
    let mut pts = Vec::new();
    // Trailing edge, along the upper surface to the leading edge and back.
    for i in 0..=n {
        let x = 0.5 * (1.0 + (PI * i as f64 / n as f64).cos());
        pts.push(v(x, naca0012_thickness(x)));
    }
    for i in 1..=n {
        let x = 0.5 * (1.0 - (PI * i as f64 / n as f64).cos());
        pts.push(v(x, -naca0012_thickness(x)));
    }
    let last = pts.len() - 1;
    pts[last] = pts[0];
    let airfoil = BoundaryCurve::spline(&pts).unwrap();
    let bx = polygon(&[v(-1.5, -1.5), v(2.5, -1.5), v(2.5, 1.5), v(-1.5, 1.5)]);
    Domain::new(vec![bx, vec![airfoil]]).unwrap()
}

pub const NAMES: [&str; 9] = [
    "square",
    "l_shape",
    "half_disc",
    "disc",
    "annular_sector",
    "nautilus",
    "sharp_polygon",
    "naca0012",
    "rounded_box",
];

pub fn by_name(name: &str) -> Option<Domain> {
    Some(match name {
        "square" => unit_square(),
        "l_shape" => l_shape(),
        "half_disc" => half_disc(),
        "disc" => disc(),
        "annular_sector" => annular_sector(),
        "nautilus" => nautilus(),
        "sharp_polygon" => sharp_polygon(),
        "naca0012" => naca0012_in_box(),
        "rounded_box" => rounded_box(1.0, 0.5, 1.0),
        _ => return None,
    })
}

pub fn all() -> Vec<(&'static str, Domain)> {
    NAMES.iter().map(|n| (*n, by_name(n).unwrap())).collect()
}
