//! One-dimensional Gauss rules on [-1, 1].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights of a 1D rule on [-1, 1], nodes ascending.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial P_n and its derivative at x.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // Endpoint limit: P_n'(±1) = (±1)^(n-1) n(n+1)/2.
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

fn compute_gauss_legendre(n: usize) -> Rule1d {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = -(PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule1d { nodes, weights }
}

fn compute_gauss_lobatto(n: usize) -> Rule1d {
    assert!(n >= 2);
    let p = n - 1;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[n - 1] = 1.0;
    // Interior nodes are roots of P'_p; Newton on P'_p using the Legendre ODE.
    for i in 1..n - 1 {
        let mut x = -(PI * i as f64 / p as f64).cos();
        for _ in 0..100 {
            let (pv, dp) = legendre(p, x);
            // (1-x^2) P'' = 2x P' - p(p+1) P
            let d2p = (2.0 * x * dp - (p * (p + 1)) as f64 * pv) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    let weights = nodes
        .iter()
        .map(|&x| {
            let (pv, _) = legendre(p, x);
            2.0 / ((p * (p + 1)) as f64 * pv * pv)
        })
        .collect();
    Rule1d { nodes, weights }
}

type Cache = Mutex<HashMap<(bool, usize), &'static Rule1d>>;

fn cached(lobatto: bool, n: usize) -> &'static Rule1d {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry((lobatto, n)).or_insert_with(|| {
        let rule = if lobatto { compute_gauss_lobatto(n) } else { compute_gauss_legendre(n) };
        Box::leak(Box::new(rule))
    })
}

/// n-point Gauss–Legendre rule (exact for degree 2n - 1).
pub fn gauss_legendre(n: usize) -> &'static Rule1d {
    cached(false, n)
}

/// n-point Gauss–Lobatto–Legendre rule including both endpoints.
pub fn gauss_lobatto(n: usize) -> &'static Rule1d {
    cached(true, n)
}

/// Integrate `f` over [a, b] with an n-point Gauss rule.
pub fn integrate(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = gauss_legendre(n);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}
