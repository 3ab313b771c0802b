//! 1D Lagrange interpolation on Gauss–Lobatto nodes of [0, 1].

use crate::quadrature::gauss_lobatto;

#[derive(Clone, Debug)]
pub struct Lagrange1d {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Lagrange1d {
    /// Basis of degree `order` on the order + 1 Gauss–Lobatto nodes mapped
    /// to [0, 1]; the end nodes are exactly 0 and 1.
    pub fn gll(order: usize) -> Self {
        let rule = gauss_lobatto(order + 1);
        let mut nodes: Vec<f64> = rule.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        nodes.sort_by(f64::total_cmp);
        nodes[0] = 0.0;
        nodes[order] = 1.0;
        Self::new(nodes)
    }

    pub fn new(nodes: Vec<f64>) -> Self {
        let weights = (0..nodes.len())
            .map(|j| 1.0 / (0..nodes.len()).filter(|&k| k != j).map(|k| nodes[j] - nodes[k]).product::<f64>())
            .collect();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Basis values at `x`; exactly the unit vector at a node.
    pub fn values(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| (0..n).filter(|&k| k != j).map(|k| (x - self.nodes[k]) / (self.nodes[j] - self.nodes[k])).product())
            .collect()
    }

    /// Basis derivatives at `x`.
    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&m| m != j)
                    .map(|m| {
                        (0..n).filter(|&k| k != j && k != m).map(|k| x - self.nodes[k]).product::<f64>()
                    })
                    .sum::<f64>()
                    * self.weights[j]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nodes_are_symmetric_with_exact_ends() {
        for q in 1..8 {
            let l = Lagrange1d::gll(q);
            assert_eq!(l.nodes[0], 0.0);
            assert_eq!(l.nodes[q], 1.0);
            for i in 0..=q {
                assert!((l.nodes[i] + l.nodes[q - i] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cardinal_at_nodes() {
        let l = Lagrange1d::gll(5);
        for (i, &x) in l.nodes.iter().enumerate() {
            let v = l.values(x);
            for (j, vj) in v.iter().enumerate() {
                assert_eq!(*vj, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    proptest! {
        #[test]
        fn reproduces_polynomials(q in 1usize..8, x in 0.0f64..1.0, c in -3.0f64..3.0) {
            let l = Lagrange1d::gll(q);
            let f = |t: f64| c * t.powi(q as i32) + 0.5 * t - 1.0;
            let df = |t: f64| c * q as f64 * t.powi(q as i32 - 1) + 0.5;
            let v: f64 = l.values(x).iter().zip(&l.nodes).map(|(b, &t)| b * f(t)).sum();
            let d: f64 = l.derivatives(x).iter().zip(&l.nodes).map(|(b, &t)| b * f(t)).sum();
            prop_assert!((v - f(x)).abs() < 1e-11);
            prop_assert!((d - df(x)).abs() < 1e-9);
        }
    }
}
