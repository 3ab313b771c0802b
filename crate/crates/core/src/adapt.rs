//! p-adaptive solve loop driven by the modal energy sensor.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::Domain;
use crate::sem::basis::project_to_order;
use crate::sem::{FieldSolution, TriMesh};
use crate::solver::{self, DiscretizationConfig, SolverError};

#[derive(Debug, thiserror::Error)]
pub enum AdaptError {
    #[error("invalid adaptation settings: {0}")]
    InvalidConfig(String),
    #[error("solve failed in adaptation iteration {iteration}: {source}")]
    Solver {
        iteration: usize,
        #[source]
        source: SolverError,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorComponent {
    #[default]
    U,
    V,
    Max,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptConfig {
    pub eps_upper: f64,
    pub eps_lower: f64,
    pub p_min: usize,
    pub p_max: usize,
    pub initial_order: usize,
    /// Defaults to 2 (p_max - p_min) + 4 when absent.
    pub max_iterations: Option<usize>,
    pub component: SensorComponent,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            eps_upper: 1e-6,
            eps_lower: 1e-8,
            p_min: 2,
            p_max: 9,
            initial_order: 3,
            max_iterations: None,
            component: SensorComponent::U,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<(), AdaptError> {
        if !(0.0 <= self.eps_lower && self.eps_lower < self.eps_upper) {
            return Err(AdaptError::InvalidConfig(format!(
                "need 0 <= eps_lower < eps_upper, got {} and {}",
                self.eps_lower, self.eps_upper
            )));
        }
        if !(1 <= self.p_min && self.p_min <= self.p_max) {
            return Err(AdaptError::InvalidConfig(format!(
                "need 1 <= p_min <= p_max, got {} and {}",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iterations.unwrap_or(2 * (self.p_max - self.p_min) + 4)
    }
}

/// Relative energy of the highest modes of one coefficient vector.
fn modal_ratio(mesh: &TriMesh, e: usize, p: usize, coeffs: &[f64]) -> f64 {
    if p < 2 {
        return 0.0;
    }
    let m = crate::sem::element_mass(mesh, e, p);
    let c = DVector::from_column_slice(coeffs);
    let total = (c.transpose() * &m * &c)[0].max(0.0);
    let tau_zero = 1e-12 * mesh.element_area(e);
    if total.sqrt() < tau_zero {
        return 0.0;
    }
    let mut low = project_to_order(coeffs, p, p - 1).expect("order p - 1 exists");
    low.resize(coeffs.len(), 0.0);
    let d = c - DVector::from_vec(low);
    ((d.transpose() * &m * &d)[0] / total).clamp(0.0, 1.0)
}

/// Sensor S_e of one element.
pub fn sensor(field: &FieldSolution, e: usize, component: SensorComponent) -> f64 {
    let mesh = field.mesh();
    let p = field.order(e);
    let su = || modal_ratio(mesh, e, p, field.coeffs_u(e));
    let sv = || modal_ratio(mesh, e, p, field.coeffs_v(e));
    match component {
        SensorComponent::U => su(),
        SensorComponent::V => sv(),
        SensorComponent::Max => su().max(sv()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub raised: usize,
    pub lowered: usize,
    pub max_sensor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AdaptLog {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl AdaptLog {
    /// Line-oriented text: iteration, raised, lowered, max sensor.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# iteration raised lowered max_sensor\n");
        for r in &self.iterations {
            writeln!(s, "{} {} {} {:e}", r.iteration, r.raised, r.lowered, r.max_sensor).unwrap();
        }
        writeln!(s, "# converged {}", self.converged).unwrap();
        s
    }
}

pub struct AdaptResult {
    pub field: FieldSolution,
    pub orders: Vec<usize>,
    pub log: AdaptLog,
}

/// Order updates of one sweep: +1 above the upper threshold, -1 below the
/// lower one. Elements whose order has been raised are never lowered again.
pub fn update_orders(orders: &mut [usize], raised_once: &mut [bool], sensors: &[f64], cfg: &AdaptConfig) -> (usize, usize) {
    let (mut raised, mut lowered) = (0, 0);
    for ((p, locked), &s) in orders.iter_mut().zip(raised_once.iter_mut()).zip(sensors) {
        if s > cfg.eps_upper && *p < cfg.p_max {
            *p += 1;
            *locked = true;
            raised += 1;
        } else if s < cfg.eps_lower && *p > cfg.p_min && !*locked {
            *p -= 1;
            lowered += 1;
        }
    }
    (raised, lowered)
}

/// Solve, evaluate sensors and adjust orders until no order changes or the
/// iteration cap is reached.
pub fn adapt_loop(
    domain: &Domain,
    mesh: &Arc<TriMesh>,
    cfg: &AdaptConfig,
    disc: &DiscretizationConfig,
) -> Result<AdaptResult, AdaptError> {
    cfg.validate()?;
    let cap = cfg.iteration_cap();
    let mut disc = disc.clone();
    disc.orders = vec![cfg.initial_order.clamp(cfg.p_min, cfg.p_max); mesh.n_elements()];
    let mut raised_once = vec![false; mesh.n_elements()];
    let mut iterations = Vec::new();
    for iteration in 1..=cap {
        let field = solver::solve(domain, mesh, &disc).map_err(|source| AdaptError::Solver { iteration, source })?;
        let sensors: Vec<f64> =
            (0..mesh.n_elements()).into_par_iter().map(|e| sensor(&field, e, cfg.component)).collect();
        let max_sensor = sensors.iter().copied().fold(0.0, f64::max);
        let (raised, lowered) = update_orders(&mut disc.orders, &mut raised_once, &sensors, cfg);
        log::info!("adapt iteration {iteration}: raised {raised}, lowered {lowered}, max sensor {max_sensor:e}");
        iterations.push(IterationRecord { iteration, raised, lowered, max_sensor });
        if raised == 0 && lowered == 0 {
            return Ok(AdaptResult { orders: disc.orders.clone(), field, log: AdaptLog { iterations, converged: true } });
        }
    }
    log::warn!("adaptation reached the iteration cap of {cap}");
    let field = solver::solve(domain, mesh, &disc).map_err(|source| AdaptError::Solver { iteration: cap + 1, source })?;
    Ok(AdaptResult { orders: disc.orders.clone(), field, log: AdaptLog { iterations, converged: false } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fixtures, Vec2};
    use crate::sem::basis::{eval_modes, n_modes, tri_rule};
    use crate::sem::mesher;
    use crate::solver::Scheme;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(mesh: Arc<TriMesh>, p: usize, seed: u64) -> FieldSolution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mesh.n_elements();
        let mut gen = || (0..n).map(|_| (0..n_modes(p)).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let u = gen();
        let v = gen();
        FieldSolution::new(mesh, vec![p; n], u, v).unwrap()
    }

    #[test]
    fn sensor_vanishes_for_lower_degree_data() {
        let d = fixtures::half_disc();
        let mesh = Arc::new(mesher::triangulate(&d, 0.4).unwrap());
        let n = mesh.n_elements();
        let f = FieldSolution::project(mesh.clone(), vec![4; n], |x: Vec2| (x.x * x.x * x.y, 1.0)).unwrap();
        for e in (0..n).filter(|&e| !mesh.is_curved(e)) {
            assert!(sensor(&f, e, SensorComponent::U) < 1e-20);
            assert!(sensor(&f, e, SensorComponent::V) < 1e-20);
        }
        let c = FieldSolution::project(mesh.clone(), vec![5; n], |_| (1.0, 1.0)).unwrap();
        for e in 0..n {
            assert!(sensor(&c, e, SensorComponent::Max) < 1e-20);
        }
        let one = FieldSolution::project(mesh.clone(), vec![1; n], |x: Vec2| (x.x, x.y)).unwrap();
        assert_eq!(sensor(&one, 0, SensorComponent::Max), 0.0);
    }

    #[test]
    fn sensor_matches_dense_quadrature() {
        // Oracle: both norms integrated pointwise on a dense rule.
        let d = fixtures::half_disc();
        let mesh = Arc::new(mesher::triangulate(&d, 0.4).unwrap());
        let p = 6;
        let f = random_field(mesh.clone(), p, 3);
        let rule = tri_rule(20);
        for e in [0, mesh.n_elements() / 2, mesh.n_elements() - 1] {
            let c = f.coeffs_u(e);
            let low = project_to_order(c, p, p - 1).unwrap();
            let (mut num, mut den) = (0.0, 0.0);
            for (xi, w) in rule.points.iter().zip(&rule.weights) {
                let det = mesh.map_to_physical(e, *xi).unwrap().1.determinant();
                let phi = eval_modes(p, *xi);
                let full: f64 = c.iter().zip(&phi).map(|(a, b)| a * b.v).sum();
                let part: f64 = low.iter().zip(&phi).map(|(a, b)| a * b.v).sum();
                num += w * det * (full - part).powi(2);
                den += w * det * full * full;
            }
            assert!((sensor(&f, e, SensorComponent::U) - num / den).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sensor_is_scale_invariant(seed in 0u64..1000, scale in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6]) {
            let d = fixtures::unit_square();
            let mesh = Arc::new(mesher::structured(&d, "square", 1).unwrap());
            let f = random_field(mesh.clone(), 5, seed);
            let scaled = FieldSolution::new(
                mesh.clone(),
                f.orders().to_vec(),
                (0..mesh.n_elements()).map(|e| f.coeffs_u(e).iter().map(|c| c * scale).collect()).collect(),
                (0..mesh.n_elements()).map(|e| f.coeffs_v(e).to_vec()).collect(),
            ).unwrap();
            for e in 0..mesh.n_elements() {
                let a = sensor(&f, e, SensorComponent::U);
                let b = sensor(&scaled, e, SensorComponent::U);
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn updates_stay_in_bounds_and_step_by_one(
            orders in proptest::collection::vec(2usize..=9, 1..40),
            sensors in proptest::collection::vec(proptest::collection::vec(0.0f64..1e-4, 40), 1..6),
        ) {
            let cfg = AdaptConfig::default();
            let mut current = orders.clone();
            let mut locked = vec![false; orders.len()];
            for sweep in &sensors {
                let before = current.clone();
                let was_locked = locked.clone();
                update_orders(&mut current, &mut locked, sweep, &cfg);
                for i in 0..before.len() {
                    let (a, b, s) = (before[i], current[i], sweep[i]);
                    prop_assert!(cfg.p_min <= b && b <= cfg.p_max);
                    prop_assert!(a.abs_diff(b) <= 1);
                    if s > cfg.eps_upper { prop_assert!(b == (a + 1).min(cfg.p_max)); }
                    if s < cfg.eps_lower && !was_locked[i] { prop_assert!(b == (a - 1).max(cfg.p_min)); }
                    if was_locked[i] { prop_assert!(b >= a); }
                }
            }
        }
    }

    #[test]
    fn rectangle_drops_to_minimum_order() {
        let d = fixtures::unit_square();
        let mesh = Arc::new(mesher::structured(&d, "square", 3).unwrap());
        let cfg = AdaptConfig::default();
        let disc = DiscretizationConfig::uniform(Scheme::Cg, mesh.n_elements(), 1);
        let r = adapt_loop(&d, &mesh, &cfg, &disc).unwrap();
        assert!(r.log.converged);
        assert_eq!(r.log.iterations[0].lowered, mesh.n_elements());
        assert_eq!(r.log.iterations[0].raised, 0);
        assert!(r.orders.iter().all(|&p| p == cfg.p_min));
        assert_eq!(r.log.iterations.len(), 2);
        assert_eq!(r.log.iterations[1].lowered + r.log.iterations[1].raised, 0);
    }

    fn boundary_elements(mesh: &TriMesh) -> Vec<bool> {
        let mut b = vec![false; mesh.n_elements()];
        for be in mesh.boundary_edges() {
            b[be.elem] = true;
        }
        b
    }

    fn mean(xs: impl Iterator<Item = usize>) -> f64 {
        let v: Vec<usize> = xs.collect();
        v.iter().sum::<usize>() as f64 / v.len() as f64
    }

    #[test]
    fn half_disc_orders_concentrate_near_boundary() {
        let d = fixtures::half_disc();
        let mesh = Arc::new(mesher::structured(&d, "half_disc", 3).unwrap());
        let cfg = AdaptConfig::default();
        let disc = DiscretizationConfig::uniform(Scheme::Cg, mesh.n_elements(), 1);
        let r = adapt_loop(&d, &mesh, &cfg, &disc).unwrap();
        assert!(r.log.converged);
        for e in 0..mesh.n_elements() {
            assert!(sensor(&r.field, e, SensorComponent::U) <= cfg.eps_upper || r.orders[e] == cfg.p_max);
        }
        let orders = &r.orders;
        assert!(orders.iter().any(|&p| p != orders[0]), "order map is uniform");
        let near = boundary_elements(&mesh);
        let b = mean((0..orders.len()).filter(|&e| near[e]).map(|e| orders[e]));
        let i = mean((0..orders.len()).filter(|&e| !near[e]).map(|e| orders[e]));
        assert!(b > i, "boundary mean {b}, interior mean {i}");
        assert_eq!(r.field.orders(), &orders[..]);
        let again = adapt_loop(&d, &mesh, &cfg, &disc).unwrap();
        assert_eq!(again.orders, r.orders);
    }

    #[test]
    fn v_sensor_inflates_orders_on_cartesian_geometry() {
        let d = fixtures::naca0012_in_box();
        let mesh = Arc::new(mesher::triangulate(&d, 0.35).unwrap());
        let disc = DiscretizationConfig::uniform(Scheme::Dg, mesh.n_elements(), 1);
        let on_u = adapt_loop(&d, &mesh, &AdaptConfig::default(), &disc).unwrap();
        let cfg_v = AdaptConfig { component: SensorComponent::V, ..Default::default() };
        let on_v = adapt_loop(&d, &mesh, &cfg_v, &disc).unwrap();
        let mu = mean(on_u.orders.iter().copied());
        let mv = mean(on_v.orders.iter().copied());
        assert!(mv > mu, "v mean {mv}, u mean {mu}");
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let bad = AdaptConfig { eps_lower: 1e-3, eps_upper: 1e-4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AdaptConfig { p_min: 5, p_max: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(AdaptConfig::default().iteration_cap(), 18);
    }

    #[test]
    fn log_text_lists_iterations() {
        let log = AdaptLog {
            iterations: vec![IterationRecord { iteration: 1, raised: 2, lowered: 3, max_sensor: 0.5 }],
            converged: true,
        };
        assert!(log.to_text().contains("1 2 3 5e-1"));
    }
}
