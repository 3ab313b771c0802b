use std::collections::HashMap;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::DMatrix;
use rayon::prelude::*;

use super::boundary::{edge_point, eval_data};
use super::{DirichletFn, DiscretizationConfig, Scheme, SolverError};
use crate::geometry::Vec2;
use crate::quadrature::gauss_legendre;
use crate::sem::basis::{basis_table, curved_points, edge_mode_sign, eval_modes, modes, n_modes, straight_points, Mode, EDGE_VERTICES, REF_VERTICES};
use crate::sem::{BoundaryEdge, SemError, TriMesh};

/// Assembled system for the free degrees of freedom, with one right-hand
/// side column per field component.
pub struct LinearSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Mat<f64>,
    layout: Layout,
}

struct Layout {
    orders: Vec<usize>,
    /// Per element and local mode: global dof and orientation sign.
    local: Vec<Vec<Option<(usize, f64)>>>,
    free: Vec<Option<usize>>,
    fixed: Vec<[f64; 2]>,
    n_free: usize,
}

impl LinearSystem {
    pub fn n_free(&self) -> usize {
        self.layout.n_free
    }

    pub fn nonzeros(&self) -> usize {
        self.matrix.compute_nnz()
    }

    /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
    pub fn symmetry_error(&self) -> f64 {
        let a = self.matrix.to_dense();
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                diff = diff.max((a[(i, j)] - a[(j, i)]).abs());
                scale = scale.max(a[(i, j)].abs());
            }
        }
        diff / scale.max(f64::MIN_POSITIVE)
    }

    /// Element-local coefficient vectors from a solution of the free system.
    pub fn expand(&self, x: &Mat<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let l = &self.layout;
        let value = |g: usize, c: usize| match l.free[g] {
            Some(f) => x[(f, c)],
            None => l.fixed[g][c],
        };
        let mut u = Vec::with_capacity(l.local.len());
        let mut v = Vec::with_capacity(l.local.len());
        for map in &l.local {
            u.push(map.iter().map(|m| m.map_or(0.0, |(g, s)| s * value(g, 0))).collect());
            v.push(map.iter().map(|m| m.map_or(0.0, |(g, s)| s * value(g, 1))).collect());
        }
        debug_assert_eq!(u.len(), l.orders.len());
        (u, v)
    }
}

/// Geometric data at one quadrature point: weight times |J|, and J^{-T}.
fn physical_gradients(mesh: &TriMesh, e: usize, xi: [f64; 2], grads: &[[f64; 2]]) -> (f64, Vec<Vec2>) {
    let (_, jac) = mesh.map(e, xi);
    let det = jac.determinant();
    let jit = jac.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros).transpose();
    (det, grads.iter().map(|g| jit * Vec2::new(g[0], g[1])).collect())
}

fn element_points(mesh: &TriMesh, e: usize, p: usize) -> usize {
    if mesh.is_curved(e) {
        curved_points(p)
    } else {
        straight_points(p)
    }
}

/// Element stiffness matrix of the order-`p` basis.
pub(crate) fn element_stiffness(mesh: &TriMesh, e: usize, p: usize) -> DMatrix<f64> {
    let t = basis_table(p, element_points(mesh, e, p));
    let n = t.values[0].len();
    let mut k = DMatrix::zeros(n, n);
    for (q, xi) in t.rule.points.iter().enumerate() {
        let (det, g) = physical_gradients(mesh, e, *xi, &t.grads[q]);
        let w = t.rule.weights[q] * det;
        for i in 0..n {
            for j in i..n {
                k[(i, j)] += w * g[i].dot(&g[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            k[(i, j)] = k[(j, i)];
        }
    }
    k
}

fn boundary_lookup(mesh: &TriMesh) -> HashMap<(usize, usize), BoundaryEdge> {
    mesh.boundary_edges().iter().map(|b| ((b.elem, b.local_edge), *b)).collect()
}

pub fn assemble(mesh: &TriMesh, config: &DiscretizationConfig, data: &DirichletFn) -> Result<LinearSystem, SolverError> {
    config.validate(mesh)?;
    match config.scheme {
        Scheme::Cg => assemble_cg(mesh, config, data),
        Scheme::Dg => assemble_dg(mesh, config, data),
    }
}

fn local_matrices(mesh: &TriMesh, orders: &[usize]) -> Vec<DMatrix<f64>> {
    (0..mesh.n_elements()).into_par_iter().map(|e| element_stiffness(mesh, e, orders[e])).collect()
}

fn build_matrix(n: usize, triplets: &[Triplet<usize, usize, f64>], orders: &[usize]) -> Result<SparseColMat<usize, f64>, SolverError> {
    SparseColMat::try_new_from_triplets(n, n, triplets).map_err(|e| SolverError::Singular {
        reason: format!("sparse matrix construction failed: {e:?}"),
        orders: super::order_map_dump(orders),
    })
}

/// Continuous Galerkin with the minimum rule on shared edges and Dirichlet
/// values from vertex interpolation plus 1D L2 projection along each edge.
fn assemble_cg(mesh: &TriMesh, config: &DiscretizationConfig, data: &DirichletFn) -> Result<LinearSystem, SolverError> {
    let orders = &config.orders;
    let nv = mesh.vertices().len();
    let edge_order: Vec<usize> = (0..mesh.edges().len())
        .map(|id| mesh.edge_elements(id).iter().map(|&(e, _)| orders[e]).min().unwrap_or(1))
        .collect();
    let mut edge_base = Vec::with_capacity(edge_order.len());
    let mut next = nv;
    for &p in &edge_order {
        edge_base.push(next);
        next += p.saturating_sub(1);
    }
    let mut local = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let tri = mesh.triangles()[e];
        let ids = mesh.element_edges(e);
        let map: Vec<Option<(usize, f64)>> = modes(orders[e])
            .into_iter()
            .map(|m| match m {
                Mode::Vertex(i) => Some((tri[i], 1.0)),
                Mode::Edge { edge, degree } => (degree <= edge_order[ids[edge]])
                    .then(|| (edge_base[ids[edge]] + degree - 2, edge_mode_sign(degree, mesh.edge_reversed(e, edge)))),
                Mode::Interior { .. } => {
                    next += 1;
                    Some((next - 1, 1.0))
                }
            })
            .collect();
        local.push(map);
    }
    let n_global = next;

    let mut is_fixed = vec![false; n_global];
    let mut fixed = vec![[0.0; 2]; n_global];
    for be in mesh.boundary_edges() {
        let tri = mesh.triangles()[be.elem];
        let (a, b) = EDGE_VERTICES[be.local_edge];
        for (lv, s) in [(a, -1.0), (b, 1.0)] {
            let g = tri[lv];
            if !is_fixed[g] {
                let (x, _) = mesh.map(be.elem, edge_point(be.local_edge, s));
                let (u, v) = eval_data(data, be, s, x);
                fixed[g] = [u, v];
                is_fixed[g] = true;
            }
        }
    }
    for be in mesh.boundary_edges() {
        let id = mesh.element_edges(be.elem)[be.local_edge];
        let p = edge_order[id];
        if p < 2 {
            continue;
        }
        let tri = mesh.triangles()[be.elem];
        let (a, b) = EDGE_VERTICES[be.local_edge];
        let coeffs = project_edge_data(mesh, be, p, fixed[tri[a]], fixed[tri[b]], data)?;
        let reversed = mesh.edge_reversed(be.elem, be.local_edge);
        for (d, c) in coeffs.iter().enumerate() {
            let degree = d + 2;
            let g = edge_base[id] + d;
            let s = edge_mode_sign(degree, reversed);
            fixed[g] = [s * c[0], s * c[1]];
            is_fixed[g] = true;
        }
    }
    let mut free = vec![None; n_global];
    let mut n_free = 0;
    for g in 0..n_global {
        if !is_fixed[g] {
            free[g] = Some(n_free);
            n_free += 1;
        }
    }

    let mats = local_matrices(mesh, orders);
    let mut triplets = Vec::new();
    let mut rhs = Mat::<f64>::zeros(n_free, 2);
    for (e, k) in mats.iter().enumerate() {
        let map = &local[e];
        for (i, mi) in map.iter().enumerate() {
            let Some((gi, si)) = *mi else { continue };
            let Some(fi) = free[gi] else { continue };
            for (j, mj) in map.iter().enumerate() {
                let Some((gj, sj)) = *mj else { continue };
                let val = si * sj * k[(i, j)];
                match free[gj] {
                    Some(fj) => triplets.push(Triplet::new(fi, fj, val)),
                    None => {
                        rhs[(fi, 0)] -= val * fixed[gj][0];
                        rhs[(fi, 1)] -= val * fixed[gj][1];
                    }
                }
            }
        }
    }
    let matrix = build_matrix(n_free, &triplets, orders)?;
    Ok(LinearSystem { matrix, rhs, layout: Layout { orders: orders.clone(), local, free, fixed, n_free } })
}

/// L2 projection along a boundary edge of the data minus its linear
/// interpolant onto the local edge modes of degree 2..=p.
fn project_edge_data(
    mesh: &TriMesh,
    be: &BoundaryEdge,
    p: usize,
    ga: [f64; 2],
    gb: [f64; 2],
    data: &DirichletFn,
) -> Result<Vec<[f64; 2]>, SolverError> {
    let all = modes(p);
    let idx: Vec<usize> = (2..=p)
        .map(|d| all.iter().position(|m| *m == Mode::Edge { edge: be.local_edge, degree: d }).unwrap())
        .collect();
    let (a, b) = EDGE_VERTICES[be.local_edge];
    let rule = gauss_legendre(p + 4);
    let n = idx.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let xi = edge_point(be.local_edge, s);
        let phi = eval_modes(p, xi);
        let (x, _) = mesh.map(be.elem, xi);
        let (u, v) = eval_data(data, be, s, x);
        let r = [u - ga[0] * phi[a].v - gb[0] * phi[b].v, v - ga[1] * phi[a].v - gb[1] * phi[b].v];
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += w * phi[idx[i]].v * phi[idx[j]].v;
            }
            rhs[(i, 0)] += w * phi[idx[i]].v * r[0];
            rhs[(i, 1)] += w * phi[idx[i]].v * r[1];
        }
    }
    let chol = m.cholesky().ok_or(SolverError::Sem(SemError::SingularMass))?;
    let c = chol.solve(&rhs);
    Ok((0..n).map(|i| [c[(i, 0)], c[(i, 1)]]).collect())
}

/// Trace data of one side of a face at a set of edge coordinates.
struct Side {
    offset: usize,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<Vec2>>,
}

fn side_data(mesh: &TriMesh, e: usize, k: usize, p: usize, offset: usize, coords: &[f64]) -> Side {
    let mut values = Vec::with_capacity(coords.len());
    let mut grads = Vec::with_capacity(coords.len());
    for &s in coords {
        let xi = edge_point(k, s);
        let phi = eval_modes(p, xi);
        let g: Vec<[f64; 2]> = phi.iter().map(|d| d.d).collect();
        let (_, pg) = physical_gradients(mesh, e, xi, &g);
        values.push(phi.iter().map(|d| d.v).collect());
        grads.push(pg);
    }
    Side { offset, values, grads }
}

/// Outward unit normal and arc-length factor of local edge `k` at `s`.
fn edge_frame(mesh: &TriMesh, e: usize, k: usize, s: f64) -> (Vec2, f64) {
    let (a, b) = EDGE_VERTICES[k];
    let (ra, rb) = (REF_VERTICES[a], REF_VERTICES[b]);
    let dxi = Vec2::new((rb[0] - ra[0]) / 2.0, (rb[1] - ra[1]) / 2.0);
    let (_, jac) = mesh.map(e, edge_point(k, s));
    let t = jac * dxi;
    let len = t.norm();
    (Vec2::new(t.y, -t.x) / len, len)
}

/// Symmetric interior penalty DG with Dirichlet data imposed through the
/// boundary fluxes.
fn assemble_dg(mesh: &TriMesh, config: &DiscretizationConfig, data: &DirichletFn) -> Result<LinearSystem, SolverError> {
    let orders = &config.orders;
    let mut offsets = Vec::with_capacity(mesh.n_elements());
    let mut n = 0;
    for &p in orders {
        offsets.push(n);
        n += n_modes(p);
    }
    let mats = local_matrices(mesh, orders);
    let mut triplets = Vec::new();
    for (e, k) in mats.iter().enumerate() {
        for j in 0..k.ncols() {
            for i in 0..k.nrows() {
                triplets.push(Triplet::new(offsets[e] + i, offsets[e] + j, k[(i, j)]));
            }
        }
    }
    let lookup = boundary_lookup(mesh);
    let mut rhs = Mat::<f64>::zeros(n, 2);
    let faces: Vec<(Vec<Triplet<usize, usize, f64>>, Vec<(usize, [f64; 2])>)> = (0..mesh.edges().len())
        .into_par_iter()
        .map(|id| dg_face(mesh, id, orders, &offsets, config.penalty, &lookup, data))
        .collect();
    for (t, r) in faces {
        triplets.extend(t);
        for (i, val) in r {
            rhs[(i, 0)] += val[0];
            rhs[(i, 1)] += val[1];
        }
    }
    let matrix = build_matrix(n, &triplets, orders)?;
    let local = orders
        .iter()
        .zip(&offsets)
        .map(|(&p, &o)| (0..modes(p).len()).map(|m| Some((o + m, 1.0))).collect())
        .collect();
    Ok(LinearSystem {
        matrix,
        rhs,
        layout: Layout { orders: orders.clone(), local, free: (0..n).map(Some).collect(), fixed: vec![[0.0; 2]; n], n_free: n },
    })
}

#[allow(clippy::type_complexity)]
fn dg_face(
    mesh: &TriMesh,
    id: usize,
    orders: &[usize],
    offsets: &[usize],
    sigma0: f64,
    lookup: &HashMap<(usize, usize), BoundaryEdge>,
    data: &DirichletFn,
) -> (Vec<Triplet<usize, usize, f64>>, Vec<(usize, [f64; 2])>) {
    let adj = mesh.edge_elements(id);
    let pmax = adj.iter().map(|&(e, _)| orders[e]).max().unwrap();
    let (e1, k1) = adj[0];
    let boundary = adj.len() == 1;
    let rule = gauss_legendre(if boundary { pmax + 4 } else { pmax + 2 });
    let frames: Vec<(Vec2, f64)> = rule.nodes.iter().map(|&s| edge_frame(mesh, e1, k1, s)).collect();
    let length: f64 = rule.weights.iter().zip(&frames).map(|(w, f)| w * f.1).sum();
    let sigma = sigma0 * (pmax * pmax) as f64 / length;
    let mut sides = vec![side_data(mesh, e1, k1, orders[e1], offsets[e1], &rule.nodes)];
    let mut signs = vec![1.0];
    if let Some(&(e2, k2)) = adj.get(1) {
        let flipped: Vec<f64> = rule.nodes.iter().map(|s| -s).collect();
        sides.push(side_data(mesh, e2, k2, orders[e2], offsets[e2], &flipped));
        signs.push(-1.0);
    }
    let avg = if boundary { 1.0 } else { 0.5 };
    let mut triplets = Vec::new();
    for (a, sa) in sides.iter().enumerate() {
        for (b, sb) in sides.iter().enumerate() {
            let (na, nb) = (sa.values[0].len(), sb.values[0].len());
            let mut block = vec![0.0; na * nb];
            for (q, &w) in rule.weights.iter().enumerate() {
                let (normal, ds) = frames[q];
                let wq = w * ds;
                for i in 0..na {
                    let (phi_i, dn_i) = (sa.values[q][i], sa.grads[q][i].dot(&normal));
                    for j in 0..nb {
                        let (phi_j, dn_j) = (sb.values[q][j], sb.grads[q][j].dot(&normal));
                        block[i * nb + j] += wq
                            * (-avg * dn_j * signs[a] * phi_i - avg * dn_i * signs[b] * phi_j
                                + sigma * signs[a] * signs[b] * phi_i * phi_j);
                    }
                }
            }
            for i in 0..na {
                for j in 0..nb {
                    triplets.push(Triplet::new(sa.offset + i, sb.offset + j, block[i * nb + j]));
                }
            }
        }
    }
    let mut rhs = Vec::new();
    if boundary {
        let be = lookup[&(e1, k1)];
        let s = &sides[0];
        let mut acc = vec![[0.0; 2]; s.values[0].len()];
        for (q, (&w, &sq)) in rule.weights.iter().zip(&rule.nodes).enumerate() {
            let (normal, ds) = frames[q];
            let (x, _) = mesh.map(e1, edge_point(k1, sq));
            let (gu, gv) = eval_data(data, &be, sq, x);
            for (i, a) in acc.iter_mut().enumerate() {
                let f = w * ds * (sigma * s.values[q][i] - s.grads[q][i].dot(&normal));
                a[0] += f * gu;
                a[1] += f * gv;
            }
        }
        rhs = acc.into_iter().enumerate().map(|(i, a)| (s.offset + i, a)).collect();
    }
    (triplets, rhs)
}
