use faer::linalg::solvers::Solve;
use faer::sparse::SparseColMat;
use faer::{Mat, Side};

use super::{order_map_dump, DiscretizationConfig, LinearSolver, LinearSystem, SolverError};

fn matvec(a: &SparseColMat<usize, f64>, x: &Mat<f64>) -> Mat<f64> {
    let (cp, ri, val) = (a.symbolic().col_ptr(), a.symbolic().row_idx(), a.val());
    let mut y = Mat::<f64>::zeros(a.nrows(), x.ncols());
    for c in 0..x.ncols() {
        for j in 0..a.ncols() {
            let xj = x[(j, c)];
            for k in cp[j]..cp[j + 1] {
                y[(ri[k], c)] += val[k] * xj;
            }
        }
    }
    y
}

fn column_norm(m: &Mat<f64>, c: usize) -> f64 {
    (0..m.nrows()).map(|i| m[(i, c)] * m[(i, c)]).sum::<f64>().sqrt()
}

/// Largest relative residual |b - A x| / |b| over the columns.
fn relative_residual(a: &SparseColMat<usize, f64>, x: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let r = b - matvec(a, x);
    (0..b.ncols())
        .map(|c| {
            let nb = column_norm(b, c);
            let nr = column_norm(&r, c);
            if nb > 0.0 { nr / nb } else { nr }
        })
        .fold(0.0, f64::max)
}

pub(super) fn solve(system: &LinearSystem, config: &DiscretizationConfig) -> Result<(Mat<f64>, f64, Option<usize>), SolverError> {
    let a = &system.matrix;
    let b = &system.rhs;
    if a.nrows() == 0 {
        return Ok((Mat::zeros(0, b.ncols()), 0.0, None));
    }
    let singular = |reason: String| SolverError::Singular { reason, orders: order_map_dump(&config.orders) };
    let (x, iterations) = match config.linear_solver {
        LinearSolver::Direct => {
            let x = match a.sp_cholesky(Side::Lower) {
                Ok(llt) => {
                    let mut x = llt.solve(b);
                    let r = b - matvec(a, &x);
                    x += llt.solve(&r);
                    x
                }
                Err(err) => {
                    log::warn!("Cholesky factorization failed ({err:?}); falling back to LU");
                    let lu = a.sp_lu().map_err(|e| singular(format!("{e:?}")))?;
                    let mut x = lu.solve(b);
                    let r = b - matvec(a, &x);
                    x += lu.solve(&r);
                    x
                }
            };
            (x, None)
        }
        LinearSolver::Iterative => {
            let (x, it) = jacobi_cg(a, b, config.tolerance * 1e-2, 20 * a.nrows() + 100);
            (x, Some(it))
        }
    };
    if x.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return Err(singular("non-finite solution".into()));
    }
    let residual = relative_residual(a, &x, b);
    if residual > config.tolerance {
        return Err(SolverError::Residual { residual, tolerance: config.tolerance });
    }
    Ok((x, residual, iterations))
}

/// Conjugate gradients with a diagonal preconditioner, column by column.
fn jacobi_cg(a: &SparseColMat<usize, f64>, b: &Mat<f64>, tol: f64, max_iter: usize) -> (Mat<f64>, usize) {
    let n = a.nrows();
    let mut diag = vec![1.0; n];
    let (cp, ri, val) = (a.symbolic().col_ptr(), a.symbolic().row_idx(), a.val());
    for j in 0..n {
        for k in cp[j]..cp[j + 1] {
            if ri[k] == j && val[k] != 0.0 {
                diag[j] = val[k];
            }
        }
    }
    let mut x = Mat::<f64>::zeros(n, b.ncols());
    let mut total = 0;
    for c in 0..b.ncols() {
        let bnorm = column_norm(b, c);
        if bnorm == 0.0 {
            continue;
        }
        let mut r = Mat::<f64>::from_fn(n, 1, |i, _| b[(i, c)]);
        let mut z = Mat::<f64>::from_fn(n, 1, |i, _| r[(i, 0)] / diag[i]);
        let mut p = z.clone();
        let mut rz: f64 = (0..n).map(|i| r[(i, 0)] * z[(i, 0)]).sum();
        for it in 0..max_iter {
            let ap = matvec(a, &p);
            let pap: f64 = (0..n).map(|i| p[(i, 0)] * ap[(i, 0)]).sum();
            let alpha = rz / pap;
            for i in 0..n {
                x[(i, c)] += alpha * p[(i, 0)];
                r[(i, 0)] -= alpha * ap[(i, 0)];
            }
            total = total.max(it + 1);
            if column_norm(&r, 0) <= tol * bnorm {
                break;
            }
            for i in 0..n {
                z[(i, 0)] = r[(i, 0)] / diag[i];
            }
            let rz_new: f64 = (0..n).map(|i| r[(i, 0)] * z[(i, 0)]).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[(i, 0)] = z[(i, 0)] + beta * p[(i, 0)];
            }
        }
    }
    (x, total)
}
