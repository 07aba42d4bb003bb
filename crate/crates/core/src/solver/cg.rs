use std::time::Instant;

use super::assemble::LinearSystem;
use super::currents::currents_from;
use super::{GridSolution, SolveStats, SolverError};

// restarts allowed when the recursive residual drifts from the true one
const MAX_RESTARTS: usize = 8;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradients, started from `vdd` everywhere.
///
/// Convergence is declared on the recomputed residual `‖b − A·x‖/‖b‖`, never
/// on the recursive one alone.
pub fn solve(system: &LinearSystem, tol: f64, max_iter: usize) -> Result<GridSolution, SolverError> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(SolverError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let started = Instant::now();
    let n = system.dim();
    let a = &system.matrix;
    let b = &system.rhs;
    let b_norm = norm(b);

    let mut x = vec![system.initial_guess; n];
    let mut iterations = 0;
    let mut residual = 0.0;
    if n > 0 && b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
    } else if n > 0 {
        let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut ap = vec![0.0; n];
        let mut restarts = 0;
        'outer: loop {
            a.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            residual = norm(&r) / b_norm;
            if residual <= tol {
                break;
            }
            while iterations < max_iter {
                a.mul_vec(&p, &mut ap);
                let pap = dot(&p, &ap);
                if !(pap > 0.0) {
                    return Err(SolverError::SingularSystem(format!(
                        "non-positive curvature {pap:e} at iteration {iterations}"
                    )));
                }
                let alpha = rz / pap;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * ap[i];
                    z[i] = r[i] * inv_diag[i];
                }
                iterations += 1;
                if norm(&r) / b_norm <= tol {
                    residual = system.relative_residual(&x);
                    if residual <= tol {
                        break 'outer;
                    }
                    restarts += 1;
                    if restarts > MAX_RESTARTS {
                        break 'outer;
                    }
                    continue 'outer;
                }
                let rz_next = dot(&r, &z);
                let beta = rz_next / rz;
                rz = rz_next;
                for i in 0..n {
                    p[i] = z[i] + beta * p[i];
                }
            }
            residual = system.relative_residual(&x);
            break;
        }
        if residual > tol {
            return Err(SolverError::NoConvergence { iterations, residual });
        }
    }

    let voltages = system.node_voltages(&x);
    let topo = &system.topology;
    let branch_currents = currents_from(&topo.branches, &topo.loads, &topo.anchors, &voltages);
    Ok(GridSolution {
        voltages,
        branch_currents,
        stats: SolveStats {
            iterations,
            relative_residual: residual,
            wall_time: started.elapsed().as_secs_f64(),
        },
    })
}
