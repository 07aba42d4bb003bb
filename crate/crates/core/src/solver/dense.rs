use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::assemble::LinearSystem;
use super::currents::currents_from;
use super::{GridSolution, SolveStats, SolverError};

/// Largest system the dense oracle accepts.
pub const DENSE_LIMIT: usize = 2000;

/// Dense Cholesky solve of the assembled system. Meant as a test oracle for
/// the iterative solver.
pub fn dense_solve_oracle(system: &LinearSystem) -> Result<GridSolution, SolverError> {
    let n = system.dim();
    if n > DENSE_LIMIT {
        return Err(SolverError::DimTooLarge { dim: n, limit: DENSE_LIMIT });
    }
    let started = Instant::now();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in system.matrix.row(i) {
            dense[(i, j)] = v;
        }
    }
    let x = if n == 0 {
        Vec::new()
    } else {
        let chol = dense
            .cholesky()
            .ok_or_else(|| SolverError::SingularSystem("matrix is not positive definite".into()))?;
        chol.solve(&DVector::from_column_slice(&system.rhs)).as_slice().to_vec()
    };
    let voltages = system.node_voltages(&x);
    let topo = &system.topology;
    let branch_currents = currents_from(&topo.branches, &topo.loads, &topo.anchors, &voltages);
    Ok(GridSolution {
        voltages,
        branch_currents,
        stats: SolveStats {
            iterations: 0,
            relative_residual: system.relative_residual(&x),
            wall_time: started.elapsed().as_secs_f64(),
        },
    })
}
