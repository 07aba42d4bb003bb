//! Static IR-drop analysis.
//!
//! Pads are ideal Dirichlet boundaries, so the nodal conductance matrix over
//! the remaining nodes is symmetric positive definite and is solved with
//! Jacobi-preconditioned conjugate gradients. Branch currents are signed from
//! the lower node id to the higher one.

mod assemble;
mod cg;
mod currents;
mod dense;
mod io;

use std::time::Instant;

use thiserror::Error;

use crate::netlist::{NodeId, PowerGridNetlist};

pub use assemble::{assemble, CsrMatrix, LinearSystem};
pub use cg::solve;
pub use currents::branch_currents;
pub use dense::{dense_solve_oracle, DENSE_LIMIT};
pub use io::{read_solution, write_solution, SolutionFile};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("nodes not connected to any pad: {}", preview(.0))]
    FloatingComponent(Vec<NodeId>),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dense oracle limited to {limit} unknowns, system has {dim}")]
    DimTooLarge { dim: usize, limit: usize },
    #[error("solution file line {line}: {reason}")]
    MalformedSolution { line: usize, reason: String },
    #[error("solution file does not cover node `{0}`")]
    MissingNode(String),
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn preview(ids: &[NodeId]) -> String {
    let head: Vec<String> = ids.iter().take(8).map(|i| i.to_string()).collect();
    if ids.len() > 8 {
        format!("{} ... ({} total)", head.join(", "), ids.len())
    } else {
        head.join(", ")
    }
}

impl SolverError {
    pub fn code(&self) -> &'static str {
        match self {
            SolverError::FloatingComponent(_) => "FloatingComponent",
            SolverError::SingularSystem(_) => "SingularSystem",
            SolverError::NoConvergence { .. } => "NoConvergence",
            SolverError::DimTooLarge { .. } => "DimTooLarge",
            SolverError::MalformedSolution { .. } => "MalformedSolution",
            SolverError::MissingNode(_) => "MissingNode",
            SolverError::InvalidParameter(_) => "InvalidParameter",
            SolverError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Seconds, measured with a monotonic clock.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    /// Volts per node id (ground is 0).
    pub voltages: Vec<f64>,
    /// Amperes per resistor, positive from the lower node id to the higher.
    pub branch_currents: Vec<f64>,
    pub stats: SolveStats,
}

impl GridSolution {
    /// Rebuilds branch currents from node voltages, e.g. from a solution file.
    pub fn from_voltages(netlist: &PowerGridNetlist, voltages: Vec<f64>) -> Self {
        let branch_currents = branch_currents(netlist, &voltages);
        GridSolution {
            voltages,
            branch_currents,
            stats: SolveStats::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub tol: f64,
    /// Defaults to ten times the system dimension.
    pub max_iter: Option<usize>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

/// Assemble and solve; `stats.wall_time` covers both steps.
pub fn analyze(netlist: &PowerGridNetlist, opts: &AnalyzeOptions) -> Result<GridSolution, SolverError> {
    let started = Instant::now();
    let system = assemble(netlist)?;
    let max_iter = opts.max_iter.unwrap_or(10 * system.dim().max(1));
    let mut solution = solve(&system, opts.tol, max_iter)?;
    solution.stats.wall_time = started.elapsed().as_secs_f64();
    Ok(solution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrDrop {
    /// `vdd_nominal − v(n)` per node; zero at ground.
    pub drops: Vec<f64>,
    pub worst_case: f64,
    pub worst_node: Option<NodeId>,
}

pub fn ir_drop(solution: &GridSolution, netlist: &PowerGridNetlist) -> IrDrop {
    let vdd = netlist.vdd_nominal();
    let mut worst_case = 0.0;
    let mut worst_node = None;
    let drops = netlist
        .nodes()
        .iter()
        .map(|n| {
            if n.is_ground {
                return 0.0;
            }
            let d = vdd - solution.voltages[n.id];
            if worst_node.is_none() || d > worst_case {
                worst_case = d;
                worst_node = Some(n.id);
            }
            d
        })
        .collect();
    IrDrop {
        drops,
        worst_case,
        worst_node,
    }
}

/// Largest KCL imbalance over nodes that are not pinned by a pad or ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KclReport {
    /// Absolute imbalance in amperes at the worst node.
    pub max_abs: f64,
    /// Imbalance divided by the node's allowed tolerance; `≤ 1` passes.
    pub max_ratio: f64,
    pub node: Option<NodeId>,
}

/// KCL with tolerance `max(1e-8 A, 1e-6 · Σ|incident|)` per node.
pub fn kcl_check(netlist: &PowerGridNetlist, solution: &GridSolution) -> KclReport {
    let n = netlist.nodes().len();
    let mut inflow = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    for (r, &i) in netlist.resistors().iter().zip(&solution.branch_currents) {
        let (lo, hi) = (r.a.min(r.b), r.a.max(r.b));
        inflow[lo] -= i;
        inflow[hi] += i;
        magnitude[lo] += i.abs();
        magnitude[hi] += i.abs();
    }
    let loads = netlist.load_per_node();
    let pinned = currents::pinned_components(netlist);
    let mut report = KclReport {
        max_abs: 0.0,
        max_ratio: 0.0,
        node: None,
    };
    for id in 1..n {
        if pinned[id] {
            continue;
        }
        let err = (inflow[id] - loads[id]).abs();
        let tol = (1e-6 * (magnitude[id] + loads[id])).max(1e-8);
        report.max_abs = report.max_abs.max(err);
        if err / tol > report.max_ratio {
            report.max_ratio = err / tol;
            report.node = Some(id);
        }
    }
    report
}
