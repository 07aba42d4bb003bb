use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use super::currents::{anchors, merge_shorts};
use super::SolverError;
use crate::netlist::{NodeId, PowerGridNetlist};

// rows per system above which the matrix-vector product runs on the rayon pool
const PARALLEL_ROWS: usize = 32_768;

/// Compressed sparse row matrix with sorted, de-duplicated columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut row: Vec<(usize, f64)> = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A·x`. Rows are independent, so the parallel path is bit-identical
    /// to the serial one.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let row_dot = |i: usize| -> f64 {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            acc
        };
        if self.n >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row_dot(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_dot(i);
            }
        }
    }
}

/// Branch data needed to turn a system solution back into grid quantities.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Topology {
    pub branches: Vec<(NodeId, NodeId, f64)>,
    pub loads: Vec<f64>,
    /// Ground and pad nodes.
    pub anchors: Vec<bool>,
}

/// Nodal system `G·v = i` over the unpinned nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// System index → representative node id.
    pub unknown_nodes: Vec<NodeId>,
    /// Node id → system index, through short merging; `None` for pinned nodes.
    pub node_unknown: Vec<Option<usize>>,
    /// Node id → fixed volts, for every pinned node (pads, ground and nodes
    /// shorted to them).
    pub dirichlet: BTreeMap<NodeId, f64>,
    /// Short-merge map: node id → representative node id.
    pub representative: Vec<NodeId>,
    pub(crate) topology: Topology,
    pub(crate) initial_guess: f64,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// Node voltages from a system solution.
    pub fn node_voltages(&self, x: &[f64]) -> Vec<f64> {
        self.node_unknown
            .iter()
            .enumerate()
            .map(|(id, u)| match u {
                Some(i) => x[*i],
                None => self.dirichlet.get(&id).copied().unwrap_or(0.0),
            })
            .collect()
    }

    /// System vector from node voltages.
    pub fn unknowns(&self, voltages: &[f64]) -> Vec<f64> {
        self.unknown_nodes.iter().map(|&id| voltages[id]).collect()
    }

    /// `‖b − A·x‖₂ / ‖b‖₂` (or `‖A·x‖₂` when `b = 0`).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.dim()];
        self.matrix.mul_vec(x, &mut ax);
        let r: f64 = ax.iter().zip(&self.rhs).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
        let b = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

/// Stamps the nodal conductance system.
///
/// Shorts (`R < 1e-6 Ω`) are merged first. Pad and ground nodes are
/// eliminated as Dirichlet boundaries with their `g·V` moved to the right-hand
/// side; loads are negative injections.
pub fn assemble(netlist: &PowerGridNetlist) -> Result<LinearSystem, SolverError> {
    let n = netlist.nodes().len();
    let rep = merge_shorts(netlist);

    let mut fixed: Vec<Option<f64>> = vec![None; n];
    fixed[rep[0]] = Some(0.0);
    for p in netlist.pads() {
        let r = rep[p.node];
        match fixed[r] {
            Some(v) if v != p.volts => {
                return Err(SolverError::SingularSystem(format!(
                    "pad `{}` ({} V) is shorted to a node fixed at {} V",
                    p.name, p.volts, v
                )));
            }
            _ => fixed[r] = Some(p.volts),
        }
    }

    let branches: Vec<(NodeId, NodeId, f64)> = netlist
        .resistors()
        .iter()
        .filter(|r| !r.is_short())
        .map(|r| (rep[r.a], rep[r.b], 1.0 / r.resistance))
        .filter(|(a, b, _)| a != b)
        .collect();

    // every representative must reach a pinned node
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for &(a, b, _) in &branches {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut reached = vec![false; n];
    let mut queue: VecDeque<NodeId> = (0..n).filter(|&r| rep[r] == r && fixed[r].is_some()).collect();
    for &r in &queue {
        reached[r] = true;
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    let floating: Vec<NodeId> = (1..n).filter(|&id| !reached[rep[id]]).collect();
    if !floating.is_empty() {
        return Err(SolverError::FloatingComponent(floating));
    }

    let mut rep_index = vec![None; n];
    let mut unknown_nodes = Vec::new();
    for r in 0..n {
        if rep[r] == r && fixed[r].is_none() {
            rep_index[r] = Some(unknown_nodes.len());
            unknown_nodes.push(r);
        }
    }
    let dim = unknown_nodes.len();
    let mut rhs = vec![0.0; dim];
    let mut triplets = Vec::with_capacity(4 * branches.len());
    for &(a, b, g) in &branches {
        match (rep_index[a], rep_index[b]) {
            (Some(i), Some(j)) => {
                triplets.push((i, i, g));
                triplets.push((j, j, g));
                triplets.push((i, j, -g));
                triplets.push((j, i, -g));
            }
            (Some(i), None) => {
                triplets.push((i, i, g));
                rhs[i] += g * fixed[b].unwrap();
            }
            (None, Some(j)) => {
                triplets.push((j, j, g));
                rhs[j] += g * fixed[a].unwrap();
            }
            (None, None) => {}
        }
    }
    let loads = netlist.load_per_node();
    for (id, &amps) in loads.iter().enumerate() {
        if let Some(i) = rep_index[rep[id]] {
            rhs[i] -= amps;
        }
    }
    let matrix = CsrMatrix::from_triplets(dim, &triplets);
    if let Some(i) = (0..dim).find(|&i| matrix.get(i, i) <= 0.0) {
        return Err(SolverError::SingularSystem(format!(
            "node `{}` has no conductance",
            netlist.node(unknown_nodes[i]).name
        )));
    }

    let node_unknown = (0..n).map(|id| rep_index[rep[id]]).collect();
    let dirichlet = (0..n).filter_map(|id| fixed[rep[id]].map(|v| (id, v))).collect();
    Ok(LinearSystem {
        matrix,
        rhs,
        unknown_nodes,
        node_unknown,
        dirichlet,
        representative: rep,
        topology: Topology {
            branches: netlist.resistors().iter().map(|r| (r.a, r.b, r.resistance)).collect(),
            loads,
            anchors: anchors(netlist),
        },
        initial_guess: netlist.vdd_nominal(),
    })
}
