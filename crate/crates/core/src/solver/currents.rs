use std::collections::VecDeque;

use crate::netlist::{NodeId, PowerGridNetlist, SHORT_RESISTANCE};

/// Representative (smallest id) of every node's short-circuit group.
pub(crate) fn merge_shorts(netlist: &PowerGridNetlist) -> Vec<NodeId> {
    let n = netlist.nodes().len();
    let mut parent: Vec<NodeId> = (0..n).collect();
    fn find(parent: &mut [NodeId], mut x: NodeId) -> NodeId {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for r in netlist.resistors().iter().filter(|r| r.is_short()) {
        let (a, b) = (find(&mut parent, r.a), find(&mut parent, r.b));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
        }
    }
    (0..n).map(|x| find(&mut parent, x)).collect()
}

/// Whether each node's voltage is fixed: ground, a pad, or shorted to either.
pub(crate) fn pinned_components(netlist: &PowerGridNetlist) -> Vec<bool> {
    let rep = merge_shorts(netlist);
    let mut fixed_rep = vec![false; rep.len()];
    fixed_rep[rep[0]] = true;
    for p in netlist.pads() {
        fixed_rep[rep[p.node]] = true;
    }
    rep.iter().map(|&r| fixed_rep[r]).collect()
}

/// Ground and pad nodes.
pub(crate) fn anchors(netlist: &PowerGridNetlist) -> Vec<bool> {
    let mut out = vec![false; netlist.nodes().len()];
    out[0] = true;
    for p in netlist.pads() {
        out[p.node] = true;
    }
    out
}

/// Branch currents from node voltages.
///
/// Regular branches follow Ohm's law. Currents through shorts are recovered
/// from KCL along a spanning tree of each short group, rooted at a pad or
/// ground node when the group has one; loop-closing shorts carry zero.
pub fn branch_currents(netlist: &PowerGridNetlist, voltages: &[f64]) -> Vec<f64> {
    let branches: Vec<_> = netlist.resistors().iter().map(|r| (r.a, r.b, r.resistance)).collect();
    currents_from(&branches, &netlist.load_per_node(), &anchors(netlist), voltages)
}

pub(crate) fn currents_from(
    branches: &[(NodeId, NodeId, f64)],
    loads: &[f64],
    anchors: &[bool],
    voltages: &[f64],
) -> Vec<f64> {
    let n = loads.len();
    let mut currents = vec![0.0; branches.len()];
    let mut excess: Vec<f64> = loads.iter().map(|l| -l).collect();
    let mut short_adj: Vec<Vec<(NodeId, usize)>> = vec![Vec::new(); n];
    let mut any_short = false;
    for (k, &(a, b, resistance)) in branches.iter().enumerate() {
        let (lo, hi) = (a.min(b), a.max(b));
        if resistance < SHORT_RESISTANCE {
            short_adj[lo].push((hi, k));
            short_adj[hi].push((lo, k));
            any_short = true;
            continue;
        }
        let i = (voltages[lo] - voltages[hi]) / resistance;
        currents[k] = i;
        excess[lo] -= i;
        excess[hi] += i;
    }
    if !any_short {
        return currents;
    }

    let mut visited = vec![false; n];
    let mut parent_edge: Vec<Option<(NodeId, usize)>> = vec![None; n];
    let mut queue = VecDeque::new();
    let mut order = Vec::new();
    for start in 0..n {
        if visited[start] || short_adj[start].is_empty() {
            continue;
        }
        // collect the group, then root it at an anchor if there is one
        let mut group = vec![start];
        visited[start] = true;
        let mut i = 0;
        while i < group.len() {
            let u = group[i];
            i += 1;
            for &(v, _) in &short_adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    group.push(v);
                }
            }
        }
        let root = group.iter().copied().find(|&u| anchors[u]).unwrap_or(start);
        for &u in &group {
            visited[u] = false;
        }
        visited[root] = true;
        queue.push_back(root);
        order.clear();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, k) in &short_adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent_edge[v] = Some((u, k));
                    queue.push_back(v);
                }
            }
        }
        for &u in order.iter().rev() {
            if let Some((p, k)) = parent_edge[u] {
                // excess[u] must leave u towards p
                let flow = excess[u];
                currents[k] = if u < p { flow } else { -flow };
                excess[p] += flow;
                excess[u] = 0.0;
            }
        }
    }
    currents
}
