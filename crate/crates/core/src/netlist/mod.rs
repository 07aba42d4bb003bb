//! Resistive power-grid netlists.
//!
//! The in-memory form mirrors the SPICE subset used by the IBM power-grid
//! benchmarks: resistors between grid nodes, ideal voltage pads from a node to
//! ground and DC current loads from a node to ground. Node names of the form
//! `n<layer>_<x>_<y>` carry their layout coordinates.

mod parse;
mod synth;
mod write;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

pub use parse::{parse_netlist, parse_str};
pub use synth::{
    corner_pads, generate_synthetic, ring_pads, GroundTruthWidths, SyntheticGrid, SyntheticGridSpec,
};
pub use write::{format_value, write_netlist, write_string};

/// Dense node index, `0..node_count`.
pub type NodeId = usize;

/// Name of the ground node.
pub const GROUND: &str = "0";

/// Resistors below this value are treated as ideal shorts and merged before
/// assembly.
pub const SHORT_RESISTANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: duplicate element `{name}`")]
    DuplicateElementName { line: usize, name: String },
    #[error("line {line}: element `{element}` must reference ground `0`")]
    DanglingNode { line: usize, element: String },
    #[error("netlist has no ground node `0`")]
    MissingGround,
    #[error("element `{element}`: {reason}")]
    InvalidValue { element: String, reason: String },
    #[error("infeasible synthetic grid: {0}")]
    InfeasibleSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NetlistError {
    pub fn code(&self) -> &'static str {
        match self {
            NetlistError::MalformedLine { .. } => "MalformedLine",
            NetlistError::DuplicateElementName { .. } => "DuplicateElementName",
            NetlistError::DanglingNode { .. } => "DanglingNode",
            NetlistError::MissingGround => "MissingGround",
            NetlistError::InvalidValue { .. } => "InvalidValue",
            NetlistError::InfeasibleSpec(_) => "InfeasibleSpec",
            NetlistError::Io(_) => "Io",
        }
    }
}

/// Layout position decoded from a node name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub layer: u32,
    pub x: i64,
    pub y: i64,
}

impl Coord {
    /// Decodes `n<layer>_<x>_<y>` with non-negative decimal fields.
    pub fn from_name(name: &str) -> Option<Coord> {
        let rest = name.strip_prefix('n')?;
        let mut parts = rest.split('_');
        let layer = parse_field(parts.next()?)?;
        let x = parse_field(parts.next()?)?;
        let y = parse_field(parts.next()?)?;
        if parts.next().is_some() {
            return None;
        }
        Some(Coord {
            layer: u32::try_from(layer).ok()?,
            x,
            y,
        })
    }

    pub fn node_name(&self) -> String {
        format!("n{}_{}_{}", self.layer, self.x, self.y)
    }
}

fn parse_field(s: &str) -> Option<i64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRef {
    pub id: NodeId,
    pub name: String,
    /// `None` when the name does not follow the coordinate pattern.
    pub coord: Option<Coord>,
    pub is_ground: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResistorBranch {
    pub name: String,
    pub a: NodeId,
    pub b: NodeId,
    pub resistance: f64,
}

impl ResistorBranch {
    pub fn is_short(&self) -> bool {
        self.resistance < SHORT_RESISTANCE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltagePad {
    pub name: String,
    pub node: NodeId,
    pub volts: f64,
}

/// DC current drawn from `node` into ground.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentLoad {
    pub name: String,
    pub node: NodeId,
    pub amps: f64,
}

/// Position of an element in the original file, used to reproduce the file
/// order on write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementRef {
    Resistor(usize),
    Pad(usize),
    Load(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetlistCounts {
    pub nodes: usize,
    pub resistors: usize,
    pub pads: usize,
    pub loads: usize,
}

/// Validated resistive grid. Immutable once built.
///
/// Node 0 is always the ground node. Other nodes are numbered in order of
/// first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGridNetlist {
    nodes: Vec<NodeRef>,
    resistors: Vec<ResistorBranch>,
    pads: Vec<VoltagePad>,
    loads: Vec<CurrentLoad>,
    order: Vec<ElementRef>,
    vdd_nominal: f64,
}

impl PowerGridNetlist {
    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeRef {
        &self.nodes[id]
    }

    pub fn ground(&self) -> NodeId {
        0
    }

    pub fn resistors(&self) -> &[ResistorBranch] {
        &self.resistors
    }

    pub fn pads(&self) -> &[VoltagePad] {
        &self.pads
    }

    pub fn loads(&self) -> &[CurrentLoad] {
        &self.loads
    }

    pub fn element_order(&self) -> &[ElementRef] {
        &self.order
    }

    /// Maximum pad voltage; the IR-drop reference.
    pub fn vdd_nominal(&self) -> f64 {
        self.vdd_nominal
    }

    /// `(#n, #r, #v, #i)`; `#n` excludes ground.
    pub fn counts(&self) -> NetlistCounts {
        NetlistCounts {
            nodes: self.nodes.len() - 1,
            resistors: self.resistors.len(),
            pads: self.pads.len(),
            loads: self.loads.len(),
        }
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn name_index(&self) -> HashMap<&str, NodeId> {
        self.nodes.iter().map(|n| (n.name.as_str(), n.id)).collect()
    }

    /// Summed load current per node.
    pub fn load_per_node(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for l in &self.loads {
            out[l.node] += l.amps;
        }
        out
    }

    /// Pad voltage per node, `None` where no pad is attached.
    pub fn pad_per_node(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.nodes.len()];
        for p in &self.pads {
            out[p.node] = Some(p.volts);
        }
        out
    }

    /// Copy with replaced resistor and/or load values, re-validated.
    pub(crate) fn with_values(
        &self,
        resistances: Option<&[f64]>,
        loads: Option<&[f64]>,
    ) -> Result<Self, NetlistError> {
        let mut out = self.clone();
        if let Some(rs) = resistances {
            assert_eq!(rs.len(), out.resistors.len());
            for (r, &v) in out.resistors.iter_mut().zip(rs) {
                check_value(&r.name, v, "resistance")?;
                r.resistance = v;
            }
        }
        if let Some(ls) = loads {
            assert_eq!(ls.len(), out.loads.len());
            for (l, &v) in out.loads.iter_mut().zip(ls) {
                check_value(&l.name, v, "current")?;
                l.amps = v;
            }
        }
        Ok(out)
    }
}

fn check_value(element: &str, v: f64, what: &str) -> Result<(), NetlistError> {
    if !v.is_finite() {
        return Err(NetlistError::InvalidValue {
            element: element.to_string(),
            reason: format!("{what} is not finite"),
        });
    }
    if v < 0.0 {
        return Err(NetlistError::InvalidValue {
            element: element.to_string(),
            reason: format!("{what} {v} is negative"),
        });
    }
    Ok(())
}

/// Incremental, validating constructor shared by the parser and the
/// generator.
#[derive(Debug)]
pub struct NetlistBuilder {
    nodes: Vec<NodeRef>,
    index: HashMap<String, NodeId>,
    names: HashSet<String>,
    padded: HashSet<NodeId>,
    resistors: Vec<ResistorBranch>,
    pads: Vec<VoltagePad>,
    loads: Vec<CurrentLoad>,
    order: Vec<ElementRef>,
    ground_seen: bool,
    line: usize,
}

impl Default for NetlistBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl NetlistBuilder {
    pub fn new() -> Self {
        let ground = NodeRef {
            id: 0,
            name: GROUND.to_string(),
            coord: None,
            is_ground: true,
        };
        let mut index = HashMap::new();
        index.insert(GROUND.to_string(), 0);
        NetlistBuilder {
            nodes: vec![ground],
            index,
            names: HashSet::new(),
            padded: HashSet::new(),
            resistors: Vec::new(),
            pads: Vec::new(),
            loads: Vec::new(),
            order: Vec::new(),
            ground_seen: false,
            line: 0,
        }
    }

    /// Line number attached to subsequent errors (0 for generated input).
    pub fn at_line(&mut self, line: usize) -> &mut Self {
        self.line = line;
        self
    }

    fn node(&mut self, name: &str) -> NodeId {
        if name == GROUND {
            self.ground_seen = true;
            return 0;
        }
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(NodeRef {
            id,
            name: name.to_string(),
            coord: Coord::from_name(name),
            is_ground: false,
        });
        self.index.insert(name.to_string(), id);
        id
    }

    fn claim_name(&mut self, name: &str) -> Result<(), NetlistError> {
        if !self.names.insert(name.to_string()) {
            return Err(NetlistError::DuplicateElementName {
                line: self.line,
                name: name.to_string(),
            });
        }
        Ok(())
    }

    fn grounded_terminal(&mut self, element: &str, pos: &str, neg: &str) -> Result<NodeId, NetlistError> {
        if neg != GROUND || pos == GROUND {
            return Err(NetlistError::DanglingNode {
                line: self.line,
                element: element.to_string(),
            });
        }
        self.node(GROUND);
        Ok(self.node(pos))
    }

    pub fn resistor(&mut self, name: &str, a: &str, b: &str, ohms: f64) -> Result<NodeId, NetlistError> {
        check_value(name, ohms, "resistance")?;
        if a == b {
            return Err(NetlistError::InvalidValue {
                element: name.to_string(),
                reason: "both terminals on the same node".to_string(),
            });
        }
        self.claim_name(name)?;
        let a = self.node(a);
        let b = self.node(b);
        self.order.push(ElementRef::Resistor(self.resistors.len()));
        self.resistors.push(ResistorBranch {
            name: name.to_string(),
            a,
            b,
            resistance: ohms,
        });
        Ok(self.resistors.len() - 1)
    }

    pub fn pad(&mut self, name: &str, pos: &str, neg: &str, volts: f64) -> Result<NodeId, NetlistError> {
        check_value(name, volts, "voltage")?;
        let node = self.grounded_terminal(name, pos, neg)?;
        // a second pad on the same node has no defined meaning
        if self.padded.contains(&node) {
            return Err(NetlistError::DuplicateElementName {
                line: self.line,
                name: name.to_string(),
            });
        }
        self.claim_name(name)?;
        self.padded.insert(node);
        self.order.push(ElementRef::Pad(self.pads.len()));
        self.pads.push(VoltagePad {
            name: name.to_string(),
            node,
            volts,
        });
        Ok(self.pads.len() - 1)
    }

    pub fn load(&mut self, name: &str, pos: &str, neg: &str, amps: f64) -> Result<NodeId, NetlistError> {
        check_value(name, amps, "current")?;
        let node = self.grounded_terminal(name, pos, neg)?;
        self.claim_name(name)?;
        self.order.push(ElementRef::Load(self.loads.len()));
        self.loads.push(CurrentLoad {
            name: name.to_string(),
            node,
            amps,
        });
        Ok(self.loads.len() - 1)
    }

    pub fn build(self) -> Result<PowerGridNetlist, NetlistError> {
        if !self.ground_seen {
            return Err(NetlistError::MissingGround);
        }
        let vdd_nominal = self.pads.iter().map(|p| p.volts).fold(0.0, f64::max);
        Ok(PowerGridNetlist {
            nodes: self.nodes,
            resistors: self.resistors,
            pads: self.pads,
            loads: self.loads,
            order: self.order,
            vdd_nominal,
        })
    }
}
