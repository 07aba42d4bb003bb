//! Floorplan geometry: power-grid lines and the blocks they feed.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::netlist::{Coord, PowerGridNetlist};
use crate::reliability::{BlockLoad, Orientation, PgLine};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floorplan {
    pub lines: Vec<PgLine>,
    pub blocks: Vec<BlockLoad>,
    /// Index into the netlist's load list carrying each block's current.
    pub block_loads: Vec<usize>,
    pub sheet_resistance: f64,
    pub core_width: f64,
    pub ir_budget: f64,
}

impl Floorplan {
    /// Blocks with `i_d` taken from the netlist's loads, so that load
    /// perturbations carry over to the block view.
    pub fn blocks_from(&self, netlist: &PowerGridNetlist) -> Vec<BlockLoad> {
        self.blocks
            .iter()
            .zip(&self.block_loads)
            .map(|(b, &load)| BlockLoad {
                i_d: netlist.loads()[load].amps,
                ..b.clone()
            })
            .collect()
    }

    pub fn line_lookup(&self) -> LineLookup {
        LineLookup::new(&self.lines)
    }

    pub fn to_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }

    pub fn from_json<R: Read>(input: R) -> serde_json::Result<Self> {
        serde_json::from_reader(input)
    }
}

/// Maps layout coordinates to the line that passes through them.
#[derive(Debug, Clone)]
pub struct LineLookup {
    by_position: HashMap<(Orientation, i64), usize>,
}

impl LineLookup {
    pub fn new(lines: &[PgLine]) -> Self {
        LineLookup {
            by_position: lines
                .iter()
                .enumerate()
                .map(|(i, l)| ((l.orientation, l.position.round() as i64), i))
                .collect(),
        }
    }

    pub fn line(&self, orientation: Orientation, position: i64) -> Option<usize> {
        self.by_position.get(&(orientation, position)).copied()
    }

    /// Line carrying the segment between two coordinates, if the segment is
    /// axis-aligned and lies on a known line.
    pub fn line_of_segment(&self, a: Coord, b: Coord) -> Option<usize> {
        if a.y == b.y && a.x != b.x {
            self.line(Orientation::Horizontal, a.y)
        } else if a.x == b.x && a.y != b.y {
            self.line(Orientation::Vertical, a.x)
        } else {
            None
        }
    }
}
