use rayon::prelude::*;

use super::{Dataset, DatasetError, Sample};
use crate::floorplan::Floorplan;
use crate::netlist::{Coord, PowerGridNetlist};
use crate::reliability::allocate_block_currents;
use crate::solver::GridSolution;

/// Where the width target of each interconnect comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GoldenWidths {
    /// Known width per resistor, e.g. from the synthetic generator.
    PerResistor(Vec<f64>),
    /// `w = ρ·l / R` with `l` the coordinate length of the branch (vias of
    /// zero length count as one unit).
    FromResistance { rho: f64 },
}

fn width_from_resistance(rho: f64, a: Coord, b: Coord, resistance: f64) -> f64 {
    let length = ((a.x - b.x).abs() + (a.y - b.y).abs()).max(1) as f64;
    rho * length / resistance
}

impl GoldenWidths {
    /// Width per resistor of `netlist`; `NaN` where a resistance-derived
    /// width has no coordinates to measure.
    pub fn resolve(&self, netlist: &PowerGridNetlist) -> Result<Vec<f64>, DatasetError> {
        match self {
            GoldenWidths::PerResistor(w) if w.len() != netlist.resistors().len() => {
                Err(DatasetError::LengthMismatch(w.len(), netlist.resistors().len()))
            }
            GoldenWidths::PerResistor(w) => Ok(w.clone()),
            GoldenWidths::FromResistance { rho } => Ok(netlist
                .resistors()
                .iter()
                .map(|r| match (netlist.node(r.a).coord, netlist.node(r.b).coord) {
                    (Some(a), Some(b)) => width_from_resistance(*rho, a, b, r.resistance),
                    _ => f64::NAN,
                })
                .collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions<'a> {
    /// Block geometry; adds each line's allocated current to `i_d`.
    pub floorplan: Option<&'a Floorplan>,
    /// Drop branches without coordinates instead of failing.
    pub skip_uncoordinated: bool,
}

/// One sample per resistor with coordinate-bearing endpoints.
///
/// `i_d` is the load at both endpoints plus, with a floorplan, the current
/// allocated to the line carrying the branch. Branches left with no current
/// use the solved branch current magnitude instead.
pub fn extract_features(
    netlist: &PowerGridNetlist,
    solution: &GridSolution,
    widths: &GoldenWidths,
    opts: &ExtractOptions,
) -> Result<Dataset, DatasetError> {
    let resistors = netlist.resistors();
    if let GoldenWidths::PerResistor(w) = widths {
        if w.len() != resistors.len() {
            return Err(DatasetError::LengthMismatch(w.len(), resistors.len()));
        }
    }
    if let GoldenWidths::FromResistance { rho } = widths {
        if !(*rho > 0.0 && rho.is_finite()) {
            return Err(DatasetError::InvalidParameter(format!("rho must be positive, got {rho}")));
        }
    }
    if solution.branch_currents.len() != resistors.len() {
        return Err(DatasetError::LengthMismatch(solution.branch_currents.len(), resistors.len()));
    }
    let loads = netlist.load_per_node();
    let line_current = match opts.floorplan {
        Some(fp) => {
            let alloc = allocate_block_currents(&fp.lines, &fp.blocks_from(netlist))
                .map_err(|e| DatasetError::InvalidParameter(e.to_string()))?;
            Some((fp.line_lookup(), alloc.line_currents))
        }
        None => None,
    };

    let rows: Vec<Result<Option<(usize, Sample)>, DatasetError>> = resistors
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let coords = (netlist.node(r.a).coord, netlist.node(r.b).coord);
            let (a, b): (Coord, Coord) = match coords {
                (Some(a), Some(b)) => (a, b),
                _ if opts.skip_uncoordinated => return Ok(None),
                (None, _) => return Err(DatasetError::NoCoordinates(netlist.node(r.a).name.clone())),
                (_, None) => return Err(DatasetError::NoCoordinates(netlist.node(r.b).name.clone())),
            };
            let mut i_d = loads[r.a] + loads[r.b];
            if let Some((lookup, currents)) = &line_current {
                if let Some(line) = lookup.line_of_segment(a, b) {
                    i_d += currents[line];
                }
            }
            if i_d == 0.0 {
                i_d = solution.branch_currents[k].abs();
            }
            let w = match widths {
                GoldenWidths::PerResistor(w) => w[k],
                GoldenWidths::FromResistance { rho } => width_from_resistance(*rho, a, b, r.resistance),
            };
            Ok(Some((
                k,
                Sample {
                    x: 0.5 * (a.x + b.x) as f64,
                    y: 0.5 * (a.y + b.y) as f64,
                    i_d,
                    w,
                },
            )))
        })
        .collect();

    let mut data = Dataset::new(Vec::with_capacity(rows.len()), "netlist");
    for row in rows {
        if let Some((k, s)) = row? {
            data.origin.push(k);
            data.samples.push(s);
        }
    }
    if data.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(data)
}
