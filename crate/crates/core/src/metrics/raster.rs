use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::netlist::{format_value, PowerGridNetlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

/// Square raster of IR drop over the layout bounding box. Row 0 is the
/// lowest `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct IrMap {
    pub resolution: usize,
    /// `(x_min, x_max, y_min, y_max)` of the node coordinates.
    pub bbox: (i64, i64, i64, i64),
    /// Row-major, `None` for cells that contain no node.
    pub cells: Vec<Option<f64>>,
}

impl IrMap {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.resolution + col]
    }

    /// Cells that hold a value, with their `(row, col)`.
    pub fn filled(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k / self.resolution, k % self.resolution, v)))
    }

    pub fn empty_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }
}

fn cell(v: i64, lo: i64, hi: i64, res: usize) -> usize {
    if hi == lo {
        return 0;
    }
    let t = (v - lo) as f64 / (hi - lo) as f64;
    ((t * res as f64).floor() as usize).min(res - 1)
}

/// Rasterizes per-node drops (indexed by node id; ground is ignored).
pub fn ir_map(
    drops: &[f64],
    netlist: &PowerGridNetlist,
    resolution: usize,
    agg: Aggregation,
) -> Result<IrMap, MetricsError> {
    if resolution == 0 {
        return Err(MetricsError::InvalidBins);
    }
    let nodes = netlist.nodes();
    if drops.len() != nodes.len() {
        return Err(MetricsError::LengthMismatch(drops.len(), nodes.len()));
    }
    let mut coords = Vec::with_capacity(nodes.len());
    for n in nodes.iter().filter(|n| !n.is_ground) {
        let c = n.coord.ok_or_else(|| MetricsError::NoCoordinates(n.name.clone()))?;
        coords.push((n.id, c.x, c.y));
    }
    if coords.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for &(_, x, y) in &coords {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let index: Vec<usize> = coords
        .par_iter()
        .map(|&(_, x, y)| cell(y, y0, y1, resolution) * resolution + cell(x, x0, x1, resolution))
        .collect();
    let mut acc = vec![0.0f64; resolution * resolution];
    let mut count = vec![0usize; resolution * resolution];
    for (&(id, _, _), &k) in coords.iter().zip(&index) {
        let d = drops[id];
        match agg {
            Aggregation::Max => {
                if count[k] == 0 || d > acc[k] {
                    acc[k] = d;
                }
            }
            Aggregation::Mean => acc[k] += d,
        }
        count[k] += 1;
    }
    let cells = acc
        .into_iter()
        .zip(count)
        .map(|(v, c)| match (c, agg) {
            (0, _) => None,
            (_, Aggregation::Max) => Some(v),
            (c, Aggregation::Mean) => Some(v / c as f64),
        })
        .collect();
    Ok(IrMap {
        resolution,
        bbox: (x0, x1, y0, y1),
        cells,
    })
}

/// Plain PGM (P2), highest `y` at the top. Values are scaled to the largest
/// drop; empty cells are black.
pub fn write_pgm<W: Write>(map: &IrMap, mut out: W) -> std::io::Result<()> {
    let res = map.resolution;
    let max = map.filled().map(|(_, _, v)| v).fold(0.0f64, f64::max);
    writeln!(out, "P2\n{res} {res}\n255")?;
    for row in (0..res).rev() {
        let line: Vec<String> = (0..res)
            .map(|col| {
                let v = map.get(row, col).unwrap_or(0.0);
                let g = if max > 0.0 { (v.max(0.0) / max * 255.0).round() } else { 0.0 };
                (g as u32).to_string()
            })
            .collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// `row,col,drop` with `drop` left blank for empty cells.
pub fn write_raster_csv<W: Write>(map: &IrMap, mut out: W) -> std::io::Result<()> {
    writeln!(out, "row,col,drop")?;
    for (k, c) in map.cells.iter().enumerate() {
        let v = c.map(format_value).unwrap_or_default();
        writeln!(out, "{},{},{}", k / map.resolution, k % map.resolution, v)?;
    }
    Ok(())
}
