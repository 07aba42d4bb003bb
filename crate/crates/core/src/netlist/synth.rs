use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Coord, NetlistBuilder, NetlistError, PowerGridNetlist};
use crate::floorplan::Floorplan;
use crate::reliability::{self, BlockLoad, Orientation, PgLine};

/// Regular single-layer mesh with blocks drawing current through it.
///
/// Row `r` is the horizontal line at `y = r·pitch`, column `c` the vertical
/// line at `x = c·pitch`. Every line gets the width that meets `ir_budget`
/// for the current allocated to it, floored at `base_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub pitch: i64,
    /// Sheet resistance, ohms per square.
    pub sheet_resistance: f64,
    pub base_width: f64,
    pub core_width: f64,
    pub ir_budget: f64,
    /// `(row, col)` of every supply pad.
    pub pad_positions: Vec<(usize, usize)>,
    pub blocks: Vec<BlockLoad>,
    /// Extra blocks drawn from `seed`, appended after `blocks`.
    pub random_blocks: usize,
    /// Mean current of a random block, amperes.
    pub block_current: f64,
    pub vdd: f64,
    pub seed: u64,
}

impl SyntheticGridSpec {
    /// Square `n × n` mesh with sensible defaults and no blocks.
    pub fn square(n: usize) -> Self {
        SyntheticGridSpec {
            rows: n,
            cols: n,
            pitch: 100,
            sheet_resistance: 0.05,
            base_width: 1.0,
            core_width: 1e6,
            ir_budget: 0.05,
            pad_positions: corner_pads(n, n),
            blocks: Vec::new(),
            random_blocks: 0,
            block_current: 0.05,
            vdd: 1.8,
            seed: 0,
        }
    }

    pub fn width_extent(&self) -> f64 {
        ((self.cols - 1) as i64 * self.pitch) as f64
    }

    pub fn height_extent(&self) -> f64 {
        ((self.rows - 1) as i64 * self.pitch) as f64
    }

    fn validate(&self) -> Result<(), NetlistError> {
        let bad = |m: String| Err(NetlistError::InfeasibleSpec(m));
        if self.rows < 2 || self.cols < 2 {
            return bad(format!("need at least 2×2 lines, got {}×{}", self.rows, self.cols));
        }
        if self.pitch <= 0 {
            return bad(format!("pitch must be positive, got {}", self.pitch));
        }
        for (what, v) in [
            ("sheet_resistance", self.sheet_resistance),
            ("base_width", self.base_width),
            ("core_width", self.core_width),
            ("ir_budget", self.ir_budget),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{what} must be positive, got {v}"));
            }
        }
        if !(self.vdd >= 0.0 && self.vdd.is_finite()) {
            return bad(format!("vdd must be non-negative, got {}", self.vdd));
        }
        if self.random_blocks > 0 && !(self.block_current >= 0.0 && self.block_current.is_finite()) {
            return bad(format!("block_current must be non-negative, got {}", self.block_current));
        }
        if self.pad_positions.is_empty() {
            return bad("at least one pad is required".to_string());
        }
        let mut seen = HashSet::new();
        for &(r, c) in &self.pad_positions {
            if r >= self.rows || c >= self.cols {
                return bad(format!("pad ({r}, {c}) outside the {}×{} mesh", self.rows, self.cols));
            }
            if !seen.insert((r, c)) {
                return bad(format!("pad ({r}, {c}) listed twice"));
            }
        }
        for b in &self.blocks {
            if !(b.i_d >= 0.0) || b.x_span.0 > b.x_span.1 || b.y_span.0 > b.y_span.1 {
                return bad(format!("block {} has an empty span or negative current", b.id));
            }
        }
        Ok(())
    }

    fn random_block_list(&self) -> Vec<BlockLoad> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let pitch = self.pitch as f64;
        let span = |extent: f64, rng: &mut ChaCha8Rng| {
            let len = (extent * rng.random_range(0.08..0.25)).max(1.5 * pitch).min(extent);
            let lo = rng.random_range(0.0..=(extent - len));
            (lo, lo + len)
        };
        (0..self.random_blocks)
            .map(|j| {
                let x_span = span(self.width_extent(), &mut rng);
                let y_span = span(self.height_extent(), &mut rng);
                let i_d = self.block_current * rng.random_range(0.5..1.5);
                BlockLoad { id: j, x_span, y_span, i_d }
            })
            .collect()
    }
}

/// Pads at the four mesh corners.
pub fn corner_pads(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    vec![(0, 0), (0, cols - 1), (rows - 1, 0), (rows - 1, cols - 1)]
}

/// Pads on every boundary node (a supply ring).
pub fn ring_pads(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if r == 0 || c == 0 || r == rows - 1 || c == cols - 1 {
                out.push((r, c));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWidths {
    /// Width per floorplan line.
    pub line_widths: Vec<f64>,
    /// Width per netlist resistor.
    pub resistor_widths: Vec<f64>,
    /// Floorplan line per netlist resistor.
    pub resistor_lines: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticGrid {
    pub netlist: PowerGridNetlist,
    pub widths: GroundTruthWidths,
    pub floorplan: Floorplan,
}

/// Builds the mesh described by `spec`. Pure function of `spec`.
pub fn generate_synthetic(spec: &SyntheticGridSpec) -> Result<SyntheticGrid, NetlistError> {
    spec.validate()?;
    let pitch = spec.pitch as f64;
    let mut blocks = spec.blocks.clone();
    blocks.extend(spec.random_block_list());
    for (j, b) in blocks.iter_mut().enumerate() {
        b.id = j;
    }

    let mut lines: Vec<PgLine> = (0..spec.rows)
        .map(|r| (Orientation::Horizontal, r as f64 * pitch, spec.width_extent()))
        .chain((0..spec.cols).map(|c| (Orientation::Vertical, c as f64 * pitch, spec.height_extent())))
        .enumerate()
        .map(|(index, (orientation, position, length))| PgLine {
            index,
            orientation,
            position,
            start: 0.0,
            length,
            width: spec.base_width,
            spacing_after: 0.0,
            current: 0.0,
        })
        .collect();

    let alloc = reliability::allocate_block_currents(&lines, &blocks)
        .map_err(|e| NetlistError::InfeasibleSpec(e.to_string()))?;
    for (line, &current) in lines.iter_mut().zip(&alloc.line_currents) {
        line.current = current;
        if current > 0.0 {
            let w = reliability::width_for_ir(spec.sheet_resistance, line.length, current, spec.ir_budget)
                .map_err(|e| NetlistError::InfeasibleSpec(e.to_string()))?;
            line.width = w.max(spec.base_width);
        }
    }
    for (range, what) in [(0..spec.rows, "horizontal"), (spec.rows..spec.rows + spec.cols, "vertical")] {
        let widths: Vec<f64> = lines[range.clone()].iter().map(|l| l.width).collect();
        let spacings = reliability::spacing_from_widths(&widths, spec.core_width)
            .map_err(|e| NetlistError::InfeasibleSpec(format!("{what} lines: {e}")))?;
        for (line, s) in lines[range].iter_mut().zip(spacings) {
            line.spacing_after = s;
        }
    }

    let name = |r: usize, c: usize| {
        Coord {
            layer: 1,
            x: c as i64 * spec.pitch,
            y: r as i64 * spec.pitch,
        }
        .node_name()
    };
    let mut builder = NetlistBuilder::new();
    let mut resistor_widths = Vec::new();
    let mut resistor_lines = Vec::new();
    let mut k = 0usize;
    let mut segment = |b: &mut NetlistBuilder, from: String, to: String, line: usize| -> Result<(), NetlistError> {
        let w = lines[line].width;
        b.resistor(&format!("R{k}"), &from, &to, spec.sheet_resistance * pitch / w)?;
        resistor_widths.push(w);
        resistor_lines.push(line);
        k += 1;
        Ok(())
    };
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                segment(&mut builder, name(r, c), name(r, c + 1), r)?;
            }
            if r + 1 < spec.rows {
                segment(&mut builder, name(r, c), name(r + 1, c), spec.rows + c)?;
            }
        }
    }
    for (k, &(r, c)) in spec.pad_positions.iter().enumerate() {
        builder.pad(&format!("V{k}"), &name(r, c), "0", spec.vdd)?;
    }
    let nearest = |v: f64, n: usize| ((v / pitch).round().max(0.0) as usize).min(n - 1);
    let mut block_loads = Vec::with_capacity(blocks.len());
    for (j, b) in blocks.iter().enumerate() {
        let (cx, cy) = b.center();
        block_loads.push(builder.load(&format!("I{j}"), &name(nearest(cy, spec.rows), nearest(cx, spec.cols)), "0", b.i_d)?);
    }

    let line_widths = lines.iter().map(|l| l.width).collect();
    Ok(SyntheticGrid {
        netlist: builder.build()?,
        widths: GroundTruthWidths {
            line_widths,
            resistor_widths,
            resistor_lines,
        },
        floorplan: Floorplan {
            lines,
            blocks,
            block_loads,
            sheet_resistance: spec.sheet_resistance,
            core_width: spec.core_width,
            ir_budget: spec.ir_budget,
        },
    })
}
