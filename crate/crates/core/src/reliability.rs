//! Closed-form sizing and reliability rules for power-grid lines.
//!
//! * width from an IR budget: `w = ρ·l·I / V_IR`
//! * ring budget: `Σ (s_i + w_i) = W_core`
//! * electromigration: `I / w ≤ J_max`
//! * line count: `⌊W_core / w⌋`
//! * block-to-line current allocation (equal split among covering lines)
//!
//! Widths and spacings are in abstract width units; lengths and positions in
//! layout coordinate units.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("{what} must be strictly positive, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },
    #[error("block {0} is not covered by any power-grid line")]
    UncoveredBlock(usize),
    #[error("widths sum to {total} which leaves no spacing within core width {core_width}")]
    InfeasibleWidths { total: f64, core_width: f64 },
    #[error("at least one line is required")]
    NoLines,
}

impl ReliabilityError {
    pub fn code(&self) -> &'static str {
        match self {
            ReliabilityError::NonPositiveInput { .. } => "NonPositiveInput",
            ReliabilityError::UncoveredBlock(_) => "UncoveredBlock",
            ReliabilityError::InfeasibleWidths { .. } => "InfeasibleWidths",
            ReliabilityError::NoLines => "NoLines",
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64, ReliabilityError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ReliabilityError::NonPositiveInput { what, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingParams {
    /// Sheet resistance, ohms per square.
    pub rho: f64,
    /// Maximum current density, amperes per width unit.
    pub j_max: f64,
    /// Allowed IR drop per line, volts.
    pub ir_budget: f64,
    /// Ring width shared by all lines and spacings of one direction.
    pub core_width: f64,
}

impl SizingParams {
    pub fn validate(&self) -> Result<(), ReliabilityError> {
        positive("rho", self.rho)?;
        positive("j_max", self.j_max)?;
        positive("ir_budget", self.ir_budget)?;
        positive("core_width", self.core_width)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Horizontal => "horizontal",
            Orientation::Vertical => "vertical",
        })
    }
}

/// One straight power-grid line.
///
/// A horizontal line sits at `y = position` and runs from `x = start` to
/// `x = start + length`; a vertical line is the transpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgLine {
    pub index: usize,
    pub orientation: Orientation,
    pub position: f64,
    pub start: f64,
    pub length: f64,
    pub width: f64,
    pub spacing_after: f64,
    pub current: f64,
}

impl PgLine {
    /// Interval the line covers along its own direction.
    pub fn extent(&self) -> (f64, f64) {
        (self.start, self.start + self.length)
    }

    /// Layout point at the middle of the line.
    pub fn midpoint(&self) -> (f64, f64) {
        let along = self.start + 0.5 * self.length;
        match self.orientation {
            Orientation::Horizontal => (along, self.position),
            Orientation::Vertical => (self.position, along),
        }
    }
}

/// Functional block drawing a switching current over a rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLoad {
    pub id: usize,
    pub x_span: (f64, f64),
    pub y_span: (f64, f64),
    /// Switching current, amperes.
    pub i_d: f64,
}

impl BlockLoad {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_span.0 + self.x_span.1),
            0.5 * (self.y_span.0 + self.y_span.1),
        )
    }

    /// Span across the line direction (the one a line's position must fall in).
    pub fn perpendicular_span(&self, o: Orientation) -> (f64, f64) {
        match o {
            Orientation::Horizontal => self.y_span,
            Orientation::Vertical => self.x_span,
        }
    }

    /// Span along the line direction.
    pub fn parallel_span(&self, o: Orientation) -> (f64, f64) {
        match o {
            Orientation::Horizontal => self.x_span,
            Orientation::Vertical => self.y_span,
        }
    }

    pub fn covered_by(&self, line: &PgLine) -> bool {
        let (lo, hi) = self.perpendicular_span(line.orientation);
        let (a, b) = self.parallel_span(line.orientation);
        let (s, e) = line.extent();
        lo <= line.position && line.position <= hi && a <= e && s <= b
    }
}

/// `w = ρ·l·I / V_IR`.
pub fn width_for_ir(rho: f64, length: f64, current: f64, ir_budget: f64) -> Result<f64, ReliabilityError> {
    positive("rho", rho)?;
    positive("length", length)?;
    positive("current", current)?;
    positive("ir_budget", ir_budget)?;
    Ok(rho * length * current / ir_budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmCheck {
    pub density: f64,
    pub margin: f64,
    pub violated: bool,
}

/// Current density against `J_max`; the limit itself is allowed.
pub fn em_check(current: f64, width: f64, j_max: f64) -> Result<EmCheck, ReliabilityError> {
    positive("width", width)?;
    positive("j_max", j_max)?;
    let density = current / width;
    Ok(EmCheck {
        density,
        margin: j_max - density,
        violated: density > j_max,
    })
}

/// `⌊W_core / w⌋`, never below one.
pub fn pg_line_count(core_width: f64, width: f64) -> Result<usize, ReliabilityError> {
    positive("width", width)?;
    positive("core_width", core_width)?;
    Ok(((core_width / width).floor() as usize).max(1))
}

/// Current `I_ij` delivered by line `line` to block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentShare {
    pub line: usize,
    pub block: usize,
    pub amps: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation {
    /// `I_i` per line, indexed like the input slice.
    pub line_currents: Vec<f64>,
    pub shares: Vec<CurrentShare>,
}

/// Splits every block's current equally among the lines that cross it.
///
/// `I_i = Σ_j I_ij` by construction, and `Σ_i I_i = Σ_j I_d`.
pub fn allocate_block_currents(lines: &[PgLine], blocks: &[BlockLoad]) -> Result<Allocation, ReliabilityError> {
    let mut line_currents = vec![0.0; lines.len()];
    let mut shares = Vec::new();
    let mut covering = Vec::new();
    for (j, block) in blocks.iter().enumerate() {
        covering.clear();
        covering.extend(
            lines
                .iter()
                .enumerate()
                .filter(|(_, l)| block.covered_by(l))
                .map(|(i, _)| i),
        );
        if covering.is_empty() {
            return Err(ReliabilityError::UncoveredBlock(j));
        }
        let each = block.i_d / covering.len() as f64;
        for &i in &covering {
            line_currents[i] += each;
            shares.push(CurrentShare {
                line: i,
                block: j,
                amps: each,
            });
        }
    }
    Ok(Allocation { line_currents, shares })
}

/// Uniform spacings closing the ring budget: `s = (W_core − Σw) / K`.
pub fn spacing_from_widths(widths: &[f64], core_width: f64) -> Result<Vec<f64>, ReliabilityError> {
    if widths.is_empty() {
        return Err(ReliabilityError::NoLines);
    }
    positive("core_width", core_width)?;
    for &w in widths {
        positive("width", w)?;
    }
    let total: f64 = widths.iter().sum();
    if total >= core_width {
        return Err(ReliabilityError::InfeasibleWidths { total, core_width });
    }
    let s = (core_width - total) / widths.len() as f64;
    Ok(vec![s; widths.len()])
}

/// CSV report `line_index,orientation,position,length,width,current,density,violated`.
pub fn write_reliability_csv<W: Write>(lines: &[PgLine], j_max: f64, mut out: W) -> io::Result<()> {
    writeln!(out, "line_index,orientation,position,length,width,current,density,violated")?;
    for l in lines {
        let em = em_check(l.current, l.width, j_max)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.index, l.orientation, l.position, l.length, l.width, l.current, em.density, em.violated
        )?;
    }
    Ok(())
}
