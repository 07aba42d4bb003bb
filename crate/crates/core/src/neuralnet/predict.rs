use serde::{Deserialize, Serialize};

use super::{MlpModel, NeuralError};
use crate::floorplan::LineLookup;
use crate::netlist::PowerGridNetlist;
use crate::reliability::{
    allocate_block_currents, em_check, pg_line_count, spacing_from_widths, Allocation, BlockLoad, EmCheck,
    Orientation, PgLine, SizingParams,
};

/// Anything that maps raw `(x, y, I_d)` features to physical widths.
pub trait WidthModel {
    fn predict_widths(&self, features: &[[f64; 3]]) -> Result<Vec<f64>, NeuralError>;

    /// Smallest width seen in training, if known.
    fn min_training_width(&self) -> Option<f64> {
        None
    }
}

impl WidthModel for MlpModel {
    fn predict_widths(&self, features: &[[f64; 3]]) -> Result<Vec<f64>, NeuralError> {
        self.predict_widths_raw(features)
    }

    fn min_training_width(&self) -> Option<f64> {
        self.normalizer.map(|n| n.min[3])
    }
}

/// Returns fixed widths, one per query in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactWidths(pub Vec<f64>);

impl WidthModel for ExactWidths {
    fn predict_widths(&self, features: &[[f64; 3]]) -> Result<Vec<f64>, NeuralError> {
        if features.len() != self.0.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} widths for {} queries",
                self.0.len(),
                features.len()
            )));
        }
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PredictOptions {
    /// Predictions at or below this width are clamped to it. Defaults to 1%
    /// of the model's smallest training width.
    pub w_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrPrediction {
    pub widths: Vec<f64>,
    pub currents: Vec<f64>,
    pub resistances: Vec<f64>,
    /// `I_i · R_i` per line, volts.
    pub drops: Vec<f64>,
    pub worst_case: f64,
    pub worst_line: Option<usize>,
    /// `⌊W_core / mean ŵ⌋`.
    pub line_count: usize,
    pub em: Vec<EmCheck>,
    pub em_violations: usize,
    /// Uniform spacings per line when the ring budget fits.
    pub spacings: Option<Vec<f64>>,
    /// Number of predictions raised to `w_min`.
    pub clamped: usize,
    #[serde(skip)]
    pub allocation: Allocation,
}

/// `(midpoint x, midpoint y, I_i)` per line.
pub fn line_features(lines: &[PgLine], currents: &[f64]) -> Vec<[f64; 3]> {
    lines
        .iter()
        .zip(currents)
        .map(|(l, &i)| {
            let (x, y) = l.midpoint();
            [x, y, i]
        })
        .collect()
}

/// Per-line IR drop from predicted widths: allocate block currents to lines,
/// predict each line's width, then `R_i = ρ·l_i/ŵ_i` and `V_i = I_i·R_i`.
pub fn predict_ir_drop(
    model: &dyn WidthModel,
    blocks: &[BlockLoad],
    sizing: &SizingParams,
    lines: &[PgLine],
    opts: &PredictOptions,
) -> Result<IrPrediction, NeuralError> {
    sizing.validate()?;
    let allocation = allocate_block_currents(lines, blocks)?;
    let currents = allocation.line_currents.clone();
    let mut widths = model.predict_widths(&line_features(lines, &currents))?;
    let w_min = opts
        .w_min
        .or_else(|| model.min_training_width().map(|w| 0.01 * w))
        .filter(|w| *w > 0.0)
        .unwrap_or(1e-12);
    let mut clamped = 0;
    for w in &mut widths {
        if !(*w > w_min) {
            *w = w_min;
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} predicted widths clamped to {w_min}");
    }

    let resistances: Vec<f64> = lines
        .iter()
        .zip(&widths)
        .map(|(l, w)| sizing.rho * l.length / w)
        .collect();
    let drops: Vec<f64> = currents.iter().zip(&resistances).map(|(i, r)| i * r).collect();
    let (worst_line, worst_case) = drops
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0), |(bi, bv), (i, v)| if bi.is_none() || v > bv { (Some(i), v) } else { (bi, bv) });
    let em = currents
        .iter()
        .zip(&widths)
        .map(|(&i, &w)| em_check(i, w, sizing.j_max))
        .collect::<Result<Vec<_>, _>>()?;
    let em_violations = em.iter().filter(|e| e.violated).count();
    let line_count = if widths.is_empty() {
        0
    } else {
        pg_line_count(sizing.core_width, widths.iter().sum::<f64>() / widths.len() as f64)?
    };

    let mut spacings = vec![0.0; lines.len()];
    let mut fits = !lines.is_empty();
    for o in [Orientation::Horizontal, Orientation::Vertical] {
        let idx: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].orientation == o).collect();
        if idx.is_empty() {
            continue;
        }
        let ws: Vec<f64> = idx.iter().map(|&i| widths[i]).collect();
        match spacing_from_widths(&ws, sizing.core_width) {
            Ok(s) => idx.iter().zip(s).for_each(|(&i, s)| spacings[i] = s),
            Err(e) => {
                log::warn!("{o} lines: {e}");
                fits = false;
            }
        }
    }

    Ok(IrPrediction {
        widths,
        currents,
        resistances,
        drops,
        worst_case,
        worst_line,
        line_count,
        em,
        em_violations,
        spacings: fits.then_some(spacings),
        clamped,
        allocation,
    })
}

/// Node-level drop estimate from a prediction, without a global solve.
///
/// Every line is treated as an independent resistive chain through the
/// netlist nodes lying on it, with segment resistance `ρ·Δ/ŵ_i`. Pads on the
/// line hold zero drop; a line without pads is fed from both ends. Each
/// block's share of the line current is drawn evenly from the line nodes
/// inside the block's span. A node on a horizontal and a vertical line takes
/// the geometric mean of the two chain drops, so the estimate peaks where
/// loaded lines cross and fades along lines that run away from the load.
pub fn node_drop_estimate(
    netlist: &PowerGridNetlist,
    lines: &[PgLine],
    blocks: &[BlockLoad],
    prediction: &IrPrediction,
    rho: f64,
) -> Vec<f64> {
    let n = netlist.nodes().len();
    let lookup = LineLookup::new(lines);
    let mut on_line: Vec<Vec<(f64, usize)>> = vec![Vec::new(); lines.len()];
    for node in netlist.nodes() {
        let Some(c) = node.coord else { continue };
        if let Some(i) = lookup.line(Orientation::Horizontal, c.y) {
            on_line[i].push((c.x as f64, node.id));
        }
        if let Some(i) = lookup.line(Orientation::Vertical, c.x) {
            on_line[i].push((c.y as f64, node.id));
        }
    }
    let pads = netlist.pad_per_node();

    let mut chain_drop = vec![[None::<f64>; 2]; n];
    let mut inject: Vec<Vec<f64>> = on_line.iter().map(|v| vec![0.0; v.len()]).collect();
    for (i, nodes) in on_line.iter_mut().enumerate() {
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (s, e) = lines[i].extent();
        nodes.retain(|(p, _)| *p >= s && *p <= e);
        inject[i].truncate(nodes.len());
    }
    for share in &prediction.allocation.shares {
        let nodes = &on_line[share.line];
        if nodes.is_empty() {
            continue;
        }
        let (a, b) = blocks[share.block].parallel_span(lines[share.line].orientation);
        let first = nodes.partition_point(|(p, _)| *p < a);
        let last = nodes.partition_point(|(p, _)| *p <= b);
        if first < last {
            let each = share.amps / (last - first) as f64;
            inject[share.line][first..last].iter_mut().for_each(|v| *v += each);
        } else {
            let mid = 0.5 * (a + b);
            let k = (0..nodes.len())
                .min_by(|&x, &y| (nodes[x].0 - mid).abs().total_cmp(&(nodes[y].0 - mid).abs()))
                .expect("non-empty");
            inject[share.line][k] += share.amps;
        }
    }

    for (i, nodes) in on_line.iter().enumerate() {
        let m = nodes.len();
        if m == 0 {
            continue;
        }
        let mut pinned: Vec<bool> = nodes.iter().map(|(_, id)| pads[*id].is_some()).collect();
        if !pinned.iter().any(|&p| p) {
            pinned[0] = true;
            pinned[m - 1] = true;
        }
        let g: Vec<f64> = nodes
            .windows(2)
            .map(|w| prediction.widths[i] / (rho * (w[1].0 - w[0].0).max(1e-9)))
            .collect();
        let drops = solve_chain(&g, &inject[i], &pinned);
        let side = (lines[i].orientation == Orientation::Vertical) as usize;
        for (&(_, id), d) in nodes.iter().zip(drops) {
            chain_drop[id][side] = Some(d);
        }
    }
    chain_drop
        .iter()
        .map(|hv| match *hv {
            [Some(h), Some(v)] => (h.max(0.0) * v.max(0.0)).sqrt(),
            [Some(d), None] | [None, Some(d)] => d,
            [None, None] => 0.0,
        })
        .collect()
}

/// Tridiagonal solve of a resistive chain: `g[k]` joins nodes `k` and `k+1`,
/// `sink[k]` is drawn at node `k`, pinned nodes stay at zero.
fn solve_chain(g: &[f64], sink: &[f64], pinned: &[bool]) -> Vec<f64> {
    let m = sink.len();
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        if pinned[k] {
            diag[k] = 1.0;
            continue;
        }
        if k > 0 {
            diag[k] += g[k - 1];
            lower[k] = -g[k - 1];
        }
        if k + 1 < m {
            diag[k] += g[k];
            upper[k] = -g[k];
        }
        rhs[k] = sink[k];
    }
    // Thomas algorithm; the system is diagonally dominant
    for k in 1..m {
        let f = lower[k] / diag[k - 1];
        diag[k] -= f * upper[k - 1];
        rhs[k] -= f * rhs[k - 1];
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let next = if k + 1 < m { upper[k] * x[k + 1] } else { 0.0 };
        x[k] = (rhs[k] - next) / diag[k];
    }
    x
}
