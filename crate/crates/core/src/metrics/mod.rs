//! Evaluation: error metrics, error histogram, IR-drop rasters, timing and
//! the JSON evaluation report.

mod raster;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::format_value;

pub use raster::{ir_map, write_pgm, write_raster_csv, Aggregation, IrMap};

pub const DEFAULT_BINS: usize = 50;
/// Shortest prediction time accepted by [`timing_report`], seconds.
pub const TIMING_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("histogram needs at least one bin")]
    InvalidBins,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("node `{0}` has no layout coordinates")]
    NoCoordinates(String),
    #[error("invalid timing: {0}")]
    InvalidTiming(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MetricsError {
    pub fn code(&self) -> &'static str {
        match self {
            MetricsError::EmptyInput => "EmptyInput",
            MetricsError::LengthMismatch(..) => "LengthMismatch",
            MetricsError::InvalidBins => "InvalidBins",
            MetricsError::ZeroVariance => "ZeroVariance",
            MetricsError::NoCoordinates(_) => "NoCoordinates",
            MetricsError::InvalidTiming(_) => "InvalidTiming",
            MetricsError::Io(_) => "Io",
        }
    }
}

fn paired(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(y: &[f64], y_pred: &[f64]) -> Result<f64, MetricsError> {
    paired(y, y_pred)?;
    Ok(y.iter().zip(y_pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    paired(a, b)?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Uniform bins over `[min, max]` of the signed errors; the last bin is
/// closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// First bin with the largest count.
    pub fn modal_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    pub fn bin_contains(&self, bin: usize, v: f64) -> bool {
        let (l, r) = (self.edges[bin], self.edges[bin + 1]);
        l <= v && (v < r || (bin + 1 == self.counts.len() && v <= r))
    }
}

/// Histogram of `y_pred − y`. A zero-width error range is widened to
/// `[e − 0.5, e + 0.5]`.
pub fn error_histogram(y: &[f64], y_pred: &[f64], bins: usize) -> Result<Histogram, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::InvalidBins);
    }
    paired(y, y_pred)?;
    let errors: Vec<f64> = y.iter().zip(y_pred).map(|(a, b)| b - a).collect();
    let mut lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    edges[bins] = hi;
    let mut counts = vec![0usize; bins];
    for e in errors {
        let mut k = (((e - lo) / (hi - lo)) * bins as f64).floor() as usize;
        k = k.min(bins - 1);
        // keep the bin consistent with the stored edges under rounding
        while k > 0 && e < edges[k] {
            k -= 1;
        }
        while k + 1 < bins && e >= edges[k + 1] {
            k += 1;
        }
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub conventional_seconds: f64,
    pub dl_seconds: f64,
    pub speedup: f64,
}

/// Speedup of the prediction path over one conventional analysis (the
/// conventional figure is a single pass of the design loop, its best case).
pub fn timing_report(conventional_seconds: f64, dl_seconds: f64) -> Result<Timing, MetricsError> {
    if !(conventional_seconds >= 0.0 && conventional_seconds.is_finite()) {
        return Err(MetricsError::InvalidTiming(format!("conventional time {conventional_seconds}")));
    }
    if !(dl_seconds >= TIMING_FLOOR && dl_seconds.is_finite()) {
        return Err(MetricsError::InvalidTiming(format!(
            "prediction time {dl_seconds} s is below the {TIMING_FLOOR} s floor"
        )));
    }
    Ok(Timing {
        conventional_seconds,
        dl_seconds,
        speedup: conventional_seconds / dl_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Widths in physical units.
    pub mse: f64,
    /// Widths on the training normalizer's scale.
    pub mse_normalized: Option<f64>,
    pub r2: f64,
    pub worst_case_ir_conventional: Option<f64>,
    pub worst_case_ir_predicted: Option<f64>,
    pub histogram: Histogram,
    pub timing: Option<Timing>,
    pub peak_memory_mib: Option<f64>,
}

impl EvalReport {
    pub fn to_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}

/// Peak resident set size of this process (`VmHWM`), when the platform
/// reports it.
pub fn peak_memory_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib / 1024.0)
}

/// `golden_width,predicted_width`.
pub fn write_scatter_csv<W: Write>(golden: &[f64], predicted: &[f64], mut out: W) -> Result<(), MetricsError> {
    if golden.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(golden.len(), predicted.len()));
    }
    writeln!(out, "golden_width,predicted_width")?;
    for (g, p) in golden.iter().zip(predicted) {
        writeln!(out, "{},{}", format_value(*g), format_value(*p))?;
    }
    Ok(())
}

/// `bin_left,bin_right,count`.
pub fn write_histogram_csv<W: Write>(h: &Histogram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_left,bin_right,count")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{}", format_value(h.edges[k]), format_value(h.edges[k + 1]), c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((mse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(mse(&[], &[]), Err(MetricsError::EmptyInput)));
        assert!(matches!(mse(&[1.0], &[]), Err(MetricsError::LengthMismatch(1, 0))));
    }

    #[test]
    fn histogram_examples() {
        let h = error_histogram(&[3.0; 7], &[3.0; 7], DEFAULT_BINS).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[h.modal_bin()], 7);
        assert!(h.bin_contains(h.modal_bin(), 0.0));

        let h = error_histogram(&[0.0, 0.0], &[-1.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.edges, vec![-1.0, 0.0, 1.0]);
        assert!(matches!(error_histogram(&[0.0], &[0.0], 0), Err(MetricsError::InvalidBins)));
        assert!(matches!(
            error_histogram(&[], &[], 3),
            Err(MetricsError::EmptyInput)
        ));
    }

    #[test]
    fn timing_examples() {
        let t = timing_report(74.80, 12.74).unwrap();
        assert!((t.speedup - 5.87).abs() < 5e-3);
        assert_eq!(t.speedup, 74.80 / 12.74);
        assert_eq!(timing_report(2.5, 2.5).unwrap().speedup, 1.0);
        assert!(timing_report(1.0, 0.0).is_err());
        assert!(timing_report(1.0, 5e-7).is_err());
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricsError::ZeroVariance)));
    }

    #[test]
    fn csv_writers() {
        let mut buf = Vec::new();
        write_scatter_csv(&[1.0, 2.5], &[1.25, 2.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "golden_width,predicted_width\n1,1.25\n2.5,2\n");
        let h = error_histogram(&[0.0, 0.0], &[-1.0, 1.0], 2).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&h, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bin_left,bin_right,count\n-1,0,1\n0,1,1\n");
    }

    #[test]
    fn report_json_and_memory() {
        let r = EvalReport {
            mse: 0.5,
            mse_normalized: None,
            r2: 0.9,
            worst_case_ir_conventional: Some(0.07),
            worst_case_ir_predicted: Some(0.06),
            histogram: error_histogram(&[0.0], &[0.0], 2).unwrap(),
            timing: Some(timing_report(2.0, 1.0).unwrap()),
            peak_memory_mib: None,
        };
        let mut buf = Vec::new();
        r.to_json(&mut buf).unwrap();
        let back: EvalReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, r);
        if cfg!(target_os = "linux") {
            assert!(peak_memory_mib().unwrap() > 0.0);
        }
    }

    proptest! {
        #[test]
        fn histogram_conserves_counts(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..200),
            bins in 1usize..80,
        ) {
            let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let h = error_histogram(&y, &p, bins).unwrap();
            prop_assert_eq!(h.total(), y.len());
            for (a, b) in y.iter().zip(&p) {
                let e = b - a;
                prop_assert!((0..bins).any(|k| h.bin_contains(k, e)));
            }
        }

        #[test]
        fn mse_zero_iff_equal(v in prop::collection::vec(-1e3f64..1e3, 1..50), k in 0usize..50, d in 1e-3f64..1.0) {
            prop_assert_eq!(mse(&v, &v).unwrap(), 0.0);
            let mut w = v.clone();
            let k = k % w.len();
            w[k] += d;
            prop_assert!(mse(&v, &w).unwrap() > 0.0);
        }

        #[test]
        fn speedup_is_quotient(c in 0.0f64..1e3, d in 1e-6f64..1e3) {
            let t = timing_report(c, d).unwrap();
            prop_assert!((t.speedup - c / d).abs() <= 1e-12 * (c / d).max(1.0));
        }
    }
}
