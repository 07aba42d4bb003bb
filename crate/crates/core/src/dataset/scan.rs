use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};

/// `1 − SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64, DatasetError> {
    if y_true.len() != y_pred.len() {
        return Err(DatasetError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(DatasetError::EmptyDataset);
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(DatasetError::DegenerateTarget);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// In-sample r² of an ordinary least-squares fit with intercept.
pub fn ols_r2(columns: &[Vec<f64>], target: &[f64]) -> Result<f64, DatasetError> {
    let n = target.len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(DatasetError::LengthMismatch(c.len(), n));
    }
    // centering the columns removes the intercept from the system and keeps
    // it well conditioned
    let center = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
        v.iter().map(|x| x - m).collect::<Vec<_>>()
    };
    let mut a = DMatrix::<f64>::zeros(n, columns.len());
    for (j, c) in columns.iter().enumerate() {
        let c = center(c);
        let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..n {
            a[(i, j)] = if scale > 0.0 { c[i] / scale } else { 0.0 };
        }
    }
    let yc = DVector::from_vec(center(target));
    let fitted = if columns.is_empty() {
        DVector::zeros(n)
    } else {
        let beta = a
            .clone()
            .svd(true, true)
            .solve(&yc, 1e-12)
            .map_err(|e| DatasetError::InvalidParameter(e.to_string()))?;
        &a * beta
    };
    let mean = target.iter().sum::<f64>() / n.max(1) as f64;
    let pred: Vec<f64> = fitted.iter().map(|f| f + mean).collect();
    r2_score(target, &pred)
}

/// Least-squares r² of the width on each feature alone and on all three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScan {
    pub x: f64,
    pub y: f64,
    pub i_d: f64,
    pub combined: f64,
}

pub fn feature_scan(dataset: &Dataset) -> Result<FeatureScan, DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let col = |f: fn(&super::Sample) -> f64| dataset.samples.iter().map(f).collect::<Vec<_>>();
    let (x, y, i_d, w) = (col(|s| s.x), col(|s| s.y), col(|s| s.i_d), col(|s| s.w));
    Ok(FeatureScan {
        x: ols_r2(std::slice::from_ref(&x), &w)?,
        y: ols_r2(std::slice::from_ref(&y), &w)?,
        i_d: ols_r2(std::slice::from_ref(&i_d), &w)?,
        combined: ols_r2(&[x, y, i_d], &w)?,
    })
}
