use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WhiskerError {
    #[error("whisker statistics need at least 4 values, got {0}")]
    TooFewValues(usize),
    #[error("value is not finite")]
    NonFinite,
}

/// Box-plot summary with whiskers at `Q1 − 1.5·IQR` and `Q3 + 1.5·IQR`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhiskerStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub lower: f64,
    pub upper: f64,
    /// Values outside `[lower, upper]`, ascending.
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile (position `(n − 1)·p`) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi {
        return a;
    }
    (a + (b - a) * (pos - lo as f64)).clamp(a, b)
}

pub fn whisker_stats(values: &[f64]) -> Result<WhiskerStats, WhiskerError> {
    if values.len() < 4 {
        return Err(WhiskerError::TooFewValues(values.len()));
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(WhiskerError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lower = q1 - 1.5 * iqr;
    let upper = q3 + 1.5 * iqr;
    let outliers = sorted.iter().copied().filter(|v| *v < lower || *v > upper).collect();
    Ok(WhiskerStats {
        q1,
        median,
        q3,
        iqr,
        lower,
        upper,
        outliers,
    })
}
