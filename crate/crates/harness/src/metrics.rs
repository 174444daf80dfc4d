use serde::{Deserialize, Serialize};

use bifid_core::Error;

/// Normalized error `√(Σ(y − ŷ)² / Σ y²)`.
pub fn rmse(predictions: &[f64], truth: &[f64]) -> Result<f64, Error> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape {
            what: "predictions",
            expected: truth.len(),
            found: predictions.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Config("rmse needs at least one sample".into()));
    }
    let den: f64 = truth.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(Error::UndefinedNormalization);
    }
    let num: f64 = predictions.iter().zip(truth).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

pub const HISTOGRAM_BINS: usize = 12;

/// Counts of `values` in equal-width bins of `log10(value)` spanning the
/// observed range; edges are reported on the original scale.
pub fn log_histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let logs: Vec<f64> = values.iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
    if logs.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &logs {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_left: 10f64.powf(lo + k as f64 * width),
            bin_right: 10f64.powf(lo + (k + 1) as f64 * width),
            count,
        })
        .collect()
}

/// Per-replicate errors with their mean, sample standard deviation and
/// log-scale histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub method: String,
    pub rmses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub histogram: Vec<HistogramBin>,
}

impl ReplicationSummary {
    pub fn new(method: impl Into<String>, rmses: Vec<f64>) -> Self {
        let n = rmses.len() as f64;
        let mean = rmses.iter().sum::<f64>() / n;
        let std = if rmses.len() > 1 {
            (rmses.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let histogram = log_histogram(&rmses, HISTOGRAM_BINS);
        Self {
            method: method.into(),
            rmses,
            mean,
            std,
            histogram,
        }
    }
}
