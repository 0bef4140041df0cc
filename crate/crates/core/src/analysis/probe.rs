use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::read_csv;

pub const PROBE_FILE: &str = "bnn_probe.csv";

/// Model error on the same replay sample with latents from the value network
/// before and after one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub epoch: usize,
    pub error_before: f64,
    pub error_after: f64,
    /// 1 when the update lowered the error.
    pub improved: u8,
}

impl ProbeRow {
    pub fn new(epoch: usize, error_before: f64, error_after: f64) -> Self {
        Self {
            epoch,
            error_before,
            error_after,
            improved: (error_after < error_before) as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub rows: usize,
    pub improving: usize,
    /// Epochs counted as the early phase: the first quarter of training.
    pub early_epochs: usize,
    pub early_rows: usize,
    pub early_improving: usize,
    pub early_fraction: Option<f64>,
}

pub fn read_probe(path: &Path) -> Result<Vec<ProbeRow>> {
    read_csv(path)
}

/// Counts improving updates overall and within the first quarter of
/// `total_epochs`.
pub fn summarize_probe(rows: &[ProbeRow], total_epochs: usize) -> ProbeSummary {
    let early_epochs = total_epochs.div_ceil(4);
    let early: Vec<&ProbeRow> = rows.iter().filter(|r| r.epoch < early_epochs).collect();
    let early_improving = early.iter().filter(|r| r.improved == 1).count();
    ProbeSummary {
        rows: rows.len(),
        improving: rows.iter().filter(|r| r.improved == 1).count(),
        early_epochs,
        early_rows: early.len(),
        early_improving,
        early_fraction: (!early.is_empty()).then(|| early_improving as f64 / early.len() as f64),
    }
}
