//! Effective throughput: average transmissions per packet per receiver.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::Scheme;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no trial records")]
    Empty,
    #[error("records mix configurations: {0}")]
    Mixed(String),
    #[error("every trial aborted ({0} records)")]
    AllAborted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scheme: Scheme,
    pub seed: u64,
    pub receivers: usize,
    pub packets: usize,
    /// Forward transmissions used.
    pub transmissions: u64,
    pub aborted: bool,
    pub scenario: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputResult {
    pub eta: f64,
    /// Completed trials aggregated.
    pub trials: usize,
    pub stderr: f64,
    pub aborted: usize,
}

impl ThroughputResult {
    /// `sqrt(se_a^2 + se_b^2)`, the standard error of a difference of two
    /// independent estimates.
    pub fn pooled_stderr(&self, other: &ThroughputResult) -> f64 {
        self.stderr.hypot(other.stderr)
    }
}

/// Aggregates records sharing one `(scheme, K, M, scenario)`.
pub fn effective_throughput(records: &[TrialRecord]) -> Result<ThroughputResult, MetricsError> {
    let first = records.first().ok_or(MetricsError::Empty)?;
    if let Some(r) = records.iter().find(|r| {
        (r.scheme, r.receivers, r.packets, &r.scenario)
            != (first.scheme, first.receivers, first.packets, &first.scenario)
    }) {
        return Err(MetricsError::Mixed(format!(
            "{} K={} M={} '{}' vs {} K={} M={} '{}'",
            first.scheme, first.receivers, first.packets, first.scenario,
            r.scheme, r.receivers, r.packets, r.scenario
        )));
    }
    let per_unit = (first.packets * first.receivers) as f64;
    let values: Vec<f64> = records
        .iter()
        .filter(|r| !r.aborted)
        .map(|r| r.transmissions as f64 / per_unit)
        .collect();
    let aborted = records.len() - values.len();
    if values.is_empty() {
        return Err(MetricsError::AllAborted(aborted));
    }
    let n = values.len() as f64;
    let eta = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - eta).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(ThroughputResult {
        eta,
        trials: values.len(),
        stderr,
        aborted,
    })
}

/// Writes per-trial rows: `scheme,seed,K,M,n,aborted,scenario`.
pub fn write_trial_csv<W: io::Write>(writer: W, records: &[TrialRecord]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "seed", "K", "M", "n", "aborted", "scenario"])?;
    for r in records {
        w.write_record([
            r.scheme.to_string(),
            r.seed.to_string(),
            r.receivers.to_string(),
            r.packets.to_string(),
            r.transmissions.to_string(),
            u8::from(r.aborted).to_string(),
            r.scenario.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
