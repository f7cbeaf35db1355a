use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ScenarioConfig, SweepAxis, SweepValue};
use super::{build_environment, derive_seed, generate_training_data, split_seed, train_classifier, training_seed, HarnessError};
use crate::learn::ClassifierModel;
use crate::metrics::{effective_throughput, MetricsError, ThroughputResult, TrialRecord};
use crate::protocol::{run_trial_record, Scheme, SchemeConfig};

/// Abort share above which a summary row is flagged.
pub const ABORT_FLAG_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// `None` runs the base scenario as a single point.
    pub axis: Option<SweepAxis>,
    pub values: Vec<SweepValue>,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    /// Sweep described by the config's `sweep_axis`, `sweep_values` and
    /// `schemes` keys. Duplicate schemes are dropped.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let mut schemes: Vec<Scheme> = Vec::new();
        for &s in &cfg.schemes {
            if !schemes.contains(&s) {
                schemes.push(s);
            }
        }
        if schemes.is_empty() {
            return Err(HarnessError::Usage(
                "no schemes selected; set 'schemes' to some of arq, arq-ml, nc, nc-ml".into(),
            ));
        }
        Ok(Self {
            axis: cfg.sweep_axis,
            values: cfg.sweep_values.clone(),
            schemes,
        })
    }

    fn points(&self, base: &ScenarioConfig) -> Vec<(String, String, ScenarioConfig)> {
        match self.axis {
            None => vec![("none".into(), String::new(), base.clone())],
            Some(axis) => self
                .values
                .iter()
                .map(|v| (axis.to_string(), v.to_string(), base.at(axis, v)))
                .collect(),
        }
    }
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: String,
    pub value: String,
    pub terrain: u8,
    pub distances: String,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    pub modulation: String,
    #[serde(rename = "K")]
    pub receivers: usize,
    #[serde(rename = "M")]
    pub packets: usize,
    pub channel: String,
    pub forward_p: f64,
    pub reverse_p: f64,
    pub flip_fraction: f64,
    pub scheme: Scheme,
    pub eta: f64,
    pub stderr: f64,
    #[serde(rename = "N")]
    pub trials: usize,
    pub aborted_count: usize,
    /// Validation accuracy of the classifier serving ML schemes.
    pub accuracy: Option<f64>,
    pub model: Option<String>,
    pub flagged: bool,
}

impl SummaryRow {
    pub fn throughput(&self) -> ThroughputResult {
        ThroughputResult {
            eta: self.eta,
            trials: self.trials,
            stderr: self.stderr,
            aborted: self.aborted_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Ordered by sweep value, then scheme.
    pub rows: Vec<SummaryRow>,
    /// Ordered by sweep value, scheme, trial index.
    pub records: Vec<TrialRecord>,
}

impl SweepOutcome {
    pub fn row(&self, value: &str, scheme: Scheme) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.value == value && r.scheme == scheme)
    }
}

/// Runs `cfg.trials` trials per sweep point and scheme.
///
/// ML schemes use `global_model` when given; otherwise a classifier is
/// trained per point on data generated under that point's configuration.
/// Trial `t` uses the seed `derive_seed(base_seed, t)` at every point and for
/// every scheme.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    global_model: Option<Arc<ClassifierModel>>,
) -> Result<SweepOutcome, HarnessError> {
    if spec.schemes.is_empty() {
        return Err(HarnessError::Usage("sweep needs at least one scheme".into()));
    }
    let needs_model = spec.schemes.iter().any(|s| s.uses_classifier());
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (index, (axis, value, point)) in spec.points(cfg).into_iter().enumerate() {
        let env = build_environment(&point)?;
        let model = match (&global_model, needs_model) {
            (_, false) => None,
            (Some(m), true) => Some(Arc::clone(m)),
            (None, true) => {
                let data = generate_training_data(&point, point.train_size, training_seed(cfg.base_seed, index))?;
                let selection = train_classifier(&point, &data.dataset, split_seed(cfg.base_seed, index))?;
                Some(Arc::new(selection.best))
            }
        };
        let scenario = if axis == "none" {
            "base".to_string()
        } else {
            format!("{axis}={value}")
        };
        for &scheme in &spec.schemes {
            let scheme_cfg = SchemeConfig {
                scheme,
                classifier: model.clone().filter(|_| scheme.uses_classifier()),
                policy: point.ml_policy,
                receivers: point.receivers,
                packets: point.packets,
                payload_bytes: point.payload_bytes,
                max_transmissions: point.max_transmissions,
            };
            let batch: Vec<TrialRecord> = (0..point.trials as u64)
                .into_par_iter()
                .map(|t| {
                    run_trial_record(&scheme_cfg, &env, derive_seed(cfg.base_seed, t)).map(|mut r| {
                        r.scenario = scenario.clone();
                        r
                    })
                })
                .collect::<Result<_, _>>()?;
            let tp = match effective_throughput(&batch) {
                Ok(tp) => tp,
                Err(MetricsError::AllAborted(n)) => ThroughputResult {
                    eta: f64::NAN,
                    trials: 0,
                    stderr: f64::NAN,
                    aborted: n,
                },
                Err(e) => return Err(e.into()),
            };
            let ml_model = scheme_cfg.classifier.as_deref();
            rows.push(SummaryRow {
                axis: axis.clone(),
                value: value.clone(),
                terrain: point.terrain.code(),
                distances: point.distances.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";"),
                tx_power_dbm: point.tx_power_dbm,
                noise_floor_dbm: point.noise_floor_dbm,
                modulation: point.modulation.name().to_string(),
                receivers: point.receivers,
                packets: point.packets,
                channel: point.channel.name().to_string(),
                forward_p: point.forward_p,
                reverse_p: point.reverse_p,
                flip_fraction: point.flip_fraction,
                scheme,
                eta: tp.eta,
                stderr: tp.stderr,
                trials: tp.trials,
                aborted_count: tp.aborted,
                accuracy: ml_model.map(|m| m.validation_accuracy),
                model: ml_model.map(|m| m.family.name().to_string()),
                flagged: tp.aborted as f64 > ABORT_FLAG_RATE * batch.len() as f64,
            });
            records.extend(batch);
        }
    }
    Ok(SweepOutcome { rows, records })
}

pub fn write_summary_csv<W: io::Write>(writer: W, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
