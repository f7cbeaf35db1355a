//! Reverse-link feedback: observations, the decode-outcome model, and label
//! harvesting for classifier training.
//!
//! A receiver answers every broadcast with an ACK or NAK. The transmitter
//! always measures the physical properties of that feedback signal (its
//! received power and SNR, plus known configuration), but the payload itself
//! may fail to decode. A failed feedback is either erased (nothing decoded)
//! or flipped (decoded to the opposite label).

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelMode, Modulation, PhysicalLink, ShadowingDraw, TerrainCategory};

/// Names of the canonical feature vector, in order.
pub const FEATURE_NAMES: [&str; 6] = ["distance", "noise", "terrain", "snr", "rx", "mod"];
pub const NUM_FEATURES: usize = FEATURE_NAMES.len();
/// Indices of categorical features in the canonical vector.
pub const CATEGORICAL_FEATURES: [usize; 2] = [2, 5];

pub const DEFAULT_FLIP_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("flip fraction {0} outside [0, 1]")]
    FlipFraction(f64),
    #[error("training csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("training csv line {line}: {message}")]
    Record { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AckState {
    Ack,
    Nak,
}

impl AckState {
    pub fn from_received(received: bool) -> Self {
        if received {
            Self::Ack
        } else {
            Self::Nak
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Self::Ack => Self::Nak,
            Self::Nak => Self::Ack,
        }
    }

    pub fn is_ack(self) -> bool {
        self == Self::Ack
    }
}

impl fmt::Display for AckState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ack => "ACK",
            Self::Nak => "NAK",
        })
    }
}

impl FromStr for AckState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ACK" | "ack" | "1" => Ok(Self::Ack),
            "NAK" | "nak" | "0" => Ok(Self::Nak),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecodeOutcome {
    Correct,
    Flipped,
    Erased,
}

/// What the transmitter believes after receiving one feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransmitterView {
    SawAck,
    SawNak,
    SawNothing,
}

impl TransmitterView {
    pub fn saw(state: AckState) -> Self {
        match state {
            AckState::Ack => Self::SawAck,
            AckState::Nak => Self::SawNak,
        }
    }
}

/// Physical-layer measurements of one feedback signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackFeatures {
    /// Meters.
    pub distance: f64,
    /// dBm.
    pub noise: f64,
    pub terrain: TerrainCategory,
    /// dB.
    pub snr: f64,
    /// dBm.
    pub rx: f64,
    pub modulation: Modulation,
}

impl FeedbackFeatures {
    /// Canonical numeric vector; categorical features become their codes.
    pub fn to_vector(&self) -> [f64; NUM_FEATURES] {
        [
            self.distance,
            self.noise,
            f64::from(self.terrain.code()),
            self.snr,
            self.rx,
            f64::from(self.modulation.code()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackObservation {
    pub features: FeedbackFeatures,
    pub true_state: AckState,
    pub decode_outcome: DecodeOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeedbackFeatures,
    pub label: AckState,
}

/// Reads the measured features of a feedback signal under one shadowing draw.
pub fn measure_features(sensing: &PhysicalLink, draw: &ShadowingDraw) -> FeedbackFeatures {
    let rx = sensing.received_power(draw);
    FeedbackFeatures {
        distance: sensing.geometry.distance,
        noise: sensing.budget.noise_floor,
        terrain: sensing.terrain.category,
        snr: rx - sensing.budget.noise_floor,
        rx,
        modulation: sensing.budget.modulation,
    }
}

/// Maps two uniforms to a decode outcome: the feedback fails when
/// `decode_u < per`, and a failed feedback flips when `flip_u < flip_fraction`.
pub fn decode_outcome(per: f64, flip_fraction: f64, decode_u: f64, flip_u: f64) -> DecodeOutcome {
    if decode_u >= per {
        DecodeOutcome::Correct
    } else if flip_u < flip_fraction {
        DecodeOutcome::Flipped
    } else {
        DecodeOutcome::Erased
    }
}

pub fn check_flip_fraction(flip_fraction: f64) -> Result<(), FeedbackError> {
    if (0.0..=1.0).contains(&flip_fraction) {
        Ok(())
    } else {
        Err(FeedbackError::FlipFraction(flip_fraction))
    }
}

/// Simulates one feedback transmission.
///
/// `reverse` decides whether the feedback payload decodes; `sensing` is the
/// physical link whose signal the transmitter measures. Consumes three
/// standard normals and then two uniforms.
pub fn generate_feedback<R: Rng + ?Sized>(
    data_received: bool,
    reverse: &ChannelMode,
    sensing: &PhysicalLink,
    flip_fraction: f64,
    rng: &mut R,
) -> FeedbackObservation {
    let draw = ShadowingDraw::sample(rng);
    let decode_u: f64 = rng.random();
    let flip_u: f64 = rng.random();
    generate_feedback_with(data_received, reverse, sensing, flip_fraction, &draw, decode_u, flip_u)
}

/// Deterministic core of [`generate_feedback`] for a given shadowing draw
/// and pair of uniforms.
pub fn generate_feedback_with(
    data_received: bool,
    reverse: &ChannelMode,
    sensing: &PhysicalLink,
    flip_fraction: f64,
    draw: &ShadowingDraw,
    decode_u: f64,
    flip_u: f64,
) -> FeedbackObservation {
    let per = reverse.error_prob(draw);
    FeedbackObservation {
        features: measure_features(sensing, draw),
        true_state: AckState::from_received(data_received),
        decode_outcome: decode_outcome(per, flip_fraction, decode_u, flip_u),
    }
}

pub fn transmitter_view(obs: &FeedbackObservation) -> TransmitterView {
    match obs.decode_outcome {
        DecodeOutcome::Correct => TransmitterView::saw(obs.true_state),
        DecodeOutcome::Flipped => TransmitterView::saw(obs.true_state.opposite()),
        DecodeOutcome::Erased => TransmitterView::SawNothing,
    }
}

/// Keeps only cleanly decoded feedback, labeled with its true state.
pub fn harvest_labels<'a, I>(observations: I) -> Vec<LabeledExample>
where
    I: IntoIterator<Item = &'a FeedbackObservation>,
{
    observations
        .into_iter()
        .filter(|o| o.decode_outcome == DecodeOutcome::Correct)
        .map(|o| LabeledExample {
            features: o.features,
            label: o.true_state,
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    distance: f64,
    noise: f64,
    terrain: u8,
    snr: f64,
    rx: f64,
    #[serde(rename = "mod")]
    modulation: u8,
    label: String,
}

/// Writes examples as `distance,noise,terrain,snr,rx,mod,label` with a
/// header row.
pub fn write_examples_csv<W: io::Write>(
    writer: W,
    examples: &[LabeledExample],
) -> Result<(), FeedbackError> {
    let mut w = csv::Writer::from_writer(writer);
    if examples.is_empty() {
        w.write_record(FEATURE_NAMES.iter().copied().chain(["label"]))?;
    }
    for ex in examples {
        let f = &ex.features;
        w.serialize(CsvRow {
            distance: f.distance,
            noise: f.noise,
            terrain: f.terrain.code(),
            snr: f.snr,
            rx: f.rx,
            modulation: f.modulation.code(),
            label: ex.label.to_string(),
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_examples_csv<R: io::Read>(reader: R) -> Result<Vec<LabeledExample>, FeedbackError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row?;
        let line = out.len() as u64 + 2;
        let bad = |message: String| FeedbackError::Record { line, message };
        let terrain = TerrainCategory::from_code(row.terrain)
            .ok_or_else(|| bad(format!("terrain code {}", row.terrain)))?;
        let modulation = Modulation::from_code(row.modulation)
            .ok_or_else(|| bad(format!("mod code {}", row.modulation)))?;
        let label = row.label.parse().map_err(bad)?;
        out.push(LabeledExample {
            features: FeedbackFeatures {
                distance: row.distance,
                noise: row.noise,
                terrain,
                snr: row.snr,
                rx: row.rx,
                modulation,
            },
            label,
        });
    }
    Ok(out)
}
