//! Retransmission schemes: plain ARQ, XOR-coded repair, and their variants
//! that trust a classifier instead of the decoded feedback.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod coding;
pub mod link;
pub mod state_map;
pub mod trial;

pub use coding::{xor_combine, CodedPacket, Packet, ReceiverState};
pub use link::{Environment, LossScript, ReceiverLink, SlotDraw};
pub use state_map::{select_combination, CellState, PacketStateMap};
pub use trial::{
    run_trial, run_trial_record, run_trial_traced, Phase, SchemeConfig, TraceEvent, TrialError,
    DEFAULT_MAX_TRANSMISSIONS, DEFAULT_PACKETS, DEFAULT_PAYLOAD_BYTES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("cannot combine an empty list of packets")]
    EmptyCombination,
    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("combination cancels to an empty constituent set")]
    Degenerate,
    #[error("no receiver is missing any packet")]
    NothingLost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Arq,
    ArqMl,
    Nc,
    NcMl,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Arq, Scheme::ArqMl, Scheme::Nc, Scheme::NcMl];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Arq => "arq",
            Scheme::ArqMl => "arq-ml",
            Scheme::Nc => "nc",
            Scheme::NcMl => "nc-ml",
        }
    }

    pub fn uses_classifier(self) -> bool {
        matches!(self, Scheme::ArqMl | Scheme::NcMl)
    }

    pub fn uses_coding(self) -> bool {
        matches!(self, Scheme::Nc | Scheme::NcMl)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme '{0}' (expected arq, arq-ml, nc or nc-ml)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

/// How ML schemes turn a feedback observation into a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FeedbackPolicy {
    /// Always use the classifier's prediction.
    #[default]
    Predicted,
    /// Use decoded feedback when it decodes, the classifier only on erasures.
    Hybrid,
}

impl FeedbackPolicy {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackPolicy::Predicted => "predicted",
            FeedbackPolicy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for FeedbackPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeedbackPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "predicted" => Ok(FeedbackPolicy::Predicted),
            "hybrid" => Ok(FeedbackPolicy::Hybrid),
            other => Err(format!("unknown feedback policy '{other}' (expected predicted or hybrid)")),
        }
    }
}
