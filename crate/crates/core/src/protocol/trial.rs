//! One broadcast trial under each of the four schemes.
//!
//! A trial runs in rounds. Within a round the transmitter acts only on its
//! per-transmission beliefs (decoded feedback or classifier predictions).
//! When it believes every receiver is served, the round ends with a
//! cumulative status report from each receiver, delivered reliably; a
//! receiver still missing packets (because a NAK was flipped into an ACK, or
//! a prediction was wrong) starts another round with an exact state map.
//! The status report costs no forward transmissions.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::coding::{xor_combine, CodedPacket, Packet, ReceiverState};
use super::link::Environment;
use super::state_map::{select_combination, CellState, PacketStateMap};
use super::{FeedbackPolicy, ProtocolError, Scheme};
use crate::feedback::{transmitter_view, DecodeOutcome, FeedbackObservation, TransmitterView};
use crate::learn::ClassifierModel;
use crate::metrics::TrialRecord;

pub const DEFAULT_PACKETS: usize = 32;
pub const DEFAULT_PAYLOAD_BYTES: usize = 128;
pub const DEFAULT_MAX_TRANSMISSIONS: u64 = 10_000;

const PAYLOAD_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("transmission cap of {0} exceeded")]
    CapExceeded(u64),
    #[error("scheme {0} needs a trained classifier")]
    MissingClassifier(Scheme),
    #[error("invalid trial configuration: {0}")]
    Invalid(String),
    #[error("receiver {receiver} decoded packet {packet} incorrectly")]
    Corrupt { receiver: usize, packet: usize },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub classifier: Option<Arc<ClassifierModel>>,
    pub policy: FeedbackPolicy,
    pub receivers: usize,
    pub packets: usize,
    pub payload_bytes: usize,
    pub max_transmissions: u64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, receivers: usize, packets: usize) -> Self {
        Self {
            scheme,
            classifier: None,
            policy: FeedbackPolicy::Predicted,
            receivers,
            packets,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            max_transmissions: DEFAULT_MAX_TRANSMISSIONS,
        }
    }

    pub fn with_classifier(mut self, model: Arc<ClassifierModel>) -> Self {
        self.classifier = Some(model);
        self
    }

    pub fn validate(&self, env: &Environment) -> Result<(), TrialError> {
        if self.receivers == 0 || self.packets == 0 {
            return Err(TrialError::Invalid("need K >= 1 and M >= 1".into()));
        }
        if env.receivers() != self.receivers {
            return Err(TrialError::Invalid(format!(
                "environment has {} receiver links, configuration has K={}",
                env.receivers(),
                self.receivers
            )));
        }
        if self.scheme.uses_classifier() && self.classifier.is_none() {
            return Err(TrialError::MissingClassifier(self.scheme));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Stop-and-wait ARQ.
    Arq,
    /// First pass over all packets of a coded scheme.
    Transmission,
    /// Coded repair transmissions.
    Retransmission,
}

/// One forward transmission and its per-receiver consequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub slot: u64,
    pub round: usize,
    pub phase: Phase,
    pub constituents: Vec<usize>,
    pub delivered: Vec<bool>,
    pub outcomes: Vec<DecodeOutcome>,
    pub views: Vec<TransmitterView>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phase = match self.phase {
            Phase::Arq => "arq",
            Phase::Transmission => "tx",
            Phase::Retransmission => "retx",
        };
        let pkts: Vec<String> = self.constituents.iter().map(|c| c.to_string()).collect();
        write!(f, "slot={} round={} phase={} packets={}", self.slot, self.round, phase, pkts.join("^"))?;
        for (r, ((d, o), v)) in self.delivered.iter().zip(&self.outcomes).zip(&self.views).enumerate() {
            let view = match v {
                TransmitterView::SawAck => "ACK",
                TransmitterView::SawNak => "NAK",
                TransmitterView::SawNothing => "none",
            };
            write!(
                f,
                " R{}:{}/{:?}/{}",
                r + 1,
                if *d { "rx" } else { "lost" },
                o,
                view
            )?;
        }
        Ok(())
    }
}

struct Trial<'a> {
    cfg: &'a SchemeConfig,
    env: &'a Environment,
    rng: ChaCha8Rng,
    receivers: Vec<ReceiverState>,
    packets: Vec<Packet>,
    sent: Vec<bool>,
    transmissions: u64,
    round: usize,
    trace: Option<Vec<TraceEvent>>,
}

impl<'a> Trial<'a> {
    fn new(cfg: &'a SchemeConfig, env: &'a Environment, seed: u64, traced: bool) -> Self {
        let mut payload_rng = ChaCha8Rng::seed_from_u64(seed ^ PAYLOAD_STREAM);
        let packets = (0..cfg.packets)
            .map(|id| {
                let mut payload = vec![0u8; cfg.payload_bytes];
                payload_rng.fill_bytes(&mut payload);
                Packet { id, payload }
            })
            .collect();
        Self {
            cfg,
            env,
            rng: ChaCha8Rng::seed_from_u64(seed),
            receivers: vec![ReceiverState::new(); cfg.receivers],
            packets,
            sent: vec![false; cfg.packets],
            transmissions: 0,
            round: 1,
            trace: traced.then(Vec::new),
        }
    }

    fn belief(&self, obs: &FeedbackObservation) -> TransmitterView {
        let predicted = || {
            let model = self.cfg.classifier.as_ref().expect("validated");
            TransmitterView::saw(model.predict(&obs.features))
        };
        if !self.cfg.scheme.uses_classifier() {
            return transmitter_view(obs);
        }
        match self.cfg.policy {
            FeedbackPolicy::Predicted => predicted(),
            FeedbackPolicy::Hybrid => match obs.decode_outcome {
                DecodeOutcome::Erased => predicted(),
                _ => transmitter_view(obs),
            },
        }
    }

    /// Sends one packet to everybody and returns the transmitter's belief
    /// about each receiver.
    fn broadcast(&mut self, coded: &CodedPacket, phase: Phase) -> Result<Vec<TransmitterView>, TrialError> {
        if self.transmissions >= self.cfg.max_transmissions {
            return Err(TrialError::CapExceeded(self.cfg.max_transmissions));
        }
        self.transmissions += 1;
        let first_of = match coded.constituents.first() {
            Some(&m) if coded.constituents.len() == 1 && !self.sent[m] => {
                self.sent[m] = true;
                Some(m)
            }
            _ => None,
        };
        let draws = self.env.draw_slot(&mut self.rng);
        let k = self.receivers.len();
        let mut views = Vec::with_capacity(k);
        let mut delivered = Vec::with_capacity(k);
        let mut outcomes = Vec::with_capacity(k);
        for (r, draw) in draws.iter().enumerate() {
            let ok = self.env.forward_ok(first_of, r, draw);
            if ok {
                self.receivers[r].try_decode(coded.clone());
            }
            let ack = self.receivers[r].has_all(&coded.constituents);
            let obs = self.env.feedback(r, ack, draw);
            views.push(self.belief(&obs));
            delivered.push(ok);
            outcomes.push(obs.decode_outcome);
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                slot: self.transmissions,
                round: self.round,
                phase,
                constituents: coded.constituents.iter().copied().collect(),
                delivered,
                outcomes,
                views: views.clone(),
            });
        }
        Ok(views)
    }

    fn complete(&self) -> bool {
        self.receivers.iter().all(|r| r.count() == self.cfg.packets)
    }

    fn run_arq(&mut self) -> Result<(), TrialError> {
        let k = self.cfg.receivers;
        let mut outstanding: Vec<BTreeSet<usize>> = vec![(0..k).collect(); self.cfg.packets];
        loop {
            for (m, pending) in outstanding.iter_mut().enumerate() {
                let coded = CodedPacket::from(&self.packets[m]);
                while !pending.is_empty() {
                    let views = self.broadcast(&coded, Phase::Arq)?;
                    pending.retain(|&r| views[r] != TransmitterView::SawAck);
                }
            }
            if self.complete() {
                return Ok(());
            }
            self.round += 1;
            for (m, pending) in outstanding.iter_mut().enumerate() {
                *pending = (0..k).filter(|&r| !self.receivers[r].has(m)).collect();
            }
        }
    }

    fn run_nc(&mut self) -> Result<(), TrialError> {
        let mut map = PacketStateMap::new(self.cfg.receivers, self.cfg.packets, CellState::Unknown);
        for m in 0..self.cfg.packets {
            let coded = CodedPacket::from(&self.packets[m]);
            let views = self.broadcast(&coded, Phase::Transmission)?;
            for (r, v) in views.into_iter().enumerate() {
                map.apply_plain_view(r, m, v);
            }
        }
        loop {
            while map.has_pending() {
                let chosen = select_combination(&map)?;
                let coded = xor_combine(chosen.iter().map(|&m| CodedPacket::from(&self.packets[m])).collect::<Vec<_>>().iter())?;
                let views = self.broadcast(&coded, Phase::Retransmission)?;
                for (r, v) in views.into_iter().enumerate() {
                    map.apply_coded_view(r, &coded.constituents, v);
                }
            }
            if self.complete() {
                return Ok(());
            }
            self.round += 1;
            map = PacketStateMap::from_receivers(&self.receivers, self.cfg.packets);
        }
    }

    fn verify(&self) -> Result<(), TrialError> {
        for (r, rx) in self.receivers.iter().enumerate() {
            for p in &self.packets {
                if rx.payload(p.id) != Some(p.payload.as_slice()) {
                    return Err(TrialError::Corrupt {
                        receiver: r,
                        packet: p.id,
                    });
                }
            }
        }
        Ok(())
    }

    fn run(mut self, seed: u64) -> Result<(TrialRecord, Vec<TraceEvent>), TrialError> {
        match self.cfg.scheme {
            Scheme::Arq | Scheme::ArqMl => self.run_arq()?,
            Scheme::Nc | Scheme::NcMl => self.run_nc()?,
        }
        self.verify()?;
        let record = TrialRecord {
            scheme: self.cfg.scheme,
            seed,
            receivers: self.cfg.receivers,
            packets: self.cfg.packets,
            transmissions: self.transmissions,
            aborted: false,
            scenario: String::new(),
        };
        Ok((record, self.trace.unwrap_or_default()))
    }
}

/// Simulates one trial until every receiver holds every packet and returns
/// the number of forward transmissions used.
pub fn run_trial(cfg: &SchemeConfig, env: &Environment, seed: u64) -> Result<TrialRecord, TrialError> {
    cfg.validate(env)?;
    Trial::new(cfg, env, seed, false).run(seed).map(|(r, _)| r)
}

/// Like [`run_trial`], also returning a per-transmission trace.
pub fn run_trial_traced(
    cfg: &SchemeConfig,
    env: &Environment,
    seed: u64,
) -> Result<(TrialRecord, Vec<TraceEvent>), TrialError> {
    cfg.validate(env)?;
    Trial::new(cfg, env, seed, true).run(seed)
}

/// Runs a trial, turning a blown transmission cap into an aborted record.
pub fn run_trial_record(cfg: &SchemeConfig, env: &Environment, seed: u64) -> Result<TrialRecord, TrialError> {
    match run_trial(cfg, env, seed) {
        Err(TrialError::CapExceeded(cap)) => Ok(TrialRecord {
            scheme: cfg.scheme,
            seed,
            receivers: cfg.receivers,
            packets: cfg.packets,
            transmissions: cap,
            aborted: true,
            scenario: String::new(),
        }),
        other => other,
    }
}
