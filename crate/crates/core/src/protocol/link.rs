//! Per-slot channel realizations shared by every scheme.
//!
//! Each broadcast slot draws, for every receiver in index order, one
//! shadowing realization and three uniforms. The same shadowing drives the
//! forward data link and the reverse feedback link of that receiver, so a
//! feedback signal's measured SNR reflects the forward channel it reports on.
//! Because the draw sequence does not depend on what is transmitted, two
//! schemes run from one seed see identical loss and corruption traces.

use rand::Rng;

use crate::channel::{forward_success_with, ChannelMode, PhysicalLink, ShadowingDraw};
use crate::feedback::{generate_feedback_with, FeedbackObservation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDraw {
    pub shadowing: ShadowingDraw,
    pub forward_u: f64,
    pub decode_u: f64,
    pub flip_u: f64,
}

impl SlotDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let shadowing = ShadowingDraw::sample(rng);
        Self {
            shadowing,
            forward_u: rng.random(),
            decode_u: rng.random(),
            flip_u: rng.random(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverLink {
    pub forward: ChannelMode,
    pub reverse: ChannelMode,
    /// Physical link the transmitter measures feedback features on.
    pub sensing: PhysicalLink,
}

/// Fixed forward outcomes replacing the random channel. `first[m][r]` says
/// whether receiver `r` gets the first transmission of packet `m`; every
/// other transmission (repeats, coded packets, unscripted packets) arrives.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LossScript {
    pub first: Vec<Vec<bool>>,
}

impl LossScript {
    pub fn delivered(&self, first_of: Option<usize>, receiver: usize) -> bool {
        first_of
            .and_then(|m| self.first.get(m))
            .and_then(|row| row.get(receiver))
            .copied()
            .unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub links: Vec<ReceiverLink>,
    pub flip_fraction: f64,
    pub script: Option<LossScript>,
}

impl Environment {
    pub fn receivers(&self) -> usize {
        self.links.len()
    }

    pub fn draw_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<SlotDraw> {
        (0..self.links.len()).map(|_| SlotDraw::sample(rng)).collect()
    }

    /// Whether `receiver` gets this slot. `first_of` names the packet when
    /// the slot is that packet's first plain transmission.
    pub fn forward_ok(&self, first_of: Option<usize>, receiver: usize, draw: &SlotDraw) -> bool {
        match &self.script {
            Some(script) => script.delivered(first_of, receiver),
            None => forward_success_with(&self.links[receiver].forward, &draw.shadowing, draw.forward_u),
        }
    }

    pub fn feedback(&self, receiver: usize, acknowledged: bool, draw: &SlotDraw) -> FeedbackObservation {
        let link = &self.links[receiver];
        generate_feedback_with(
            acknowledged,
            &link.reverse,
            &link.sensing,
            self.flip_fraction,
            &draw.shadowing,
            draw.decode_u,
            draw.flip_u,
        )
    }
}
