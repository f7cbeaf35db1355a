//! Reliable wireless broadcast over lossy forward and feedback links.

pub mod channel;
pub mod feedback;
pub mod learn;
pub mod metrics;
pub mod protocol;
pub mod harness;
