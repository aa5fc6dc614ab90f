//! Baseline congestion controllers as per-flow state machines.
//!
//! Every controller exposes the same contract ([`CongestionControl`]) so the
//! transport layer can drive it without knowing which algorithm sits behind
//! it. The `*_scaled` entry points on each state take the multiplier that
//! [`crate::mltcp`] derives from the job's progress; the plain entry points
//! are the unmodified algorithms and equal the scaled ones at factor 1.

mod cubic;
mod dcqcn;
mod reno;

pub use cubic::{CubicParams, CubicState};
pub use dcqcn::{DcqcnParams, DcqcnState};
pub use reno::{RenoPhase, RenoState};

use crate::units::SimTime;

/// How much a controller currently allows the flow to send.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SendBudget {
    /// Congestion window in packets.
    Window(f64),
    /// Pacing rate in bits per second.
    Rate(f64),
}

/// Event interface between the transport and a congestion controller.
pub trait CongestionControl {
    /// A new cumulative ack covering `acked_count` segments arrived.
    fn on_ack(&mut self, acked_count: u32, ecn_marked: bool, now: SimTime);

    /// Loss detected (triple duplicate ack or retransmission timeout).
    fn on_loss(&mut self, now: SimTime);

    /// A congestion notification packet arrived. Ignored by window-based
    /// controllers.
    fn on_cnp(&mut self, _now: SimTime) {}

    /// The flow put `bytes` on the wire.
    fn on_sent(&mut self, _bytes: u64, _now: SimTime) {}

    /// The flow resumes transmitting after `idle` with nothing in flight.
    fn on_idle_restart(&mut self, _idle: SimTime) {}

    /// Earliest pending internal timer, if any.
    fn next_timer(&self) -> Option<SimTime> {
        None
    }

    /// Runs every internal timer that is due at `now`.
    fn on_timer(&mut self, _now: SimTime) {}

    fn budget(&self) -> SendBudget;

    /// Progress of the owning job through its current iteration, in [0, 1].
    /// Plain controllers ignore it.
    fn set_bytes_ratio(&mut self, _ratio: f64) {}
}

/// Which baseline algorithm a flow runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcAlgorithm {
    Reno,
    Cubic,
    Dcqcn,
}

impl CcAlgorithm {
    pub fn is_rate_based(self) -> bool {
        self == CcAlgorithm::Dcqcn
    }
}
