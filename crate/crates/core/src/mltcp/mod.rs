//! Bytes-ratio aware augmentation of the baseline controllers.
//!
//! A job's [`JobProgressTracker`] turns its ack stream into a bytes ratio in
//! `[0, 1]`. An [`AggressivenessFunction`] maps that ratio to a factor, and
//! [`Mltcp`] applies the factor to exactly one step of the wrapped
//! controller: the increase step in [`MltcpMode::WindowIncrease`] or the
//! decrease step in [`MltcpMode::MultiplicativeDecrease`]. Every other part
//! of the controller, including slow start, is left untouched.

mod function;
mod tracker;

pub use function::{AggressivenessFunction, FunctionError, FunctionForm};
pub use tracker::{JobProgressTracker, TrackerError, TrackerParams};

use serde::{Deserialize, Serialize};

use crate::cc::{CongestionControl, CubicState, DcqcnState, RenoState, SendBudget};
use crate::units::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MltcpMode {
    #[serde(rename = "wi")]
    WindowIncrease,
    #[serde(rename = "md")]
    MultiplicativeDecrease,
}

/// Where a wrapper takes its factor from.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorSource {
    /// `F(bytes_ratio)` of the owning job.
    Function(AggressivenessFunction),
    /// A constant weight, independent of progress.
    Constant(f64),
}

/// A baseline controller with one of its steps scaled by a factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Mltcp<S> {
    pub inner: S,
    pub mode: MltcpMode,
    pub source: FactorSource,
    pub bytes_ratio: f64,
}

impl<S> Mltcp<S> {
    pub fn new(inner: S, mode: MltcpMode, function: AggressivenessFunction) -> Self {
        Mltcp { inner, mode, source: FactorSource::Function(function), bytes_ratio: 0.0 }
    }

    /// Fixed-weight variant used for static unfair sharing.
    pub fn constant(inner: S, mode: MltcpMode, weight: f64) -> Self {
        assert!(weight > 0.0 && weight.is_finite(), "static weight must be positive");
        Mltcp { inner, mode, source: FactorSource::Constant(weight), bytes_ratio: 0.0 }
    }

    pub fn factor(&self) -> f64 {
        match &self.source {
            FactorSource::Function(f) => f.eval(self.bytes_ratio),
            FactorSource::Constant(w) => *w,
        }
    }

    fn increase_factor(&self) -> f64 {
        match self.mode {
            MltcpMode::WindowIncrease => self.factor(),
            MltcpMode::MultiplicativeDecrease => 1.0,
        }
    }

    fn decrease_factor(&self) -> f64 {
        match self.mode {
            MltcpMode::WindowIncrease => 1.0,
            MltcpMode::MultiplicativeDecrease => self.factor(),
        }
    }
}

impl CongestionControl for Mltcp<RenoState> {
    fn on_ack(&mut self, acked_count: u32, _ecn_marked: bool, _now: SimTime) {
        let f = self.increase_factor();
        self.inner.on_ack_scaled(acked_count, f);
    }

    fn on_loss(&mut self, _now: SimTime) {
        let f = self.decrease_factor();
        self.inner.on_loss_scaled(f);
    }

    fn on_idle_restart(&mut self, idle: SimTime) {
        self.inner.on_idle_restart(idle);
    }

    fn budget(&self) -> SendBudget {
        self.inner.budget()
    }

    fn set_bytes_ratio(&mut self, ratio: f64) {
        self.bytes_ratio = ratio;
    }
}

impl CongestionControl for Mltcp<CubicState> {
    fn on_ack(&mut self, acked_count: u32, _ecn_marked: bool, now: SimTime) {
        let f = self.increase_factor();
        self.inner.on_ack_scaled(acked_count, now, f);
    }

    fn on_loss(&mut self, now: SimTime) {
        let f = self.decrease_factor();
        self.inner.on_loss_scaled(now, f);
    }

    fn on_idle_restart(&mut self, idle: SimTime) {
        self.inner.on_idle_restart(idle);
    }

    fn budget(&self) -> SendBudget {
        self.inner.budget()
    }

    fn set_bytes_ratio(&mut self, ratio: f64) {
        self.bytes_ratio = ratio;
    }
}

impl CongestionControl for Mltcp<DcqcnState> {
    fn on_ack(&mut self, _acked_count: u32, _ecn_marked: bool, _now: SimTime) {}

    fn on_loss(&mut self, _now: SimTime) {}

    fn on_cnp(&mut self, now: SimTime) {
        let f = self.decrease_factor();
        self.inner.on_cnp_scaled(now, f);
    }

    fn on_sent(&mut self, bytes: u64, _now: SimTime) {
        if self.inner.count_bytes(bytes) {
            let f = self.increase_factor();
            self.inner.rate_increase_scaled(f);
        }
    }

    fn next_timer(&self) -> Option<SimTime> {
        Some(self.inner.next_timer())
    }

    fn on_timer(&mut self, now: SimTime) {
        if self.inner.advance_timers(now) {
            let f = self.increase_factor();
            self.inner.rate_increase_scaled(f);
        }
    }

    fn budget(&self) -> SendBudget {
        self.inner.budget()
    }

    fn set_bytes_ratio(&mut self, ratio: f64) {
        self.bytes_ratio = ratio;
    }
}
