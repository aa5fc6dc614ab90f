use serde::{Deserialize, Serialize};

use crate::units::{BitRate, SimTime};

use super::{CongestionControl, SendBudget};

/// DCQCN reaction-point constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcqcnParams {
    /// Additive increase step.
    pub r_ai: BitRate,
    /// EWMA gain for alpha.
    pub alpha_g: f64,
    pub alpha_timer: SimTime,
    pub increase_timer: SimTime,
    /// Bytes sent between two byte-counter increase events.
    #[serde(with = "crate::units::bytes_serde")]
    pub byte_counter: u64,
    /// Increase events spent in fast recovery after each cut.
    pub fast_recovery_stages: u32,
    /// Floor for the current rate as a fraction of line rate.
    pub min_rate_fraction: f64,
}

impl Default for DcqcnParams {
    fn default() -> Self {
        DcqcnParams {
            r_ai: BitRate::mbps(40),
            alpha_g: 1.0 / 16.0,
            alpha_timer: SimTime::from_micros(55),
            increase_timer: SimTime::from_micros(300),
            byte_counter: 10_000_000,
            fast_recovery_stages: 5,
            min_rate_fraction: 1e-3,
        }
    }
}

/// DCQCN sender rate state. Rates are in bits per second.
#[derive(Debug, Clone, PartialEq)]
pub struct DcqcnState {
    pub target_rate: f64,
    pub curr_rate: f64,
    pub alpha: f64,
    pub r_ai: f64,
    pub alpha_g: f64,
    pub line_rate: f64,
    pub min_rate: f64,
    /// Bytes sent since the last byte-counter increase event.
    pub byte_counter: u64,
    pub byte_threshold: u64,
    pub increase_stage: u32,
    pub fast_recovery_stages: u32,
    pub alpha_period: SimTime,
    pub increase_period: SimTime,
    pub next_alpha: SimTime,
    pub next_increase: SimTime,
}

impl DcqcnState {
    pub fn new(line_rate: BitRate, params: DcqcnParams, now: SimTime) -> Self {
        assert!(params.alpha_g > 0.0 && params.alpha_g < 1.0, "dcqcn alpha_g must lie in (0, 1)");
        assert!(params.byte_counter > 0, "dcqcn byte counter must be positive");
        let line = line_rate.as_f64();
        DcqcnState {
            target_rate: line,
            curr_rate: line,
            alpha: 1.0,
            r_ai: params.r_ai.as_f64(),
            alpha_g: params.alpha_g,
            line_rate: line,
            min_rate: line * params.min_rate_fraction,
            byte_counter: 0,
            byte_threshold: params.byte_counter,
            increase_stage: 0,
            fast_recovery_stages: params.fast_recovery_stages,
            alpha_period: params.alpha_timer,
            increase_period: params.increase_timer,
            next_alpha: now + params.alpha_timer,
            next_increase: now + params.increase_timer,
        }
    }

    pub fn on_cnp(&mut self, now: SimTime) {
        self.on_cnp_scaled(now, 1.0);
    }

    /// `curr_rate <- factor * (1 - alpha/2) * curr_rate`, never above the
    /// pre-cut rate and never below `min_rate`.
    pub fn on_cnp_scaled(&mut self, now: SimTime, factor: f64) {
        let cut = factor * (1.0 - self.alpha / 2.0);
        self.target_rate = self.curr_rate;
        self.curr_rate = (cut * self.curr_rate).min(self.curr_rate).max(self.min_rate);
        self.alpha = (1.0 - self.alpha_g) * self.alpha + self.alpha_g;
        self.byte_counter = 0;
        self.increase_stage = 0;
        self.next_alpha = now + self.alpha_period;
        self.next_increase = now + self.increase_period;
        self.check();
    }

    pub fn alpha_decay(&mut self) {
        self.alpha *= 1.0 - self.alpha_g;
    }

    pub fn rate_increase(&mut self) {
        self.rate_increase_scaled(1.0);
    }

    /// One increase event. The first `fast_recovery_stages` events only move
    /// `curr_rate` halfway to `target_rate`; later ones also raise the target
    /// by `factor * r_ai`.
    pub fn rate_increase_scaled(&mut self, factor: f64) {
        self.increase_stage = self.increase_stage.saturating_add(1);
        if self.increase_stage > self.fast_recovery_stages {
            self.target_rate = (self.target_rate + factor * self.r_ai).min(self.line_rate);
        }
        self.curr_rate = (self.curr_rate + self.target_rate) / 2.0;
        self.check();
    }

    /// Counts sent bytes and reports whether the byte counter expired.
    pub fn count_bytes(&mut self, bytes: u64) -> bool {
        self.byte_counter += bytes;
        if self.byte_counter >= self.byte_threshold {
            self.byte_counter = 0;
            true
        } else {
            false
        }
    }

    pub fn next_timer(&self) -> SimTime {
        self.next_alpha.min(self.next_increase)
    }

    /// Fires the due alpha timer and reports whether the increase timer is
    /// also due. The caller decides how to apply the increase.
    pub fn advance_timers(&mut self, now: SimTime) -> bool {
        if now >= self.next_alpha {
            self.alpha_decay();
            self.next_alpha = now + self.alpha_period;
        }
        if now >= self.next_increase {
            self.next_increase = now + self.increase_period;
            true
        } else {
            false
        }
    }

    fn check(&self) {
        assert!(
            self.curr_rate > 0.0 && self.curr_rate <= self.target_rate && self.target_rate <= self.line_rate,
            "dcqcn rate invariant violated: curr {} target {} line {}",
            self.curr_rate,
            self.target_rate,
            self.line_rate
        );
        assert!((0.0..=1.0).contains(&self.alpha), "dcqcn alpha out of range: {}", self.alpha);
    }
}

impl CongestionControl for DcqcnState {
    fn on_ack(&mut self, _acked_count: u32, _ecn_marked: bool, _now: SimTime) {}

    fn on_loss(&mut self, _now: SimTime) {}

    fn on_cnp(&mut self, now: SimTime) {
        DcqcnState::on_cnp(self, now);
    }

    fn on_sent(&mut self, bytes: u64, _now: SimTime) {
        if self.count_bytes(bytes) {
            self.rate_increase();
        }
    }

    fn next_timer(&self) -> Option<SimTime> {
        Some(DcqcnState::next_timer(self))
    }

    fn on_timer(&mut self, now: SimTime) {
        if self.advance_timers(now) {
            self.rate_increase();
        }
    }

    fn budget(&self) -> SendBudget {
        SendBudget::Rate(self.curr_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const G40: f64 = 40e9;

    fn state(curr: f64, target: f64, alpha: f64) -> DcqcnState {
        let mut s = DcqcnState::new(BitRate::gbps(50), DcqcnParams::default(), SimTime::ZERO);
        s.curr_rate = curr;
        s.target_rate = target;
        s.alpha = alpha;
        s
    }

    #[test]
    fn cnp_with_full_alpha_halves() {
        let mut s = state(G40, G40, 1.0);
        s.on_cnp(SimTime::ZERO);
        assert_eq!(s.curr_rate, 20e9);
        assert_eq!(s.target_rate, G40);
    }

    #[test]
    fn cnp_with_zero_alpha_keeps_rate() {
        let mut s = state(G40, G40, 0.0);
        s.on_cnp(SimTime::ZERO);
        assert_eq!(s.curr_rate, G40);
    }

    #[test]
    fn alpha_rises_on_cnp() {
        let mut s = state(G40, G40, 0.5);
        s.on_cnp(SimTime::ZERO);
        assert_eq!(s.alpha, 0.53125);
    }

    #[test]
    fn alpha_decay_sequence() {
        // (15/16)^10 evaluated independently.
        const TEN_DECAYS: f64 = 0.524460475048727;
        let mut s = state(G40, G40, 1.0);
        s.alpha_decay();
        assert_eq!(s.alpha, 0.9375);
        for _ in 1..10 {
            s.alpha_decay();
        }
        assert!((s.alpha - TEN_DECAYS).abs() < 1e-15);
        let mut z = state(G40, G40, 0.0);
        z.alpha_decay();
        assert_eq!(z.alpha, 0.0);
    }

    #[test]
    fn fast_recovery_moves_to_midpoint() {
        let mut s = state(20e9, G40, 0.5);
        s.rate_increase();
        assert_eq!(s.curr_rate, 30e9);
        assert_eq!(s.target_rate, G40);
    }

    #[test]
    fn additive_stage_raises_target() {
        let mut s = state(G40, G40, 0.5);
        s.increase_stage = 5;
        s.rate_increase();
        assert!((s.target_rate - 40.04e9).abs() < 1.0);
    }

    #[test]
    fn target_clamped_at_line_rate() {
        let mut s = state(50e9, 50e9, 0.5);
        s.increase_stage = 10;
        s.rate_increase();
        assert_eq!(s.target_rate, 50e9);
        assert_eq!(s.curr_rate, 50e9);
    }

    #[test]
    fn rate_never_below_floor() {
        let mut s = state(G40, G40, 1.0);
        for _ in 0..100 {
            s.on_cnp(SimTime::ZERO);
        }
        assert_eq!(s.curr_rate, s.min_rate);
    }

    #[test]
    fn timers_fire_in_order() {
        let mut s = DcqcnState::new(BitRate::gbps(5), DcqcnParams::default(), SimTime::ZERO);
        assert_eq!(s.next_timer(), SimTime::from_micros(55));
        assert!(!s.advance_timers(SimTime::from_micros(55)));
        assert_eq!(s.alpha, 0.9375);
        assert_eq!(s.next_timer(), SimTime::from_micros(110));
        s.next_alpha = SimTime::from_micros(400);
        assert!(s.advance_timers(SimTime::from_micros(300)));
        assert_eq!(s.next_increase, SimTime::from_micros(600));
    }

    #[test]
    fn byte_counter_expires() {
        let mut s = DcqcnState::new(BitRate::gbps(5), DcqcnParams { byte_counter: 3000, ..Default::default() }, SimTime::ZERO);
        assert!(!s.count_bytes(1500));
        assert!(s.count_bytes(1500));
        assert_eq!(s.byte_counter, 0);
    }
}
