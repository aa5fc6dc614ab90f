use serde::{Deserialize, Serialize};

use crate::units::SimTime;

use super::{CongestionControl, SendBudget};

/// Tunable CUBIC constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CubicParams {
    /// Multiplicative decrease factor.
    pub beta: f64,
    /// Cubic coefficient in packets per second cubed.
    pub c_scale: f64,
}

impl Default for CubicParams {
    fn default() -> Self {
        CubicParams { beta: 0.7, c_scale: 0.4 }
    }
}

/// CUBIC window state, in packets.
///
/// Before the first loss the flow is in slow start. Afterwards the window
/// follows `W(t) = c_scale * (t - k_offset)^3 + w_max` where `t` is the time
/// since the last decrease. Each ack moves `cwnd` part of the way towards
/// `W(t)` evaluated one step ahead, so the window tracks the curve without
/// jumping on a single ack.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicState {
    pub cwnd: f64,
    pub ssthresh: f64,
    pub w_max: f64,
    pub beta: f64,
    pub c_scale: f64,
    pub epoch_start: SimTime,
    /// Seconds from `epoch_start` to the inflection point.
    pub k_offset: f64,
    pub max_cwnd: f64,
}

impl CubicState {
    pub fn new(init_cwnd: f64, params: CubicParams) -> Self {
        assert!(params.beta > 0.0 && params.beta < 1.0, "cubic beta must lie in (0, 1)");
        assert!(params.c_scale > 0.0, "cubic c_scale must be positive");
        let cwnd = init_cwnd.max(1.0);
        CubicState {
            cwnd,
            ssthresh: f64::INFINITY,
            w_max: cwnd,
            beta: params.beta,
            c_scale: params.c_scale,
            epoch_start: SimTime::ZERO,
            k_offset: 0.0,
            max_cwnd: f64::INFINITY,
        }
    }

    pub fn with_max_cwnd(mut self, max_cwnd: f64) -> Self {
        self.max_cwnd = max_cwnd;
        self
    }

    pub fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    /// Closed-form window `t` seconds after the last decrease.
    pub fn window_at(&self, t: f64) -> f64 {
        let d = t - self.k_offset;
        self.c_scale * d * d * d + self.w_max
    }

    /// `W(now - epoch_start)`. The caller floors the result at one packet.
    pub fn cubic_window(&self, now: SimTime) -> f64 {
        self.cubic_window_scaled(now, 1.0)
    }

    /// `W(factor * (now - epoch_start))`.
    pub fn cubic_window_scaled(&self, now: SimTime, factor: f64) -> f64 {
        assert!(now >= self.epoch_start, "cubic window evaluated before its epoch");
        let t = (now - self.epoch_start).as_secs_f64();
        self.window_at(factor * t)
    }

    pub fn on_ack(&mut self, acked_count: u32, now: SimTime) {
        self.on_ack_scaled(acked_count, now, 1.0);
    }

    /// Per-ack growth with the elapsed time multiplied by `factor`. Slow
    /// start is never scaled.
    pub fn on_ack_scaled(&mut self, acked_count: u32, now: SimTime, factor: f64) {
        debug_assert!(acked_count >= 1);
        let acked = acked_count as f64;
        if self.in_slow_start() {
            self.cwnd = (self.cwnd + acked).min(self.max_cwnd);
            return;
        }
        let target = self.cubic_window_scaled(now, factor).max(1.0);
        let step = if target > self.cwnd {
            ((target - self.cwnd) / self.cwnd).min(0.5)
        } else {
            0.01 / self.cwnd
        };
        self.cwnd = (self.cwnd + acked * step).min(self.max_cwnd);
    }

    pub fn on_loss(&mut self, now: SimTime) {
        self.on_loss_scaled(now, 1.0);
    }

    /// `cwnd <- factor * beta * cwnd`, clamped to `[1, cwnd]`. The curve is
    /// re-anchored so that it starts from the reduced window.
    pub fn on_loss_scaled(&mut self, now: SimTime, factor: f64) {
        let beta_eff = (factor * self.beta).min(1.0);
        self.w_max = self.cwnd;
        self.cwnd = (beta_eff * self.cwnd).max(1.0);
        self.ssthresh = self.cwnd;
        self.epoch_start = now;
        self.k_offset = (self.w_max * (1.0 - beta_eff) / self.c_scale).cbrt();
    }

    /// Shifts the epoch forward so time spent idle does not count as growth
    /// time.
    pub fn on_idle_restart(&mut self, idle: SimTime) {
        if !self.in_slow_start() {
            self.epoch_start += idle;
        }
    }
}

impl CongestionControl for CubicState {
    fn on_ack(&mut self, acked_count: u32, _ecn_marked: bool, now: SimTime) {
        CubicState::on_ack(self, acked_count, now);
    }

    fn on_loss(&mut self, now: SimTime) {
        CubicState::on_loss(self, now);
    }

    fn on_idle_restart(&mut self, idle: SimTime) {
        CubicState::on_idle_restart(self, idle);
    }

    fn budget(&self) -> SendBudget {
        SendBudget::Window(self.cwnd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn after_loss(cwnd: f64, params: CubicParams, at: SimTime) -> CubicState {
        let mut s = CubicState::new(cwnd, params);
        s.on_loss(at);
        s
    }

    #[test]
    fn loss_reduces_by_beta() {
        let s = after_loss(100.0, CubicParams::default(), SimTime::from_millis(3));
        assert_eq!(s.cwnd, 70.0);
        assert_eq!(s.w_max, 100.0);
        assert_eq!(s.epoch_start, SimTime::from_millis(3));
    }

    #[test]
    fn loss_floor_at_one() {
        let s = after_loss(1.0, CubicParams::default(), SimTime::ZERO);
        assert_eq!(s.cwnd, 1.0);
    }

    #[test]
    fn inflection_offset_matches_default_constants() {
        // cbrt(100 * 0.3 / 0.4) = cbrt(75), evaluated independently.
        const K: f64 = 4.217163326508746;
        let s = after_loss(100.0, CubicParams::default(), SimTime::ZERO);
        assert!((s.k_offset - K).abs() < 1e-12);
        let w0 = s.cubic_window(SimTime::ZERO);
        assert!((w0 - 70.0).abs() < 1e-9, "W(0) = {w0}");
    }

    #[test]
    fn window_is_w_max_at_inflection() {
        let s = after_loss(100.0, CubicParams::default(), SimTime::ZERO);
        assert_eq!(s.window_at(s.k_offset), s.w_max);
    }

    #[test]
    fn window_grows_beyond_inflection() {
        let s = after_loss(100.0, CubicParams::default(), SimTime::ZERO);
        let a = s.window_at(s.k_offset + 1.0);
        let b = s.window_at(s.k_offset + 2.0);
        assert!(b > a && a > s.w_max);
    }

    #[test]
    fn scaled_time_reaches_inflection_early_or_late() {
        let s = after_loss(100.0, CubicParams { beta: 0.7, c_scale: 1e6 }, SimTime::ZERO);
        let k = s.k_offset;
        let half_k = SimTime::from_secs_f64(k / 2.0);
        let at_half = s.cubic_window_scaled(half_k, 2.0);
        let exact = s.window_at(2.0 * half_k.as_secs_f64());
        assert_eq!(at_half, exact);
        assert!((at_half - s.w_max).abs() < 1e-6 * s.w_max);
        let full_k = SimTime::from_secs_f64(k);
        assert!(s.cubic_window_scaled(full_k, 0.25) < s.w_max);
    }

    #[test]
    fn acks_approach_target_and_are_clamped() {
        let mut s = after_loss(100.0, CubicParams { beta: 0.7, c_scale: 1e9 }, SimTime::ZERO);
        let later = SimTime::from_millis(10);
        for _ in 0..200 {
            s.on_ack(1, later);
        }
        let target = s.cubic_window(later);
        assert!(s.cwnd <= target + 1.0 && s.cwnd > 70.0);
        let mut capped = s.clone().with_max_cwnd(80.0);
        capped.on_ack(1000, later);
        assert_eq!(capped.cwnd, 80.0);
    }

    #[test]
    fn idle_shifts_epoch() {
        let mut s = after_loss(100.0, CubicParams::default(), SimTime::from_millis(1));
        s.on_idle_restart(SimTime::from_millis(4));
        assert_eq!(s.epoch_start, SimTime::from_millis(5));
    }

    proptest! {
        #[test]
        fn closed_form_anchor_points(
            cwnd in 1.0f64..1e5,
            beta in 0.05f64..0.95,
            c_scale in 1e-3f64..1e12,
            at_us in 0u64..10_000_000,
        ) {
            let at = SimTime::from_micros(at_us);
            let s = after_loss(cwnd, CubicParams { beta, c_scale }, at);
            let at_k = s.window_at(s.k_offset);
            prop_assert!((at_k - s.w_max).abs() <= 1e-12 * s.w_max);
            let w0 = s.cubic_window(at);
            let expect = beta * cwnd;
            prop_assert!((w0 - expect).abs() <= 1e-12 * expect.max(1.0) * 4.0,
                "W(0) = {} vs {}", w0, expect);
        }

        #[test]
        fn window_is_continuous_and_monotone(
            cwnd in 2.0f64..1e4,
            t in 0.0f64..10.0,
        ) {
            let s = after_loss(cwnd, CubicParams::default(), SimTime::ZERO);
            let h = 1e-9;
            let (a, b) = (s.window_at(t), s.window_at(t + h));
            prop_assert!(b >= a);
            prop_assert!(b - a < 1e-6 * s.w_max.max(1.0));
        }
    }
}
