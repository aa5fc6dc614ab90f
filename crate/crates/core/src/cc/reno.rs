use crate::units::SimTime;

use super::{CongestionControl, SendBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenoPhase {
    SlowStart,
    CongestionAvoidance,
}

/// Classic Reno window, in packets.
#[derive(Debug, Clone, PartialEq)]
pub struct RenoState {
    pub cwnd: f64,
    pub ssthresh: f64,
    pub phase: RenoPhase,
    pub rto_min: SimTime,
    pub max_cwnd: f64,
    pub init_cwnd: f64,
    /// Shrink the window after an idle period of at least `rto_min`.
    pub restart_after_idle: bool,
}

impl RenoState {
    pub fn new(init_cwnd: f64, rto_min: SimTime) -> Self {
        RenoState {
            cwnd: init_cwnd.max(1.0),
            ssthresh: f64::INFINITY,
            phase: RenoPhase::SlowStart,
            rto_min,
            max_cwnd: f64::INFINITY,
            init_cwnd: init_cwnd.max(1.0),
            restart_after_idle: false,
        }
    }

    pub fn with_max_cwnd(mut self, max_cwnd: f64) -> Self {
        self.max_cwnd = max_cwnd;
        self
    }

    /// Slow start adds one packet per acked segment; congestion avoidance
    /// adds `acked_count / cwnd`.
    pub fn on_ack(&mut self, acked_count: u32) {
        self.on_ack_scaled(acked_count, 1.0);
    }

    /// Congestion avoidance increment multiplied by `factor`. Slow start is
    /// never scaled.
    pub fn on_ack_scaled(&mut self, acked_count: u32, factor: f64) {
        debug_assert!(acked_count >= 1);
        match self.phase {
            RenoPhase::SlowStart => {
                self.cwnd += acked_count as f64;
                if self.cwnd >= self.ssthresh {
                    self.phase = RenoPhase::CongestionAvoidance;
                }
            }
            RenoPhase::CongestionAvoidance => {
                self.cwnd += factor * acked_count as f64 / self.cwnd;
            }
        }
        self.cwnd = self.cwnd.min(self.max_cwnd);
    }

    pub fn with_restart_after_idle(mut self, on: bool) -> Self {
        self.restart_after_idle = on;
        self
    }

    /// Halves the window once per `rto_min` of idle time, never below the
    /// initial window, and resumes in slow start.
    pub fn on_idle_restart(&mut self, idle: SimTime) {
        if !self.restart_after_idle || idle < self.rto_min {
            return;
        }
        let floor = self.init_cwnd.min(self.cwnd);
        self.ssthresh = self.ssthresh.max(0.75 * self.cwnd);
        let halvings = (idle.as_nanos() / self.rto_min.as_nanos().max(1)).min(64) as i32;
        self.cwnd = (self.cwnd * 0.5f64.powi(halvings)).max(floor);
        if self.cwnd < self.ssthresh {
            self.phase = RenoPhase::SlowStart;
        }
    }

    /// Halves the window.
    pub fn on_loss(&mut self) {
        self.on_loss_scaled(1.0);
    }

    /// `cwnd <- factor * 0.5 * cwnd`, floored at one packet and never above
    /// the pre-loss window.
    pub fn on_loss_scaled(&mut self, factor: f64) {
        let reduced = factor * 0.5 * self.cwnd;
        self.cwnd = reduced.min(self.cwnd).max(1.0);
        self.ssthresh = self.cwnd;
        self.phase = RenoPhase::CongestionAvoidance;
    }
}

impl CongestionControl for RenoState {
    fn on_ack(&mut self, acked_count: u32, _ecn_marked: bool, _now: SimTime) {
        RenoState::on_ack(self, acked_count);
    }

    fn on_loss(&mut self, _now: SimTime) {
        RenoState::on_loss(self);
    }

    fn on_idle_restart(&mut self, idle: SimTime) {
        RenoState::on_idle_restart(self, idle);
    }

    fn budget(&self) -> SendBudget {
        SendBudget::Window(self.cwnd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ca(cwnd: f64) -> RenoState {
        let mut s = RenoState::new(cwnd, SimTime::from_millis(1));
        s.phase = RenoPhase::CongestionAvoidance;
        s.ssthresh = cwnd;
        s
    }

    #[test]
    fn idle_restart_halves_per_rto_min() {
        let mut off = ca(40.0);
        off.on_idle_restart(SimTime::from_millis(5));
        assert_eq!(off.cwnd, 40.0);

        let mut s = ca(10.0).with_restart_after_idle(true);
        s.cwnd = 40.0;
        s.on_idle_restart(SimTime::from_micros(999));
        assert_eq!(s.cwnd, 40.0);
        s.on_idle_restart(SimTime::from_millis(2));
        assert_eq!(s.cwnd, 10.0);
        assert_eq!(s.ssthresh, 30.0);
        assert_eq!(s.phase, RenoPhase::SlowStart);
        s.on_idle_restart(SimTime::from_millis(50));
        assert_eq!(s.cwnd, 10.0, "never below the initial window");
    }

    #[test]
    fn congestion_avoidance_step() {
        let mut s = ca(10.0);
        s.on_ack(1);
        assert_eq!(s.cwnd, 10.1);
    }

    #[test]
    fn slow_start_crosses_into_avoidance() {
        let mut s = RenoState::new(4.0, SimTime::from_millis(1));
        s.ssthresh = 8.0;
        s.on_ack(4);
        assert_eq!(s.cwnd, 8.0);
        assert_eq!(s.phase, RenoPhase::CongestionAvoidance);
    }

    #[test]
    fn per_ack_sequence_differs_from_batched_ack() {
        // Frozen from iterating w <- w + 1/w one hundred times from 10.
        const PER_ACK: f64 = 17.33643281197808;
        let mut one_by_one = ca(10.0);
        for _ in 0..100 {
            one_by_one.on_ack(1);
        }
        let mut batched = ca(10.0);
        batched.on_ack(100);
        assert_eq!(one_by_one.cwnd, PER_ACK);
        assert_eq!(batched.cwnd, 20.0);
    }

    #[test]
    fn loss_halves_with_floor() {
        for (before, after) in [(100.0, 50.0), (1.5, 1.0), (7.0, 3.5)] {
            let mut s = ca(before);
            s.on_loss();
            assert_eq!(s.cwnd, after);
            assert_eq!(s.ssthresh, after);
            assert_eq!(s.phase, RenoPhase::CongestionAvoidance);
        }
    }

    #[test]
    fn window_never_below_one() {
        let mut s = ca(1.0);
        for _ in 0..10 {
            s.on_loss();
            assert!(s.cwnd >= 1.0);
        }
    }

    #[test]
    fn max_window_clamp() {
        let mut s = RenoState::new(10.0, SimTime::ZERO).with_max_cwnd(12.0);
        s.on_ack(5);
        assert_eq!(s.cwnd, 12.0);
    }
}
