use serde::{Deserialize, Serialize};

use crate::units::SimTime;

/// Constants of the progress tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerParams {
    /// Noise tolerance: a gap longer than `g * iter_gap` starts a new
    /// iteration.
    pub g: f64,
    /// EWMA weight given to the newest gap observation.
    pub gamma: f64,
    /// Bytes credited per acknowledged segment.
    pub mtu: u64,
    /// Initial gap estimate. `None` means four base round-trip times of the
    /// scenario.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_comm_gap: Option<SimTime>,
}

impl Default for TrackerParams {
    fn default() -> Self {
        TrackerParams { g: 0.75, gamma: 0.5, mtu: 1500, init_comm_gap: None }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackerError {
    #[error("total_bytes per iteration must be positive")]
    ZeroTotalBytes,
    #[error("tracker parameter {0} out of range")]
    BadParam(&'static str),
}

/// Per-job estimate of how far the current iteration has progressed,
/// updated on every ack.
///
/// Gap quantities are kept in fractional nanoseconds because the moving
/// average of integer gaps is not itself an integer.
#[derive(Debug, Clone, PartialEq)]
pub struct JobProgressTracker {
    pub total_bytes: u64,
    pub bytes_sent: u64,
    pub bytes_ratio: f64,
    pub prev_ack_tstamp: SimTime,
    pub iter_gap: f64,
    pub max_gap: f64,
    pub g: f64,
    pub gamma: f64,
    pub init_comm_gap: f64,
    pub mtu: u64,
    /// Number of iteration boundaries detected so far.
    pub boundaries: u64,
}

impl JobProgressTracker {
    pub fn new(total_bytes: u64, init_comm_gap: SimTime, params: TrackerParams) -> Result<Self, TrackerError> {
        if total_bytes == 0 {
            return Err(TrackerError::ZeroTotalBytes);
        }
        if !(params.g > 0.0 && params.g.is_finite()) {
            return Err(TrackerError::BadParam("g"));
        }
        if !(params.gamma > 0.0 && params.gamma <= 1.0) {
            return Err(TrackerError::BadParam("gamma"));
        }
        if params.mtu == 0 {
            return Err(TrackerError::BadParam("mtu"));
        }
        if init_comm_gap == SimTime::ZERO {
            return Err(TrackerError::BadParam("init_comm_gap"));
        }
        let gap = init_comm_gap.as_nanos() as f64;
        Ok(JobProgressTracker {
            total_bytes,
            bytes_sent: 0,
            bytes_ratio: 0.0,
            prev_ack_tstamp: SimTime::ZERO,
            iter_gap: gap,
            max_gap: gap,
            g: params.g,
            gamma: params.gamma,
            init_comm_gap: gap,
            mtu: params.mtu,
            boundaries: 0,
        })
    }

    /// Processes one ack reporting `num_acks` newly delivered segments.
    /// Returns true when the ack opened a new iteration.
    pub fn update(&mut self, num_acks: u32, now: SimTime) -> bool {
        assert!(now >= self.prev_ack_tstamp, "ack timestamps went backwards");
        self.bytes_sent += num_acks as u64 * self.mtu;
        let curr_gap = (now - self.prev_ack_tstamp).as_nanos() as f64;
        self.max_gap = self.max_gap.max(curr_gap);
        let boundary = curr_gap > self.g * self.iter_gap;
        if boundary {
            self.iter_gap = (1.0 - self.gamma) * self.iter_gap + self.gamma * self.max_gap;
            self.bytes_ratio = 0.0;
            self.bytes_sent = 0;
            self.max_gap = self.init_comm_gap;
            self.boundaries += 1;
        } else {
            self.bytes_ratio = (self.bytes_sent as f64 / self.total_bytes as f64).min(1.0);
        }
        self.prev_ack_tstamp = now;
        assert!((0.0..=1.0).contains(&self.bytes_ratio));
        boundary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracker(total: u64, init_us: u64) -> JobProgressTracker {
        JobProgressTracker::new(total, SimTime::from_micros(init_us), TrackerParams::default()).unwrap()
    }

    #[test]
    fn zero_total_bytes_rejected() {
        let e = JobProgressTracker::new(0, SimTime::from_micros(1), TrackerParams::default());
        assert_eq!(e.unwrap_err(), TrackerError::ZeroTotalBytes);
    }

    #[test]
    fn boundary_updates_gap_estimate() {
        let mut t = tracker(1_000_000, 10_000);
        t.prev_ack_tstamp = SimTime::from_millis(100);
        t.bytes_sent = 30_000;
        // An 8 ms gap exceeds 0.75 * 10 ms.
        let fired = t.update(1, SimTime::from_millis(108));
        assert!(fired);
        // The initial 10 ms max_gap dominates the 8 ms gap.
        assert_eq!(t.iter_gap, 10e6);
        assert_eq!(t.bytes_sent, 0);
        assert_eq!(t.bytes_ratio, 0.0);
        assert_eq!(t.max_gap, 10e6);
    }

    #[test]
    fn boundary_ewma_uses_longest_gap() {
        let mut t = tracker(1_000_000, 10_000);
        t.prev_ack_tstamp = SimTime::from_millis(100);
        assert!(t.update(1, SimTime::from_millis(112)));
        assert_eq!(t.iter_gap, 0.5 * 10e6 + 0.5 * 12e6);
    }

    #[test]
    fn ratio_accumulates_between_boundaries() {
        let mut t = tracker(1_500_000, 100);
        t.update(1, SimTime::from_millis(1));
        let mut now = SimTime::from_millis(1);
        for _ in 0..500 {
            now += SimTime::from_micros(1);
            assert!(!t.update(1, now));
        }
        assert_eq!(t.bytes_ratio, 0.5);
    }

    #[test]
    fn ratio_clamps_at_one() {
        let mut t = tracker(15_000, 100);
        t.update(1, SimTime::from_millis(1));
        t.bytes_sent = 15_000;
        let mut now = SimTime::from_millis(1);
        for _ in 0..10 {
            now += SimTime::from_micros(1);
            t.update(1, now);
            assert_eq!(t.bytes_ratio, 1.0);
        }
    }

    #[test]
    fn zero_ack_updates_only_timing() {
        let mut t = tracker(15_000, 100);
        t.update(1, SimTime::from_millis(1));
        t.update(3, SimTime::from_millis(1) + SimTime::from_micros(5));
        t.update(0, SimTime::from_millis(1) + SimTime::from_micros(6));
        assert_eq!(t.bytes_sent, 4500);
        assert_eq!(t.bytes_ratio, 0.3);
    }
}
