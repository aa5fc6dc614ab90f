use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::packet::Packet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueueMode {
    /// Tail drop when full, no marking.
    DropTail,
    /// Tail drop when full, plus RED-style probabilistic ECN marking of
    /// ECN-capable packets.
    Ecn,
}

/// Egress buffer configuration. All sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueConfig {
    pub capacity: u64,
    pub mode: QueueMode,
    pub ecn_kmin: u64,
    pub ecn_kmax: u64,
    pub ecn_pmax: f64,
    /// When set the queue is lossless: instead of dropping, it asks the
    /// sender to pause once occupancy reaches this many bytes.
    pub pause_threshold: Option<u64>,
}

impl QueueConfig {
    pub fn drop_tail(capacity: u64) -> Self {
        QueueConfig { capacity, mode: QueueMode::DropTail, ecn_kmin: 0, ecn_kmax: 0, ecn_pmax: 0.0, pause_threshold: None }
    }

    pub fn ecn(capacity: u64, kmin: u64, kmax: u64, pmax: f64) -> Self {
        QueueConfig { capacity, mode: QueueMode::Ecn, ecn_kmin: kmin, ecn_kmax: kmax, ecn_pmax: pmax, pause_threshold: None }
    }

    pub fn lossless(mut self, pause_threshold: u64) -> Self {
        self.pause_threshold = Some(pause_threshold);
        self
    }

    /// Marking probability for a packet arriving when `occupancy` bytes are
    /// already queued.
    pub fn mark_probability(&self, occupancy: u64) -> f64 {
        if self.mode != QueueMode::Ecn {
            return 0.0;
        }
        if occupancy >= self.ecn_kmax {
            1.0
        } else if occupancy < self.ecn_kmin {
            0.0
        } else {
            let span = (self.ecn_kmax - self.ecn_kmin) as f64;
            (occupancy - self.ecn_kmin) as f64 / span * self.ecn_pmax
        }
    }

    /// Occupancy at which paused senders are released again.
    pub fn resume_threshold(&self) -> Option<u64> {
        self.pause_threshold.map(|t| t.saturating_sub(2 * 1500))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Enqueued,
    EnqueuedMarked,
    Dropped,
    /// Lossless queue above its pause threshold. The packet was queued
    /// (and possibly marked); the upstream sender must stop.
    SenderPaused { marked: bool },
}

impl EnqueueOutcome {
    pub fn accepted(self) -> bool {
        self != EnqueueOutcome::Dropped
    }

    pub fn marked(self) -> bool {
        matches!(self, EnqueueOutcome::EnqueuedMarked | EnqueueOutcome::SenderPaused { marked: true })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub enqueued: u64,
    pub dequeued: u64,
    pub dropped: u64,
    pub marked: u64,
    pub pauses: u64,
}

/// FIFO byte-limited buffer in front of a link.
#[derive(Debug, Clone)]
pub struct Queue {
    config: QueueConfig,
    packets: VecDeque<Packet>,
    occupancy: u64,
    stats: QueueStats,
}

impl Queue {
    pub fn new(config: QueueConfig) -> Self {
        Queue { config, packets: VecDeque::new(), occupancy: 0, stats: QueueStats::default() }
    }

    pub fn config(&self) -> &QueueConfig {
        &self.config
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    pub fn enqueue<R: Rng + ?Sized>(&mut self, mut pkt: Packet, rng: &mut R) -> EnqueueOutcome {
        assert!(pkt.size > 0, "zero-length packet");
        let size = pkt.size as u64;
        let cfg = &self.config;
        let lossless = cfg.pause_threshold.is_some();

        if self.occupancy + size > cfg.capacity {
            if lossless {
                panic!(
                    "lossless queue overflow: {} + {} bytes exceeds capacity {} (pause headroom too small)",
                    self.occupancy, size, cfg.capacity
                );
            }
            self.stats.dropped += 1;
            return EnqueueOutcome::Dropped;
        }

        let mut marked = false;
        if pkt.ect && cfg.mode == QueueMode::Ecn {
            let p = cfg.mark_probability(self.occupancy);
            // Draw only inside the ramp so runs with idle queues consume no
            // randomness.
            marked = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
        }
        let pause = cfg.pause_threshold.is_some_and(|t| self.occupancy >= t);

        if marked {
            pkt.ecn_marked = true;
            self.stats.marked += 1;
        }
        self.occupancy += size;
        assert!(self.occupancy <= cfg.capacity);
        self.packets.push_back(pkt);
        self.stats.enqueued += 1;

        if pause {
            self.stats.pauses += 1;
            EnqueueOutcome::SenderPaused { marked }
        } else if marked {
            EnqueueOutcome::EnqueuedMarked
        } else {
            EnqueueOutcome::Enqueued
        }
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        let pkt = self.packets.pop_front()?;
        self.occupancy -= pkt.size as u64;
        self.stats.dequeued += 1;
        Some(pkt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::packet::FlowId;
    use crate::units::SimTime;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pkt(size: u32) -> Packet {
        Packet::data(FlowId(0), 0, size, true, SimTime::ZERO)
    }

    fn fill(q: &mut Queue, bytes: u64, rng: &mut ChaCha8Rng) {
        while q.occupancy() + 1000 <= bytes {
            q.enqueue(Packet::data(FlowId(1), 0, 1000, false, SimTime::ZERO), rng);
        }
        let rest = bytes - q.occupancy();
        if rest > 0 {
            q.enqueue(Packet::data(FlowId(1), 0, rest as u32, false, SimTime::ZERO), rng);
        }
        assert_eq!(q.occupancy(), bytes);
    }

    #[test]
    fn empty_queue_accepts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = Queue::new(QueueConfig::drop_tail(100_000));
        assert_eq!(q.enqueue(pkt(1500), &mut rng), EnqueueOutcome::Enqueued);
        assert_eq!(q.occupancy(), 1500);
    }

    #[test]
    fn drop_tail_drops_only_on_overflow() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = Queue::new(QueueConfig::drop_tail(3000));
        assert!(q.enqueue(pkt(1500), &mut rng).accepted());
        assert!(q.enqueue(pkt(1500), &mut rng).accepted());
        assert_eq!(q.enqueue(pkt(1), &mut rng), EnqueueOutcome::Dropped);
        assert_eq!(q.occupancy(), 3000);
        q.dequeue();
        assert!(q.enqueue(pkt(1500), &mut rng).accepted());
        let s = q.stats();
        assert_eq!(s.enqueued, s.dequeued + q.len() as u64);
        assert_eq!(s.dropped, 1);
    }

    #[test]
    fn ecn_ramp_endpoints() {
        let cfg = QueueConfig::ecn(1_000_000, 10_000, 40_000, 0.2);
        assert_eq!(cfg.mark_probability(9_999), 0.0);
        assert_eq!(cfg.mark_probability(10_000), 0.0);
        assert!((cfg.mark_probability(25_000) - 0.1).abs() < 1e-12);
        assert_eq!(cfg.mark_probability(40_000), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q = Queue::new(cfg);
        fill(&mut q, 40_000, &mut rng);
        for _ in 0..100 {
            assert_eq!(q.enqueue(pkt(100), &mut rng), EnqueueOutcome::EnqueuedMarked);
        }
    }

    #[test]
    fn non_ect_packets_are_never_marked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q = Queue::new(QueueConfig::ecn(1_000_000, 0, 1, 1.0));
        fill(&mut q, 5_000, &mut rng);
        let out = q.enqueue(Packet::data(FlowId(0), 0, 100, false, SimTime::ZERO), &mut rng);
        assert_eq!(out, EnqueueOutcome::Enqueued);
    }

    #[test]
    fn midpoint_marking_frequency() {
        // Closed form at the ramp midpoint: (1/2) * pmax = 0.25.
        let (kmin, kmax) = (100_000u64, 400_000u64);
        let cfg = QueueConfig::ecn(10_000_000, kmin, kmax, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut q = Queue::new(cfg);
        fill(&mut q, (kmin + kmax) / 2, &mut rng);
        let trials = 100_000;
        let mut marked = 0;
        for _ in 0..trials {
            let out = q.enqueue(pkt(1), &mut rng);
            q.dequeue_last_for_test();
            if out.marked() {
                marked += 1;
            }
        }
        let freq = marked as f64 / trials as f64;
        assert!((freq - 0.25).abs() <= 0.02, "empirical marking frequency {freq}");
    }

    #[test]
    fn lossless_pauses_instead_of_dropping() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = Queue::new(QueueConfig::drop_tail(100_000).lossless(3000));
        assert_eq!(q.enqueue(pkt(1500), &mut rng), EnqueueOutcome::Enqueued);
        assert_eq!(q.enqueue(pkt(1500), &mut rng), EnqueueOutcome::Enqueued);
        assert_eq!(q.enqueue(pkt(1500), &mut rng), EnqueueOutcome::SenderPaused { marked: false });
        assert_eq!(q.stats().dropped, 0);
        assert_eq!(q.len(), 3);
    }

    impl Queue {
        fn dequeue_last_for_test(&mut self) {
            let p = self.packets.pop_back().unwrap();
            self.occupancy -= p.size as u64;
            self.stats.enqueued -= 1;
        }
    }
}
