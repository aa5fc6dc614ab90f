use crate::units::{BitRate, SimTime};

use super::packet::Packet;
use super::queue::{Queue, QueueConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A unidirectional link with an egress queue at its head.
#[derive(Debug, Clone)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    pub rate: BitRate,
    pub prop_delay: SimTime,
    pub queue: Queue,
    /// Packet currently being serialized, if any.
    pub in_flight: Option<Packet>,
    /// Number of queues currently holding this link paused.
    pub pause_count: u32,
}

impl Link {
    pub fn new(from: usize, to: usize, rate: BitRate, prop_delay: SimTime, queue: QueueConfig) -> Self {
        Link { from, to, rate, prop_delay, queue: Queue::new(queue), in_flight: None, pause_count: 0 }
    }

    pub fn serialization_time(&self, pkt: &Packet) -> SimTime {
        self.rate.serialization_time(pkt.size as u64)
    }

    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some()
    }

    pub fn is_paused(&self) -> bool {
        self.pause_count > 0
    }

    /// True when the link may start serializing its next queued packet.
    pub fn can_start(&self) -> bool {
        !self.is_busy() && !self.is_paused() && !self.queue.is_empty()
    }
}
