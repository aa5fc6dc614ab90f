use std::collections::{BTreeMap, BTreeSet};

use crate::cc::CongestionControl;
use crate::engine::{FlowId, LinkId};
use crate::units::SimTime;

/// Maximum number of consecutive timeout backoffs.
const MAX_BACKOFF: u32 = 6;

/// Sender and receiver state of one transport connection.
///
/// Segments are numbered across iterations. `app_limit` is the number of
/// segments the application has released so far; the sender never passes
/// it. Loss recovery is NewReno with a pipe estimate: each duplicate ack
/// counts one segment as having left the network.
pub struct Flow {
    pub id: FlowId,
    pub job: usize,
    pub tracker: usize,
    pub data_path: Vec<LinkId>,
    pub ack_path: Vec<LinkId>,
    pub cc: Box<dyn CongestionControl + Send>,
    pub rate_based: bool,
    pub mtu: u32,

    pub app_limit: u64,
    /// Sizes of segments shorter than the MTU.
    pub short_segments: BTreeMap<u64, u32>,
    pub snd_una: u64,
    pub snd_nxt: u64,
    pub snd_max: u64,
    pub dupacks: u32,
    pub sacked: u64,
    pub in_recovery: bool,
    pub recover: u64,
    /// Segment to retransmit before any new data.
    pub retransmit: Option<u64>,

    pub srtt: Option<f64>,
    pub rttvar: f64,
    pub rto_min: SimTime,
    pub backoff: u32,
    pub rto_deadline: Option<SimTime>,
    pub rto_event: Option<SimTime>,

    pub next_send: SimTime,
    pub send_event: bool,
    pub cc_timer: Option<SimTime>,
    pub idle_since: Option<SimTime>,
    /// Data packets sent but not yet serialized by the source NIC.
    pub nic_queued: u32,
    /// Time the latest data packet reaches the NIC queue.
    pub last_inject: SimTime,
    /// The last send attempt stopped because the window was full.
    pub cwnd_limited: bool,

    pub timeouts: u64,
    pub fast_retransmits: u64,

    pub rcv_nxt: u64,
    pub out_of_order: BTreeSet<u64>,
    pub last_cnp: Option<SimTime>,
}

/// What the sender should do after processing an ack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckOutcome {
    pub newly_acked: u64,
    pub fast_retransmit: bool,
}

impl Flow {
    pub fn segment_size(&self, seq: u64) -> u32 {
        self.short_segments.get(&seq).copied().unwrap_or(self.mtu)
    }

    /// Appends `bytes` of application data as segments.
    pub fn release(&mut self, bytes: u64) {
        if bytes == 0 {
            return;
        }
        let mtu = self.mtu as u64;
        let full = bytes / mtu;
        let rest = bytes % mtu;
        self.app_limit += full;
        if rest > 0 {
            self.short_segments.insert(self.app_limit, rest as u32);
            self.app_limit += 1;
        }
    }

    pub fn outstanding(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn pipe(&self) -> u64 {
        self.outstanding().saturating_sub(self.sacked)
    }

    pub fn has_new_data(&self) -> bool {
        self.snd_nxt < self.app_limit
    }

    pub fn finished(&self) -> bool {
        self.snd_una == self.app_limit
    }

    /// Whether the window admits one more segment.
    pub fn window_open(&self, cwnd: f64) -> bool {
        (self.pipe() as f64) < cwnd.floor().max(1.0)
    }

    pub fn rto(&self) -> SimTime {
        let base = match self.srtt {
            Some(srtt) => SimTime::from_secs_f64((srtt + 4.0 * self.rttvar) * 1e-9).max(self.rto_min),
            None => self.rto_min,
        };
        SimTime(base.as_nanos().saturating_mul(1 << self.backoff))
    }

    pub fn rtt_sample(&mut self, rtt: SimTime) {
        let r = rtt.as_nanos() as f64;
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - r).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * r);
            }
        }
    }

    /// Sender side of a cumulative ack for segment `ack` (next expected).
    pub fn on_ack(&mut self, ack: u64) -> AckOutcome {
        let ack = ack.min(self.snd_max);
        if ack > self.snd_una {
            let newly = ack - self.snd_una;
            self.snd_una = ack;
            if self.snd_nxt < ack {
                self.snd_nxt = ack;
            }
            self.backoff = 0;
            self.dupacks = 0;
            if self.in_recovery {
                if ack >= self.recover {
                    self.in_recovery = false;
                    self.sacked = 0;
                } else {
                    self.sacked = self.sacked.saturating_sub(newly - 1);
                    self.retransmit = Some(ack);
                }
            } else {
                self.sacked = 0;
            }
            self.sacked = self.sacked.min(self.outstanding());
            if let Some(&first) = self.short_segments.keys().next() {
                if first < ack {
                    self.short_segments = self.short_segments.split_off(&ack);
                }
            }
            return AckOutcome { newly_acked: newly, fast_retransmit: false };
        }
        if self.outstanding() == 0 {
            return AckOutcome { newly_acked: 0, fast_retransmit: false };
        }
        self.dupacks += 1;
        self.sacked = (self.sacked + 1).min(self.outstanding().saturating_sub(1));
        let fast = !self.in_recovery && self.dupacks == 3 && self.snd_una >= self.recover;
        if fast {
            self.fast_retransmits += 1;
            self.in_recovery = true;
            self.recover = self.snd_max;
            self.retransmit = Some(self.snd_una);
        }
        AckOutcome { newly_acked: 0, fast_retransmit: fast }
    }

    /// Retransmission timeout: go back to the first unacknowledged segment.
    pub fn on_timeout(&mut self) {
        self.timeouts += 1;
        self.backoff = (self.backoff + 1).min(MAX_BACKOFF);
        self.snd_nxt = self.snd_una;
        self.in_recovery = false;
        self.recover = self.snd_max;
        self.dupacks = 0;
        self.sacked = 0;
        self.retransmit = None;
    }

    /// Receiver side. Returns the cumulative ack to send.
    pub fn receive(&mut self, seq: u64) -> u64 {
        if seq == self.rcv_nxt {
            self.rcv_nxt += 1;
            while self.out_of_order.remove(&self.rcv_nxt) {
                self.rcv_nxt += 1;
            }
        } else if seq > self.rcv_nxt {
            self.out_of_order.insert(seq);
        }
        self.rcv_nxt
    }
}
