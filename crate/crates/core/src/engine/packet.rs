use crate::units::SimTime;

/// Index of a flow within one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u32);

/// Size of acknowledgement and congestion-notification packets on the wire.
pub const ACK_SIZE: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Data,
    /// Cumulative acknowledgement travelling back to the sender.
    Ack,
    /// DCQCN congestion notification from receiver to sender.
    Cnp,
}

/// Abstract packet. Headers are plain fields; there is no wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub flow: FlowId,
    pub kind: PacketKind,
    /// Segment number for data, cumulative next-expected segment for acks.
    pub seq: u64,
    pub size: u32,
    /// Segments whose arrival this ack reports. Always `>= 1` on acks.
    pub acked_count: u32,
    /// ECN-capable transport.
    pub ect: bool,
    /// Congestion Experienced. Only queues set this.
    pub ecn_marked: bool,
    /// Sender timestamp on data; echoed back on the matching ack.
    pub ts: SimTime,
    /// Index of the next link on the packet's path.
    pub hop: u16,
}

impl Packet {
    pub fn data(flow: FlowId, seq: u64, size: u32, ect: bool, ts: SimTime) -> Self {
        debug_assert!(size > 0);
        Packet { flow, kind: PacketKind::Data, seq, size, acked_count: 0, ect, ecn_marked: false, ts, hop: 0 }
    }

    pub fn ack(flow: FlowId, cumulative: u64, acked_count: u32, echo_ts: SimTime) -> Self {
        debug_assert!(acked_count >= 1);
        Packet {
            flow,
            kind: PacketKind::Ack,
            seq: cumulative,
            size: ACK_SIZE,
            acked_count,
            ect: false,
            ecn_marked: false,
            ts: echo_ts,
            hop: 0,
        }
    }

    pub fn cnp(flow: FlowId, ts: SimTime) -> Self {
        Packet { flow, kind: PacketKind::Cnp, seq: 0, size: ACK_SIZE, acked_count: 0, ect: false, ecn_marked: false, ts, hop: 0 }
    }

    pub fn is_ack(&self) -> bool {
        self.kind == PacketKind::Ack
    }

    pub fn is_cnp(&self) -> bool {
        self.kind == PacketKind::Cnp
    }

    pub fn is_data(&self) -> bool {
        self.kind == PacketKind::Data
    }
}
