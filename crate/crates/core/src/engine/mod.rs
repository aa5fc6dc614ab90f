//! Deterministic discrete-event substrate: clock and event queue, packets,
//! switch queues and links.

mod event;
mod link;
mod packet;
mod queue;

pub use event::{EventQueue, ScheduleError};
pub use link::{Link, LinkId};
pub use packet::{FlowId, Packet, PacketKind, ACK_SIZE};
pub use queue::{EnqueueOutcome, Queue, QueueConfig, QueueMode, QueueStats};
