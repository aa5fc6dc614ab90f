//! Packet-level simulator for periodic DNN training traffic under Reno,
//! CUBIC and DCQCN, each optionally augmented so that a flow's aggressiveness
//! follows how much of its job's current iteration it has already delivered.

pub mod cc;
pub mod engine;
pub mod metrics;
pub mod mltcp;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod units;
pub mod workload;
