use crate::units::SimTime;
use crate::workload::IterationRecord;

/// Everything a run produced, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub jobs: Vec<JobReport>,
    /// Links that carried a drop or mark, plus every monitored link, in
    /// link-id order.
    pub links: Vec<LinkReport>,
    pub score_bin: SimTime,
    pub output_bin: SimTime,
    pub activity_threshold: f64,
    pub warmup_iterations: u32,
    /// Clock when the run stopped.
    pub end_time: SimTime,
    /// True when the time cap stopped the run before every job finished.
    pub truncated: bool,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobReport {
    pub name: String,
    pub isolation_time: SimTime,
    pub iterations: Vec<IterationRecord>,
    /// Retransmission timeouts over all of the job's flows.
    pub timeouts: u64,
    pub fast_retransmits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport {
    pub name: String,
    pub rate_bps: u64,
    pub monitored: bool,
    /// Indices of jobs whose data path crosses the link.
    pub jobs: Vec<usize>,
    pub drops: u64,
    pub marks: u64,
    pub pauses: u64,
    /// Drops per millisecond of simulated time.
    pub drops_per_ms: Vec<u64>,
    pub marks_per_ms: Vec<u64>,
    /// Data bytes per score bin, indexed `[job][bin]`. Empty unless
    /// monitored.
    pub score_bins: Vec<Vec<u64>>,
    /// Data bytes per output bin, indexed `[job][bin]`. Empty unless
    /// monitored.
    pub output_bins: Vec<Vec<u64>>,
}

impl RunReport {
    pub fn job_durations(&self, job: usize) -> Vec<SimTime> {
        self.jobs[job].iterations.iter().map(|r| r.duration).collect()
    }

    /// Monitored links, in report order.
    pub fn monitored(&self) -> impl Iterator<Item = &LinkReport> {
        self.links.iter().filter(|l| l.monitored)
    }

    pub fn link(&self, name: &str) -> Option<&LinkReport> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn total_drops(&self) -> u64 {
        self.links.iter().map(|l| l.drops).sum()
    }

    pub fn total_marks(&self) -> u64 {
        self.links.iter().map(|l| l.marks).sum()
    }

    /// Drops and marks summed over all links within `[from, to)`, at
    /// millisecond granularity.
    pub fn drops_and_marks_between(&self, from: SimTime, to: SimTime) -> (u64, u64) {
        let a = (from.as_nanos() / 1_000_000) as usize;
        let b = to.as_nanos().div_ceil(1_000_000) as usize;
        let sum = |v: &Vec<u64>| v.iter().skip(a).take(b.saturating_sub(a)).sum::<u64>();
        self.links.iter().fold((0, 0), |(d, m), l| (d + sum(&l.drops_per_ms), m + sum(&l.marks_per_ms)))
    }
}
