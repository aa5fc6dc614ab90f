//! Synthetic periodic training jobs.
//!
//! A job repeats a fixed iteration: a compute phase of `compute` and one or
//! more communication peaks, each releasing a number of bytes at an offset
//! from the iteration start. An iteration finishes once compute has elapsed
//! and every byte of the iteration has been acknowledged; the next iteration
//! starts immediately afterwards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mltcp::AggressivenessFunction;
use crate::units::{BitRate, SimTime};

/// One communication burst inside an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Peak {
    pub offset: SimTime,
    #[serde(with = "crate::units::bytes_serde")]
    pub bytes: u64,
}

fn default_flows() -> u32 {
    1
}

fn default_straggler_range() -> (f64, f64) {
    (0.05, 0.10)
}

fn default_weight() -> f64 {
    1.0
}

fn is_default_flows(v: &u32) -> bool {
    *v == 1
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

fn is_zero_time(v: &SimTime) -> bool {
    *v == SimTime::ZERO
}

fn is_default_range(v: &(f64, f64)) -> bool {
    *v == default_straggler_range()
}

fn is_default_weight(v: &f64) -> bool {
    *v == 1.0
}

/// Job definition as written in a scenario file.
///
/// Either `compute` plus `peaks` or the shorthand `period` plus `duty_cycle`
/// must be given. The shorthand yields a single peak right after compute
/// whose transfer at the job's bottleneck rate takes `duty_cycle * period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero_time")]
    pub start: SimTime,
    /// Named traffic profile from [`profiles`], used instead of
    /// `compute` + `peaks` or `period` + `duty_cycle`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peaks: Vec<Peak>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duty_cycle: Option<f64>,
    /// Parallel flows carrying the job's bytes, split evenly.
    #[serde(default = "default_flows", skip_serializing_if = "is_default_flows")]
    pub flows: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    pub iterations: u32,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub straggler_prob: f64,
    /// Straggler delay bounds as fractions of the isolation iteration time.
    #[serde(default = "default_straggler_range", skip_serializing_if = "is_default_range")]
    pub straggler_range: (f64, f64),
    /// Every iteration starts its compute phase after a uniform random
    /// delay of at most this fraction of the compute time.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub compute_jitter: f64,
    /// Constant factor used by the static-share variant.
    #[serde(default = "default_weight", skip_serializing_if = "is_default_weight")]
    pub static_weight: f64,
    /// Per-job aggressiveness function. Every augmented job of a run must
    /// end up with the same function, so this only restates the global one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggressiveness: Option<AggressivenessFunction>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JobError {
    #[error("give exactly one of profile, compute + peaks, or period + duty_cycle")]
    Shape,
    #[error("unknown job profile `{0}`")]
    UnknownProfile(String),
    #[error("duty_cycle must lie in (0, 1), got {0}")]
    DutyCycle(f64),
    #[error("peaks must carry a positive total of bytes")]
    NoBytes,
    #[error("peak offsets must be strictly increasing")]
    PeakOrder,
    #[error("straggler_prob must lie in [0, 1], got {0}")]
    StragglerProb(f64),
    #[error("straggler_range must satisfy 0 <= min <= max <= 1")]
    StragglerRange,
    #[error("compute_jitter must lie in [0, 1], got {0}")]
    Jitter(f64),
    #[error("flows must be at least 1")]
    NoFlows,
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("static_weight must be positive")]
    Weight,
}

/// A job after validation, with the shorthand expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub name: String,
    pub start: SimTime,
    pub compute: SimTime,
    pub peaks: Vec<Peak>,
    pub total_bytes: u64,
    pub flows: u32,
    pub iterations: u32,
    pub straggler_prob: f64,
    pub straggler_range: (f64, f64),
    pub compute_jitter: f64,
    pub static_weight: f64,
    /// Iteration time alone on an idle network at the bottleneck rate.
    pub isolation_time: SimTime,
}

impl JobSpec {
    /// Shorthand constructor for a single-peak job.
    pub fn periodic(period: SimTime, duty_cycle: f64, iterations: u32) -> Self {
        JobSpec {
            name: None,
            start: SimTime::ZERO,
            profile: None,
            compute: None,
            peaks: Vec::new(),
            period: Some(period),
            duty_cycle: Some(duty_cycle),
            flows: 1,
            src: None,
            dst: None,
            iterations,
            straggler_prob: 0.0,
            straggler_range: default_straggler_range(),
            compute_jitter: 0.0,
            static_weight: 1.0,
            aggressiveness: None,
        }
    }

    /// Validates and expands the job against the bottleneck rate of its path.
    pub fn resolve(&self, index: usize, bottleneck: BitRate) -> Result<Job, JobError> {
        let (compute, peaks) = match (self.compute, self.peaks.is_empty(), self.period, self.duty_cycle) {
            (None, true, None, None) => {
                let name = self.profile.as_deref().ok_or(JobError::Shape)?;
                let p = profile(name).ok_or_else(|| JobError::UnknownProfile(name.to_string()))?;
                (p.compute, p.peaks.to_vec())
            }
            _ if self.profile.is_some() => return Err(JobError::Shape),
            (Some(c), false, None, None) => (c, self.peaks.clone()),
            (None, true, Some(p), Some(d)) => {
                if !(d > 0.0 && d < 1.0) {
                    return Err(JobError::DutyCycle(d));
                }
                let compute = p.mul_f64(1.0 - d);
                let bytes = bottleneck.bytes_in(p.mul_f64(d));
                (compute, vec![Peak { offset: compute, bytes }])
            }
            _ => return Err(JobError::Shape),
        };
        let total_bytes: u64 = peaks.iter().map(|p| p.bytes).sum();
        if total_bytes == 0 {
            return Err(JobError::NoBytes);
        }
        if peaks.windows(2).any(|w| w[0].offset >= w[1].offset) {
            return Err(JobError::PeakOrder);
        }
        if !(0.0..=1.0).contains(&self.straggler_prob) {
            return Err(JobError::StragglerProb(self.straggler_prob));
        }
        let (lo, hi) = self.straggler_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(JobError::StragglerRange);
        }
        if !(0.0..=1.0).contains(&self.compute_jitter) {
            return Err(JobError::Jitter(self.compute_jitter));
        }
        if self.flows == 0 {
            return Err(JobError::NoFlows);
        }
        if self.iterations == 0 {
            return Err(JobError::NoIterations);
        }
        if !(self.static_weight > 0.0 && self.static_weight.is_finite()) {
            return Err(JobError::Weight);
        }
        let isolation_time = isolation_time(compute, &peaks, bottleneck);
        Ok(Job {
            name: self.name.clone().unwrap_or_else(|| format!("job{index}")),
            start: self.start,
            compute,
            peaks,
            total_bytes,
            flows: self.flows,
            iterations: self.iterations,
            straggler_prob: self.straggler_prob,
            straggler_range: self.straggler_range,
            compute_jitter: self.compute_jitter,
            static_weight: self.static_weight,
            isolation_time,
        })
    }
}

/// Named desk-scale traffic shape. The shapes are loosely inspired by common
/// training workloads and are not calibrated against real models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobProfile {
    pub name: &'static str,
    pub description: &'static str,
    pub compute: SimTime,
    pub peaks: &'static [Peak],
}

const fn peak(offset_us: u64, bytes: u64) -> Peak {
    Peak { offset: SimTime(offset_us * 1_000), bytes }
}

const PROFILES: &[JobProfile] = &[
    JobProfile {
        name: "vgg16-like",
        description: "single gradient burst after compute, about 45% communication at 5 Gbps",
        compute: SimTime(8_800_000),
        peaks: &[peak(8_800, 4_500_000)],
    },
    JobProfile {
        name: "gpt2-like",
        description: "longer compute with a single burst, about 35% communication at 5 Gbps",
        compute: SimTime(15_600_000),
        peaks: &[peak(15_600, 5_250_000)],
    },
    JobProfile {
        name: "gpt3-like",
        description: "hybrid parallelism with two small activation bursts and a final gradient burst",
        compute: SimTime(12_000_000),
        peaks: &[peak(4_000, 1_250_000), peak(8_000, 1_250_000), peak(12_000, 2_500_000)],
    },
];

/// Built-in job profiles.
pub fn profiles() -> &'static [JobProfile] {
    PROFILES
}

pub fn profile(name: &str) -> Option<&'static JobProfile> {
    PROFILES.iter().find(|p| p.name == name)
}

/// Iteration time of a job alone on a link of rate `rate`, ignoring
/// propagation delay: peaks are served back to back in order, each no
/// earlier than its offset.
pub fn isolation_time(compute: SimTime, peaks: &[Peak], rate: BitRate) -> SimTime {
    let mut t = SimTime::ZERO;
    for p in peaks {
        t = t.max(p.offset) + rate.serialization_time(p.bytes);
    }
    t.max(compute)
}

/// Random compute delay for one iteration.
pub fn sample_straggler<R: Rng + ?Sized>(job: &Job, rng: &mut R) -> SimTime {
    if job.straggler_prob <= 0.0 || !rng.random_bool(job.straggler_prob) {
        return SimTime::ZERO;
    }
    let (lo, hi) = job.straggler_range;
    let frac = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    job.isolation_time.mul_f64(frac)
}

/// Random delay before an iteration's compute phase.
pub fn sample_jitter<R: Rng + ?Sized>(job: &Job, rng: &mut R) -> SimTime {
    if job.compute_jitter <= 0.0 {
        return SimTime::ZERO;
    }
    job.compute.mul_f64(rng.random_range(0.0..=job.compute_jitter))
}

/// Measured outcome of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IterationRecord {
    pub job: usize,
    pub index: u32,
    pub start: SimTime,
    /// First data packet of the iteration left the sender.
    pub comm_start: SimTime,
    /// Last byte of the iteration was acknowledged.
    pub comm_end: SimTime,
    pub duration: SimTime,
    pub bytes_delivered: u64,
    /// Straggler delay injected into this iteration.
    pub straggler_delay: SimTime,
}

impl IterationRecord {
    pub fn end(&self) -> SimTime {
        self.start + self.duration
    }
}

/// Packing score of jobs sharing one link, in `(0, 1]`.
///
/// `duty_j` is the fraction of job `j`'s isolation period spent
/// communicating on the link. The base score is `min(1, 1 / sum(duty_j))`.
/// When periods differ it is multiplied, for each job, by
/// `1 - |k - round(k)| / k` with `k = longest period / period_j`, which
/// penalizes periods that are not near-integer multiples of each other.
pub fn compatibility_score(jobs: &[(SimTime, f64)]) -> f64 {
    if jobs.len() < 2 {
        return 1.0;
    }
    let total_duty: f64 = jobs.iter().map(|&(_, d)| d).sum();
    let packing = if total_duty > 0.0 { (1.0 / total_duty).min(1.0) } else { 1.0 };
    let longest = jobs.iter().map(|&(p, _)| p.as_nanos()).max().unwrap_or(0) as f64;
    let mismatch: f64 = jobs
        .iter()
        .map(|&(p, _)| {
            let k = longest / p.as_nanos().max(1) as f64;
            1.0 - (k - k.round()).abs() / k
        })
        .product();
    packing * mismatch
}

/// Duty cycle of a resolved job on a link of rate `rate`.
pub fn duty_cycle(job: &Job, rate: BitRate) -> f64 {
    let comm = rate.serialization_time(job.total_bytes);
    comm.as_secs_f64() / job.isolation_time.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn job(prob: f64, range: (f64, f64)) -> Job {
        let mut spec = JobSpec::periodic(SimTime::from_millis(100), 0.4, 10);
        spec.straggler_prob = prob;
        spec.straggler_range = range;
        spec.resolve(0, BitRate::gbps(5)).unwrap()
    }

    #[test]
    fn isolation_of_compute_then_peak() {
        // 25 MB at 5 Gbps is 40 ms; the peak starts after 60 ms of compute.
        let peaks = [Peak { offset: SimTime::from_millis(60), bytes: 25_000_000 }];
        let t = isolation_time(SimTime::from_millis(60), &peaks, BitRate::gbps(5));
        assert_eq!(t, SimTime::from_millis(100));
    }

    #[test]
    fn shorthand_expands_to_single_peak() {
        let j = job(0.0, (0.05, 0.1));
        assert_eq!(j.compute, SimTime::from_millis(60));
        assert_eq!(j.peaks.len(), 1);
        assert_eq!(j.total_bytes, 25_000_000);
        assert_eq!(j.isolation_time, SimTime::from_millis(100));
    }

    #[test]
    fn profiles_resolve() {
        for p in profiles() {
            let mut s = JobSpec::periodic(SimTime::from_millis(1), 0.5, 1);
            s.period = None;
            s.duty_cycle = None;
            s.profile = Some(p.name.to_string());
            let job = s.resolve(0, BitRate::gbps(5)).unwrap();
            assert_eq!(job.compute, p.compute);
            assert!(job.isolation_time >= p.compute);
        }
        let mut s = JobSpec::periodic(SimTime::from_millis(1), 0.5, 1);
        s.profile = Some("vgg16-like".into());
        assert_eq!(s.resolve(0, BitRate::gbps(5)), Err(JobError::Shape));
        s.period = None;
        s.duty_cycle = None;
        s.profile = Some("nope".into());
        assert_eq!(s.resolve(0, BitRate::gbps(5)), Err(JobError::UnknownProfile("nope".into())));
    }

    #[test]
    fn shape_errors() {
        let mut s = JobSpec::periodic(SimTime::from_millis(10), 0.5, 1);
        s.compute = Some(SimTime::from_millis(1));
        assert_eq!(s.resolve(0, BitRate::gbps(1)), Err(JobError::Shape));
        let bad = JobSpec::periodic(SimTime::from_millis(10), 1.5, 1);
        assert_eq!(bad.resolve(0, BitRate::gbps(1)), Err(JobError::DutyCycle(1.5)));
        let mut order = JobSpec::periodic(SimTime::from_millis(10), 0.5, 1);
        order.period = None;
        order.duty_cycle = None;
        order.compute = Some(SimTime::from_millis(1));
        order.peaks = vec![
            Peak { offset: SimTime::from_millis(2), bytes: 1 },
            Peak { offset: SimTime::from_millis(2), bytes: 1 },
        ];
        assert_eq!(order.resolve(0, BitRate::gbps(1)), Err(JobError::PeakOrder));
    }

    #[test]
    fn jitter_is_bounded_by_its_fraction() {
        let mut spec = JobSpec::periodic(SimTime::from_millis(100), 0.4, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let still = spec.resolve(0, BitRate::gbps(5)).unwrap();
        assert_eq!(sample_jitter(&still, &mut rng), SimTime::ZERO);
        spec.compute_jitter = 0.1;
        let job = spec.resolve(0, BitRate::gbps(5)).unwrap();
        let bound = job.compute.mul_f64(0.1);
        let draws: Vec<SimTime> = (0..200).map(|_| sample_jitter(&job, &mut rng)).collect();
        assert!(draws.iter().all(|&d| d <= bound));
        assert!(draws.iter().any(|&d| d > SimTime::ZERO));
        spec.compute_jitter = 1.5;
        assert_eq!(spec.resolve(0, BitRate::gbps(5)), Err(JobError::Jitter(1.5)));
    }

    #[test]
    fn straggler_never_with_zero_prob() {
        let j = job(0.0, (0.05, 0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(sample_straggler(&j, &mut rng), SimTime::ZERO);
        }
    }

    #[test]
    fn straggler_degenerate_range() {
        let j = job(1.0, (0.05, 0.05));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(sample_straggler(&j, &mut rng), SimTime::from_millis(5));
        let ten = job(1.0, (0.10, 0.10));
        assert_eq!(sample_straggler(&ten, &mut rng), SimTime::from_millis(10));
    }

    #[test]
    fn straggler_frequency() {
        let j = job(0.25, (0.05, 0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 10_000;
        let hits = (0..trials).filter(|_| sample_straggler(&j, &mut rng) > SimTime::ZERO).count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - 0.25).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn compatibility_examples() {
        let p = SimTime::from_millis(10);
        assert_eq!(compatibility_score(&[(p, 0.5), (p, 0.5)]), 1.0);
        assert!((compatibility_score(&[(p, 0.6), (p, 0.6)]) - 1.0 / 1.2).abs() < 1e-12);
        assert_eq!(compatibility_score(&[(p, 0.9)]), 1.0);
        let harmonic = compatibility_score(&[(p, 0.2), (SimTime::from_millis(20), 0.2)]);
        assert_eq!(harmonic, 1.0);
        let skewed = compatibility_score(&[(p, 0.2), (SimTime::from_millis(15), 0.2)]);
        assert!(skewed < 1.0);
    }
}
