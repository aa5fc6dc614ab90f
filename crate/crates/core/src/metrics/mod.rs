//! Post-run analysis: interleaving score, iteration-time statistics,
//! speedups, and the CSV report files.

use std::fs::File;
use std::path::Path;

use crate::sim::{LinkReport, RunReport};
use crate::units::SimTime;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("percentile of an empty sample")]
    Empty,
    #[error("percentile must lie in (0, 100], got {0}")]
    BadPercentile(f64),
    #[error("reports differ in job count ({0} vs {1})")]
    JobMismatch(usize, usize),
    #[error("i/o error writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error writing report: {0}")]
    Csv(#[from] csv::Error),
}

/// Fraction of busy bins in `[from_bin, to_bin)` in which at most one job
/// was active. `bins[job][bin]` holds bytes; a job is active in a bin when
/// it moved at least `threshold * capacity` bytes. Returns 1 when no bin is
/// busy.
pub fn interleaving_score(bins: &[Vec<u64>], from_bin: usize, to_bin: usize, capacity: f64, threshold: f64) -> f64 {
    let min_bytes = threshold * capacity;
    let mut busy = 0u64;
    let mut collisions = 0u64;
    for b in from_bin..to_bin {
        let active = bins.iter().filter(|v| v.get(b).is_some_and(|&x| x as f64 >= min_bytes)).count();
        if active >= 1 {
            busy += 1;
        }
        if active >= 2 {
            collisions += 1;
        }
    }
    if busy == 0 {
        1.0
    } else {
        1.0 - collisions as f64 / busy as f64
    }
}

/// Bytes a link can carry in one score bin.
pub fn bin_capacity(link: &LinkReport, bin: SimTime) -> f64 {
    link.rate_bps as f64 * bin.as_secs_f64() / 8.0
}

/// Interleaving score on `link`, one value per iteration of the link's
/// reference job (its lowest-index job), computed over that iteration's
/// time span.
pub fn score_series(report: &RunReport, link: &LinkReport) -> Vec<f64> {
    let Some(&reference) = link.jobs.first() else { return Vec::new() };
    let bin = report.score_bin.as_nanos();
    let cap = bin_capacity(link, report.score_bin);
    report.jobs[reference]
        .iterations
        .iter()
        .map(|r| {
            let from = (r.start.as_nanos() / bin) as usize;
            let to = (r.end().as_nanos().div_ceil(bin)) as usize;
            interleaving_score(&link.score_bins, from, to, cap, report.activity_threshold)
        })
        .collect()
}

/// Score over the whole run on `link`.
pub fn overall_score(report: &RunReport, link: &LinkReport) -> f64 {
    let len = link.score_bins.iter().map(Vec::len).max().unwrap_or(0);
    interleaving_score(&link.score_bins, 0, len, bin_capacity(link, report.score_bin), report.activity_threshold)
}

/// Nearest-rank percentile, `p` in (0, 100].
pub fn percentile(values: &[f64], p: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(MetricsError::BadPercentile(p));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Iteration durations of one job in seconds, after warmup.
pub fn durations(report: &RunReport, job: usize) -> Vec<f64> {
    report.jobs[job]
        .iterations
        .iter()
        .skip(report.warmup_iterations as usize)
        .map(|r| r.duration.as_secs_f64())
        .collect()
}

/// Iteration durations of every job, pooled, after warmup.
pub fn pooled_durations(report: &RunReport) -> Vec<f64> {
    (0..report.jobs.len()).flat_map(|j| durations(report, j)).collect()
}

/// Mean and p99 iteration time speedup of `candidate` over `baseline`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speedup {
    pub mean: f64,
    pub p99: f64,
}

fn speedup_of(base: &[f64], cand: &[f64]) -> Result<Speedup, MetricsError> {
    let bm = mean(base).ok_or(MetricsError::Empty)?;
    let cm = mean(cand).ok_or(MetricsError::Empty)?;
    Ok(Speedup { mean: bm / cm, p99: percentile(base, 99.0)? / percentile(cand, 99.0)? })
}

/// Per-job speedups of `candidate` over `baseline`.
pub fn job_speedups(baseline: &RunReport, candidate: &RunReport) -> Result<Vec<Speedup>, MetricsError> {
    if baseline.jobs.len() != candidate.jobs.len() {
        return Err(MetricsError::JobMismatch(baseline.jobs.len(), candidate.jobs.len()));
    }
    (0..baseline.jobs.len()).map(|j| speedup_of(&durations(baseline, j), &durations(candidate, j))).collect()
}

/// Speedup over all iterations of all jobs.
pub fn pooled_speedup(baseline: &RunReport, candidate: &RunReport) -> Result<Speedup, MetricsError> {
    if baseline.jobs.len() != candidate.jobs.len() {
        return Err(MetricsError::JobMismatch(baseline.jobs.len(), candidate.jobs.len()));
    }
    speedup_of(&pooled_durations(baseline), &pooled_durations(candidate))
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSummary {
    pub job: String,
    pub mean_ns: u64,
    pub p99_ns: u64,
    /// Mean per-iteration score on the first monitored link the job
    /// crosses, after warmup. `None` when the job crosses no monitored link.
    pub interleaving_score: Option<f64>,
}

pub fn summarize(report: &RunReport) -> Vec<JobSummary> {
    (0..report.jobs.len())
        .map(|j| {
            let d = durations(report, j);
            let score = report.monitored().find(|l| l.jobs.contains(&j)).and_then(|l| {
                let s: Vec<f64> = score_series(report, l).into_iter().skip(report.warmup_iterations as usize).collect();
                mean(&s)
            });
            JobSummary {
                job: report.jobs[j].name.clone(),
                mean_ns: mean(&d).map(|m| (m * 1e9).round() as u64).unwrap_or(0),
                p99_ns: percentile(&d, 99.0).map(|p| (p * 1e9).round() as u64).unwrap_or(0),
                interleaving_score: score,
            }
        })
        .collect()
}

/// Names of the report files, in the order [`write_report`] writes them.
pub const REPORT_FILES: [&str; 4] = ["iterations.csv", "drops.csv", "utilization.csv", "summary.csv"];

/// Writes the four CSV files into `dir`, creating it if needed.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<(), MetricsError> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_writer(File::create(dir.join(REPORT_FILES[0]))?);
    w.write_record(["job", "index", "start_ns", "duration_ns"])?;
    for job in &report.jobs {
        for r in &job.iterations {
            w.write_record([
                job.name.clone(),
                r.index.to_string(),
                r.start.as_nanos().to_string(),
                r.duration.as_nanos().to_string(),
            ])?;
        }
    }
    w.flush()?;

    let seconds = report.end_time.as_nanos() / 1_000_000_000 + 1;
    let mut w = csv::Writer::from_writer(File::create(dir.join(REPORT_FILES[1]))?);
    w.write_record(["link", "second", "drops", "ecn_marks"])?;
    for link in &report.links {
        for s in 0..seconds as usize {
            let sum = |v: &Vec<u64>| v.iter().skip(s * 1000).take(1000).sum::<u64>();
            w.write_record([
                link.name.clone(),
                s.to_string(),
                sum(&link.drops_per_ms).to_string(),
                sum(&link.marks_per_ms).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let bin = report.output_bin.as_nanos();
    let mut w = csv::Writer::from_writer(File::create(dir.join(REPORT_FILES[2]))?);
    w.write_record(["link", "bin_start_ns", "job", "bytes"])?;
    for link in report.monitored() {
        let len = link.output_bins.iter().map(Vec::len).max().unwrap_or(0);
        for b in 0..len {
            for (j, bins) in link.output_bins.iter().enumerate() {
                let bytes = bins.get(b).copied().unwrap_or(0);
                if bytes > 0 {
                    w.write_record([
                        link.name.clone(),
                        (b as u64 * bin).to_string(),
                        report.jobs[j].name.clone(),
                        bytes.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(File::create(dir.join(REPORT_FILES[3]))?);
    w.write_record(["job", "mean_ns", "p99_ns", "interleaving_score"])?;
    for s in summarize(report) {
        w.write_record([
            s.job,
            s.mean_ns.to_string(),
            s.p99_ns.to_string(),
            s.interleaving_score.map(|x| format!("{x:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 99.0).unwrap(), 99.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 100.0);
        assert_eq!(percentile(&[5.0, 1.0, 3.0], 50.0).unwrap(), 3.0);
        assert_eq!(percentile(&[7.0], 1.0).unwrap(), 7.0);
        assert!(matches!(percentile(&[], 50.0), Err(MetricsError::Empty)));
        assert!(matches!(percentile(&[1.0], 0.0), Err(MetricsError::BadPercentile(_))));
    }

    #[test]
    fn disjoint_jobs_score_one() {
        let a = vec![100, 100, 0, 0];
        let b = vec![0, 0, 100, 100];
        assert_eq!(interleaving_score(&[a, b], 0, 4, 100.0, 0.05), 1.0);
    }

    #[test]
    fn fully_overlapping_jobs_score_zero() {
        let a = vec![50, 50];
        let b = vec![50, 50];
        assert_eq!(interleaving_score(&[a, b], 0, 2, 100.0, 0.05), 0.0);
    }

    #[test]
    fn partial_overlap_and_threshold() {
        let a = vec![100, 60, 0, 0];
        let b = vec![0, 40, 100, 4];
        // Bin 3 carries 4 bytes, below the 5% activity threshold.
        assert_eq!(interleaving_score(&[a, b], 0, 4, 100.0, 0.05), 1.0 - 1.0 / 3.0);
        assert_eq!(interleaving_score(&[vec![0, 0]], 0, 2, 100.0, 0.05), 1.0);
    }
}
