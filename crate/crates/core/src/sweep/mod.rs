//! Parameter sweeps: a base scenario, a grid of overrides applied to it, and
//! a baseline configuration that every grid point is compared against.
//!
//! Sweep files are TOML:
//!
//! ```toml
//! base = "preset:fig18-heatmap"   # or a scenario path relative to this file
//! repetitions = 1                 # seeds base.seed, base.seed + 1, ...
//!
//! [[axes]]
//! path = "aggressiveness.slope"
//! values = [0.5, 1.0, 2.0]
//!
//! [baseline]
//! "cc.variant" = "base"
//! ```
//!
//! Paths are dotted keys into the scenario file. A `*` segment addresses
//! every element of an array and a number addresses one element, so
//! `jobs.*.duty_cycle` sets the duty cycle of every job.

mod path;

pub use path::{set_path, PathError};

use std::collections::HashMap;
use std::fs::File;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::metrics::{self, MetricsError, Speedup};
use crate::scenario::{preset, PresetKind, Scenario, ScenarioError, ScenarioSpec};
use crate::sim::{self, RunReport};

/// Default cap on the number of grid runs in one sweep.
pub const DEFAULT_MAX_RUNS: usize = 512;

/// Name of the summary file written next to the per-point directories.
pub const SUMMARY_FILE: &str = "sweep_summary.csv";

fn default_repetitions() -> u32 {
    1
}

fn default_max_runs() -> usize {
    DEFAULT_MAX_RUNS
}

/// A sweep file as written.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// `preset:NAME` or a scenario file path.
    pub base: String,
    #[serde(default)]
    pub axes: Vec<Axis>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
    /// Overrides applied to every run, candidate and baseline alike.
    #[serde(default)]
    pub overrides: toml::Table,
    /// Overrides that turn a grid point into its baseline. An empty table
    /// means no baseline and no speedups.
    #[serde(default)]
    pub baseline: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep file: {0}")]
    Syntax(String),
    #[error("sweep file: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("base scenario: {0}")]
    Base(ScenarioError),
    #[error("override `{path}`: {source}")]
    Override { path: String, source: PathError },
    #[error("grid point {point} ({label}): {source}")]
    Point { point: usize, label: String, source: ScenarioError },
    #[error("sweep has {runs} runs, more than the cap of {cap}")]
    TooManyRuns { runs: usize, cap: usize },
    #[error(transparent)]
    Report(#[from] MetricsError),
    #[error("i/o error writing sweep output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error writing sweep output: {0}")]
    Csv(#[from] csv::Error),
}

/// One grid point at one repetition.
#[derive(Debug, Clone)]
pub struct PlannedRun {
    /// Grid index, row-major with the last axis varying fastest.
    pub point: usize,
    pub repetition: u32,
    pub values: Vec<toml::Value>,
    pub candidate: Scenario,
    /// Index into [`SweepPlan::baselines`].
    pub baseline: Option<usize>,
}

/// A validated sweep, ready to execute.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub spec: SweepSpec,
    pub runs: Vec<PlannedRun>,
    /// Distinct baseline scenarios. Grid points whose baselines resolve to
    /// the same scenario share one run.
    pub baselines: Vec<Scenario>,
}

/// Renders an axis value for labels and CSV cells.
pub fn format_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn base_text(base: &str, dir: &Path) -> Result<String, SweepError> {
    if let Some(name) = base.strip_prefix("preset:") {
        let p = preset(name).ok_or_else(|| SweepError::Invalid(format!("unknown preset `{name}`")))?;
        return Ok(p.text(PresetKind::Scenario).expect("every preset has a scenario").to_string());
    }
    let path = dir.join(base);
    std::fs::read_to_string(&path).map_err(|source| SweepError::Read { path, source })
}

/// Drops settings that cannot affect a run, so equivalent baselines share
/// one key.
fn baseline_key(spec: &ScenarioSpec) -> String {
    let mut s = spec.clone();
    if s.cc.variant.mltcp_mode().is_none() {
        s.aggressiveness = None;
        for j in &mut s.jobs {
            j.aggressiveness = None;
        }
    }
    s.to_toml()
}

fn apply_all(table: &mut toml::Table, overrides: &toml::Table) -> Result<(), SweepError> {
    for (path, value) in overrides {
        set_path(table, path, value.clone())
            .map_err(|source| SweepError::Override { path: path.clone(), source })?;
    }
    Ok(())
}

fn to_scenario(table: toml::Table) -> Result<Scenario, ScenarioError> {
    let text = toml::to_string(&table).expect("tables serialize to TOML");
    Scenario::parse(&text)
}

impl SweepPlan {
    /// Loads a sweep file. Relative `base` paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| SweepError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses and validates a sweep. Every grid point is built and checked
    /// before anything runs.
    pub fn parse(text: &str, dir: &Path) -> Result<Self, SweepError> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| SweepError::Syntax(e.to_string()))?;
        if spec.repetitions == 0 {
            return Err(SweepError::Invalid("repetitions must be at least 1".into()));
        }
        if let Some(a) = spec.axes.iter().find(|a| a.values.is_empty()) {
            return Err(SweepError::Invalid(format!("axis `{}` has no values", a.path)));
        }
        let points: usize = spec.axes.iter().map(|a| a.values.len()).product();
        let total = points * spec.repetitions as usize;
        if total > spec.max_runs {
            return Err(SweepError::TooManyRuns { runs: total, cap: spec.max_runs });
        }

        let base_src = base_text(&spec.base, dir)?;
        let base_spec = ScenarioSpec::from_toml(&base_src).map_err(SweepError::Base)?;
        Scenario::parse(&base_src).map_err(SweepError::Base)?;
        let mut base: toml::Table = toml::from_str(&base_src).expect("validated scenario parses as TOML");
        apply_all(&mut base, &spec.overrides)?;

        let mut runs = Vec::with_capacity(total);
        let mut baselines = Vec::new();
        let mut baseline_ids: HashMap<String, usize> = HashMap::new();
        for point in 0..points {
            let values = grid_values(&spec.axes, point);
            let label = point_label(&spec.axes, &values);
            let point_err = |source| SweepError::Point { point, label: label.clone(), source };
            for repetition in 0..spec.repetitions {
                let mut t = base.clone();
                for (axis, v) in spec.axes.iter().zip(&values) {
                    set_path(&mut t, &axis.path, v.clone())
                        .map_err(|source| SweepError::Override { path: axis.path.clone(), source })?;
                }
                let seed = base_spec.seed.wrapping_add(repetition as u64);
                t.insert("seed".into(), toml::Value::Integer(seed as i64));
                let baseline = if spec.baseline.is_empty() {
                    None
                } else {
                    let mut b = t.clone();
                    apply_all(&mut b, &spec.baseline)?;
                    let sc = to_scenario(b).map_err(point_err)?;
                    let key = baseline_key(&sc.spec);
                    let next = baselines.len();
                    let id = *baseline_ids.entry(key).or_insert(next);
                    if id == next {
                        baselines.push(sc);
                    }
                    Some(id)
                };
                let candidate = to_scenario(t).map_err(point_err)?;
                runs.push(PlannedRun { point, repetition, values: values.clone(), candidate, baseline });
            }
        }
        Ok(SweepPlan { spec, runs, baselines })
    }

    pub fn points(&self) -> usize {
        self.spec.axes.iter().map(|a| a.values.len()).product()
    }

    /// Executes every run with at most `parallelism` runs at a time. A run
    /// that panics is recorded as failed and does not stop the others.
    /// Results do not depend on `parallelism`.
    pub fn execute(&self, parallelism: usize) -> SweepResults {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism.max(1))
            .build()
            .expect("thread pool builds");
        let (baselines, candidates) = pool.install(|| {
            let b: Vec<_> = self.baselines.par_iter().map(run_caught).collect();
            let c: Vec<_> = self.runs.par_iter().map(|r| run_caught(&r.candidate)).collect();
            (b, c)
        });
        let points = self
            .runs
            .iter()
            .zip(candidates)
            .map(|(run, candidate)| {
                let baseline = run.baseline.map(|b| baselines[b].clone());
                let outcome = evaluate(candidate.as_ref(), baseline.as_ref());
                PointResult {
                    point: run.point,
                    repetition: run.repetition,
                    values: run.values.clone(),
                    candidate,
                    baseline,
                    outcome,
                }
            })
            .collect();
        SweepResults { axes: self.spec.axes.iter().map(|a| a.path.clone()).collect(), points }
    }
}

fn grid_values(axes: &[Axis], mut index: usize) -> Vec<toml::Value> {
    let mut out = vec![toml::Value::Boolean(false); axes.len()];
    for (k, axis) in axes.iter().enumerate().rev() {
        let n = axis.values.len();
        out[k] = axis.values[index % n].clone();
        index /= n;
    }
    out
}

fn point_label(axes: &[Axis], values: &[toml::Value]) -> String {
    axes.iter().zip(values).map(|(a, v)| format!("{}={}", a.path, format_value(v))).collect::<Vec<_>>().join(", ")
}

fn run_caught(scenario: &Scenario) -> Result<RunReport, String> {
    panic::catch_unwind(AssertUnwindSafe(|| sim::run(scenario))).map_err(|e| {
        e.downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| e.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "run panicked".to_string())
    })
}

/// Speedup and interleaving of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub speedup: Option<Speedup>,
    /// Mean post-warmup score over the monitored links.
    pub score: Option<f64>,
}

/// Mean per-iteration interleaving score after warmup, averaged over the
/// monitored links.
pub fn mean_score(report: &RunReport) -> Option<f64> {
    let per_link: Vec<f64> = report
        .monitored()
        .filter_map(|l| {
            let s: Vec<f64> =
                metrics::score_series(report, l).into_iter().skip(report.warmup_iterations as usize).collect();
            metrics::mean(&s)
        })
        .collect();
    metrics::mean(&per_link)
}

fn evaluate(candidate: Result<&RunReport, &String>, baseline: Option<&Result<RunReport, String>>) -> Result<Evaluation, String> {
    let c = candidate.map_err(|e| format!("run failed: {e}"))?;
    if c.truncated {
        return Err("run hit its time cap".into());
    }
    let speedup = match baseline {
        None => None,
        Some(Err(e)) => return Err(format!("baseline failed: {e}")),
        Some(Ok(b)) if b.truncated => return Err("baseline hit its time cap".into()),
        Some(Ok(b)) => Some(metrics::pooled_speedup(b, c).map_err(|e| e.to_string())?),
    };
    Ok(Evaluation { speedup, score: mean_score(c) })
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: usize,
    pub repetition: u32,
    pub values: Vec<toml::Value>,
    pub candidate: Result<RunReport, String>,
    pub baseline: Option<Result<RunReport, String>>,
    pub outcome: Result<Evaluation, String>,
}

impl PointResult {
    /// Directory name of this run inside the sweep output directory.
    pub fn dir_name(&self, repetitions: u32) -> String {
        if repetitions > 1 {
            format!("point_{:03}_rep{}", self.point, self.repetition)
        } else {
            format!("point_{:03}", self.point)
        }
    }
}

/// One row of `sweep_summary.csv`: a grid point with its repetitions
/// averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub values: Vec<toml::Value>,
    pub mean_speedup: Option<f64>,
    pub p99_speedup: Option<f64>,
    pub score: Option<f64>,
    pub runs: usize,
    /// Runs of this point that failed, with the first error.
    pub failed: usize,
    pub error: Option<String>,
}

impl SummaryRow {
    pub fn status(&self) -> String {
        match &self.error {
            None => "ok".into(),
            Some(e) => format!("failed {}/{}: {e}", self.failed, self.runs),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResults {
    pub axes: Vec<String>,
    pub points: Vec<PointResult>,
}

impl SweepResults {
    pub fn repetitions(&self) -> u32 {
        self.points.iter().map(|p| p.repetition + 1).max().unwrap_or(1)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = Vec::new();
        let mut i = 0;
        while i < self.points.len() {
            let point = self.points[i].point;
            let group: Vec<&PointResult> = self.points[i..].iter().take_while(|p| p.point == point).collect();
            i += group.len();
            let ok: Vec<&Evaluation> = group.iter().filter_map(|p| p.outcome.as_ref().ok()).collect();
            let avg = |f: &dyn Fn(&Evaluation) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|e| f(e)).collect();
                metrics::mean(&v)
            };
            rows.push(SummaryRow {
                values: group[0].values.clone(),
                mean_speedup: avg(&|e| e.speedup.map(|s| s.mean)),
                p99_speedup: avg(&|e| e.speedup.map(|s| s.p99)),
                score: avg(&|e| e.score),
                runs: group.len(),
                failed: group.len() - ok.len(),
                error: group.iter().find_map(|p| p.outcome.as_ref().err().cloned()),
            });
        }
        rows
    }

    /// Writes one report directory per run (with a `baseline/` directory
    /// inside when the sweep has a baseline) and `sweep_summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), SweepError> {
        std::fs::create_dir_all(dir)?;
        let reps = self.repetitions();
        for p in &self.points {
            let sub = dir.join(p.dir_name(reps));
            if let Ok(r) = &p.candidate {
                metrics::write_report(r, &sub)?;
            }
            if let Some(Ok(b)) = &p.baseline {
                metrics::write_report(b, &sub.join("baseline"))?;
            }
        }
        let mut w = csv::Writer::from_writer(File::create(dir.join(SUMMARY_FILE))?);
        let mut header = self.axes.clone();
        header.extend(["mean_speedup", "p99_speedup", "interleaving_score", "status"].map(String::from));
        w.write_record(&header)?;
        let num = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for row in self.summary() {
            let mut rec: Vec<String> = row.values.iter().map(format_value).collect();
            rec.push(num(row.mean_speedup));
            rec.push(num(row.p99_speedup));
            rec.push(num(row.score));
            rec.push(row.status());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads a sweep by preset name or file path.
pub fn load(target: &str) -> Result<SweepPlan, SweepError> {
    if let Some(p) = preset(target) {
        if let Some(text) = p.text(PresetKind::Sweep) {
            return SweepPlan::parse(text, Path::new("."));
        }
        return Err(SweepError::Invalid(format!("preset `{target}` has no sweep")));
    }
    SweepPlan::load(Path::new(target))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [topology]
        kind = "dumbbell"
        [cc]
        algorithm = "reno"
        variant = "mltcp-wi"
        [[jobs]]
        period = "2ms"
        duty_cycle = 0.4
        iterations = 3
    "#;

    fn plan(sweep: &str) -> Result<SweepPlan, SweepError> {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.toml"), BASE).unwrap();
        SweepPlan::parse(sweep, dir.path())
    }

    #[test]
    fn grid_is_row_major() {
        let axes = vec![
            Axis { path: "a".into(), values: vec![1.into(), 2.into()] },
            Axis { path: "b".into(), values: vec![10.into(), 20.into(), 30.into()] },
        ];
        let v: Vec<Vec<toml::Value>> = (0..6).map(|i| grid_values(&axes, i)).collect();
        assert_eq!(v[0], vec![1.into(), 10.into()]);
        assert_eq!(v[2], vec![1.into(), 30.into()]);
        assert_eq!(v[3], vec![2.into(), 10.into()]);
    }

    #[test]
    fn cross_product_and_shared_baseline() {
        let p = plan(
            r#"
            base = "base.toml"
            [[axes]]
            path = "aggressiveness.slope"
            values = [0.5, 1.0, 1.5]
            [[axes]]
            path = "aggressiveness.intercept"
            values = [0.5, 1.0, 1.5]
            [baseline]
            "cc.variant" = "base"
            "#,
        )
        .unwrap();
        assert_eq!(p.runs.len(), 9);
        assert_eq!(p.baselines.len(), 1);
        assert_eq!(p.runs[4].candidate.spec.aggressiveness.as_ref().unwrap().slope, 1.0);
    }

    #[test]
    fn repetitions_shift_the_seed() {
        let p = plan("base = \"base.toml\"\nrepetitions = 3\n").unwrap();
        let seeds: Vec<u64> = p.runs.iter().map(|r| r.candidate.spec.seed).collect();
        assert_eq!(seeds, vec![0, 1, 2]);
    }

    #[test]
    fn cap_is_checked_first() {
        let e = plan(
            r#"
            base = "missing.toml"
            max_runs = 4
            [[axes]]
            path = "seed"
            values = [1, 2, 3, 4, 5]
            "#,
        )
        .unwrap_err();
        assert!(matches!(e, SweepError::TooManyRuns { runs: 5, cap: 4 }));
    }

    #[test]
    fn invalid_point_is_reported() {
        let e = plan(
            r#"
            base = "base.toml"
            [[axes]]
            path = "jobs.*.duty_cycle"
            values = [0.5, 1.5]
            "#,
        )
        .unwrap_err();
        match e {
            SweepError::Point { point, label, .. } => {
                assert_eq!(point, 1);
                assert_eq!(label, "jobs.*.duty_cycle=1.5");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn summary_averages_repetitions() {
        let p = plan(
            r#"
            base = "base.toml"
            repetitions = 2
            [[axes]]
            path = "aggressiveness.slope"
            values = [1.0, 2.0]
            [baseline]
            "cc.variant" = "base"
            "#,
        )
        .unwrap();
        let res = p.execute(2);
        let rows = res.summary();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.runs == 2 && r.failed == 0 && r.mean_speedup.is_some()));
        let again = p.execute(1).summary();
        assert_eq!(rows, again);
    }
}
