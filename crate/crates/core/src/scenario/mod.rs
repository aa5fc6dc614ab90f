//! Experiment definitions: the scenario file schema, its validation, and the
//! network it describes.
//!
//! Scenario files are TOML. Durations, rates and sizes accept either bare
//! integers (nanoseconds, bits per second, bytes) or unit strings such as
//! `"5us"`, `"5Gbps"`, `"45KB"`. A minimal file:
//!
//! ```toml
//! [topology]
//! kind = "dumbbell"
//!
//! [cc]
//! algorithm = "reno"
//! variant = "mltcp-wi"
//!
//! [[jobs]]
//! period = "10ms"
//! duty_cycle = 0.45
//! iterations = 50
//! ```

mod locate;
mod presets;
mod topology;

pub use presets::{preset, presets, Preset, PresetKind};
pub use topology::{
    build_network, LinkSpec, Network, Node, NodeSpec, QueueSpec, TopologyError, TopologyKind, TopologySpec,
};

use serde::{Deserialize, Serialize};

use crate::cc::{CcAlgorithm, CubicParams, DcqcnParams};
use crate::engine::{LinkId, ACK_SIZE};
use crate::mltcp::{AggressivenessFunction, FunctionForm, JobProgressTracker, MltcpMode, TrackerParams};
use crate::units::{BitRate, SimTime};
use crate::workload::{Job, JobSpec};

/// Which flavour of the chosen algorithm every flow runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcVariant {
    #[default]
    Base,
    MltcpWi,
    MltcpMd,
    /// Constant per-job weight on the increase step.
    Static,
}

impl CcVariant {
    pub fn mltcp_mode(self) -> Option<MltcpMode> {
        match self {
            CcVariant::MltcpWi => Some(MltcpMode::WindowIncrease),
            CcVariant::MltcpMd => Some(MltcpMode::MultiplicativeDecrease),
            _ => None,
        }
    }
}

/// Whether flows of one job share a progress tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerScope {
    #[default]
    Job,
    Flow,
}

fn default_init_cwnd() -> f64 {
    10.0
}

fn default_rto_min() -> SimTime {
    SimTime::from_millis(1)
}

fn default_cnp_interval() -> SimTime {
    SimTime::from_micros(50)
}

fn default_nic_queue_limit() -> u32 {
    2
}

fn default_send_jitter() -> SimTime {
    SimTime::from_micros(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcSpec {
    pub algorithm: CcAlgorithm,
    #[serde(default)]
    pub variant: CcVariant,
    /// Initial congestion window in packets.
    #[serde(default = "default_init_cwnd")]
    pub init_cwnd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cwnd: Option<f64>,
    #[serde(default = "default_rto_min")]
    pub rto_min: SimTime,
    /// Minimum spacing of congestion notifications per flow.
    #[serde(default = "default_cnp_interval")]
    pub cnp_interval: SimTime,
    /// Packets a window-based flow may keep waiting in its host NIC queue.
    /// Further segments stay with the sender until the NIC drains.
    #[serde(default = "default_nic_queue_limit")]
    pub nic_queue_limit: u32,
    /// Upper bound of a uniform random delay between a segment leaving the
    /// sender and reaching the NIC queue. Segments of one flow keep their
    /// order.
    #[serde(default = "default_send_jitter")]
    pub send_jitter: SimTime,
    /// Reno shrinks its window after idling for at least `rto_min`.
    #[serde(default)]
    pub restart_after_idle: bool,
    #[serde(default)]
    pub tracker_scope: TrackerScope,
    #[serde(default)]
    pub cubic: CubicParams,
    #[serde(default)]
    pub dcqcn: DcqcnParams,
    #[serde(default)]
    pub tracker: TrackerParams,
}

impl CcSpec {
    pub fn new(algorithm: CcAlgorithm, variant: CcVariant) -> Self {
        CcSpec {
            algorithm,
            variant,
            init_cwnd: default_init_cwnd(),
            max_cwnd: None,
            rto_min: default_rto_min(),
            cnp_interval: default_cnp_interval(),
            nic_queue_limit: default_nic_queue_limit(),
            send_jitter: default_send_jitter(),
            restart_after_idle: false,
            tracker_scope: TrackerScope::Job,
            cubic: CubicParams::default(),
            dcqcn: DcqcnParams::default(),
            tracker: TrackerParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Hard stop for the simulated clock. Defaults to one simulated hour.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<SimTime>,
}

fn default_output_bin() -> SimTime {
    SimTime::from_millis(1)
}

fn default_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    /// Bin width of the interleaving score. Defaults to half the base RTT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_bin: Option<SimTime>,
    /// Bin width of `utilization.csv`.
    #[serde(default = "default_output_bin")]
    pub output_bin: SimTime,
    /// A job is active in a bin once it moved this fraction of the bin's
    /// capacity.
    #[serde(default = "default_threshold")]
    pub activity_threshold: f64,
    /// Links to trace, as `"from->to"`. Defaults to the switch-to-switch
    /// links that carry some job's data, or every data link if there are none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<String>,
    /// Leading iterations of every job left out of summary statistics.
    #[serde(default)]
    pub warmup_iterations: u32,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec {
            score_bin: None,
            output_bin: default_output_bin(),
            activity_threshold: default_threshold(),
            links: Vec::new(),
            warmup_iterations: 0,
        }
    }
}

fn default_mtu() -> u32 {
    1500
}

/// A scenario file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mtu")]
    pub mtu: u32,
    pub topology: TopologySpec,
    pub cc: CcSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggressiveness: Option<AggressivenessFunction>,
    pub jobs: Vec<JobSpec>,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error{}: {message}", at_line(*.line))]
    Syntax { line: Option<usize>, message: String },
    #[error("unknown key{}: {message}", at_line(*.line))]
    UnknownKey { line: Option<usize>, message: String },
    #[error("missing field{}: {message}", at_line(*.line))]
    MissingField { line: Option<usize>, message: String },
    #[error("invalid `{field}`{}: {message}", at_line(*.line))]
    Validation { line: Option<usize>, field: String, message: String },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

impl ScenarioError {
    pub fn category(&self) -> &'static str {
        match self {
            ScenarioError::Syntax { .. } => "syntax",
            ScenarioError::UnknownKey { .. } => "unknown-key",
            ScenarioError::MissingField { .. } => "missing-field",
            ScenarioError::Validation { .. } => "validation",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ScenarioError::Syntax { line, .. }
            | ScenarioError::UnknownKey { line, .. }
            | ScenarioError::MissingField { line, .. }
            | ScenarioError::Validation { line, .. } => *line,
        }
    }

    fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        ScenarioError::Validation { line: None, field: field.into(), message: message.to_string() }
    }

    fn with_text(self, text: Option<&str>) -> Self {
        match (self, text) {
            (ScenarioError::Validation { line: None, field, message }, Some(text)) => {
                let line = locate::field_line(text, &field);
                ScenarioError::Validation { line, field, message }
            }
            (e, _) => e,
        }
    }
}

impl ScenarioSpec {
    /// Deserializes without semantic validation.
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| locate::line_of(text, s.start));
            let message = e.message().to_string();
            if message.contains("unknown field") || message.contains("unknown variant") && message.contains("field") {
                ScenarioError::UnknownKey { line, message }
            } else if message.contains("missing field") {
                ScenarioError::MissingField { line, message }
            } else {
                ScenarioError::Syntax { line, message }
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }
}

/// Default aggressiveness function of each augmented controller.
pub fn default_function(algorithm: CcAlgorithm, mode: MltcpMode) -> AggressivenessFunction {
    let (s, i) = match (algorithm, mode) {
        (CcAlgorithm::Reno, MltcpMode::WindowIncrease) => (1.75, 0.25),
        (CcAlgorithm::Reno, MltcpMode::MultiplicativeDecrease) => (1.0, 0.5),
        (CcAlgorithm::Cubic, MltcpMode::WindowIncrease) => (1.0, 0.5),
        (CcAlgorithm::Cubic, MltcpMode::MultiplicativeDecrease) => (0.8, 0.8),
        (CcAlgorithm::Dcqcn, _) => (1.067, 0.267),
    };
    AggressivenessFunction { form: FunctionForm::Linear, slope: s, intercept: i, table: Vec::new() }
}

/// Where one job's flows enter and leave the network.
#[derive(Debug, Clone, PartialEq)]
pub struct JobRoute {
    pub src: usize,
    pub dst: usize,
    pub data: Vec<LinkId>,
    pub ack: Vec<LinkId>,
    pub bottleneck: BitRate,
    pub base_rtt: SimTime,
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub network: Network,
    pub jobs: Vec<Job>,
    pub routes: Vec<JobRoute>,
    /// Function shared by all augmented flows, when the variant is augmented.
    pub function: Option<AggressivenessFunction>,
    pub monitored: Vec<LinkId>,
    pub score_bin: SimTime,
}

impl Scenario {
    /// Parses and validates scenario text. Validation errors carry the line
    /// of the offending key when it can be found.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let spec = ScenarioSpec::from_toml(text)?;
        Scenario::from_spec_inner(spec).map_err(|e| e.with_text(Some(text)))
    }

    pub fn from_spec(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        Scenario::from_spec_inner(spec)
    }

    fn from_spec_inner(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        if !(64..=9000).contains(&spec.mtu) {
            return Err(ScenarioError::invalid("mtu", "mtu must lie in [64, 9000]"));
        }
        if spec.jobs.is_empty() {
            return Err(ScenarioError::invalid("jobs", "at least one job is required"));
        }
        validate_cc(&spec.cc)?;
        let network = build_network(&spec.topology, spec.jobs.len(), spec.mtu).map_err(|e| {
            let field = match &e {
                TopologyError::FieldNotApplicable { field, .. } => format!("topology.{field}"),
                _ => "topology".to_string(),
            };
            ScenarioError::invalid(field, e)
        })?;

        let mut jobs = Vec::with_capacity(spec.jobs.len());
        let mut routes = Vec::with_capacity(spec.jobs.len());
        for (i, js) in spec.jobs.iter().enumerate() {
            let lookup = |name: &Option<String>, which: &str, default: Option<usize>| -> Result<usize, ScenarioError> {
                let field = format!("jobs[{i}].{which}");
                match name {
                    Some(n) => {
                        let id = network
                            .node_id(n)
                            .ok_or_else(|| ScenarioError::invalid(field.clone(), format!("unknown node `{n}`")))?;
                        if !network.nodes[id].is_host {
                            return Err(ScenarioError::invalid(field, format!("`{n}` is not a host")));
                        }
                        Ok(id)
                    }
                    None => default.ok_or_else(|| {
                        ScenarioError::invalid(field, "topology has no default host for this job; set src and dst")
                    }),
                }
            };
            let pair = network.default_pairs.get(i).copied();
            let src = lookup(&js.src, "src", pair.map(|p| p.0))?;
            let dst = lookup(&js.dst, "dst", pair.map(|p| p.1))?;
            let field = format!("jobs[{i}].dst");
            let data = network.route(src, dst).map_err(|e| ScenarioError::invalid(field.clone(), e))?;
            let ack = network.route(dst, src).map_err(|e| ScenarioError::invalid(field, e))?;
            let bottleneck = network.path_rate(&data);
            let base_rtt = network.base_rtt(&data, &ack, spec.mtu, ACK_SIZE);
            let job = js.resolve(i, bottleneck).map_err(|e| {
                let field = match e {
                    crate::workload::JobError::DutyCycle(_) => "duty_cycle",
                    crate::workload::JobError::PeakOrder | crate::workload::JobError::NoBytes => "peaks",
                    crate::workload::JobError::StragglerProb(_) => "straggler_prob",
                    crate::workload::JobError::StragglerRange => "straggler_range",
                    crate::workload::JobError::Jitter(_) => "compute_jitter",
                    crate::workload::JobError::NoFlows => "flows",
                    crate::workload::JobError::NoIterations => "iterations",
                    crate::workload::JobError::Weight => "static_weight",
                    crate::workload::JobError::Shape => "period",
                    crate::workload::JobError::UnknownProfile(_) => "profile",
                };
                ScenarioError::invalid(format!("jobs[{i}].{field}"), e)
            })?;
            let init_gap = spec.cc.tracker.init_comm_gap.unwrap_or(base_rtt.mul_f64(4.0));
            JobProgressTracker::new(job.total_bytes, init_gap, spec.cc.tracker)
                .map_err(|e| ScenarioError::invalid("cc.tracker", e))?;
            jobs.push(job);
            routes.push(JobRoute { src, dst, data, ack, bottleneck, base_rtt });
        }

        let function = resolve_function(&spec)?;

        let monitored = if spec.metrics.links.is_empty() {
            let mut used: Vec<LinkId> = routes.iter().flat_map(|r| r.data.iter().copied()).collect();
            used.sort();
            used.dedup();
            let core: Vec<LinkId> = network.core_links().into_iter().filter(|l| used.contains(l)).collect();
            if core.is_empty() {
                used
            } else {
                core
            }
        } else {
            spec.metrics
                .links
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    network
                        .link_by_name(name)
                        .ok_or_else(|| ScenarioError::invalid(format!("metrics.links[{k}]"), format!("no link `{name}`")))
                })
                .collect::<Result<_, _>>()?
        };
        if !(spec.metrics.activity_threshold > 0.0 && spec.metrics.activity_threshold < 1.0) {
            return Err(ScenarioError::invalid("metrics.activity_threshold", "must lie in (0, 1)"));
        }
        if spec.metrics.output_bin == SimTime::ZERO {
            return Err(ScenarioError::invalid("metrics.output_bin", "must be positive"));
        }
        let score_bin = match spec.metrics.score_bin {
            Some(b) if b == SimTime::ZERO => return Err(ScenarioError::invalid("metrics.score_bin", "must be positive")),
            Some(b) => b,
            None => SimTime(routes[0].base_rtt.as_nanos().div_ceil(2)),
        };

        Ok(Scenario { spec, network, jobs, routes, function, monitored, score_bin })
    }

    pub fn name(&self) -> &str {
        self.spec.name.as_deref().unwrap_or("scenario")
    }

    /// Initial gap estimate of job `j`'s tracker.
    pub fn init_comm_gap(&self, j: usize) -> SimTime {
        self.spec.cc.tracker.init_comm_gap.unwrap_or(self.routes[j].base_rtt.mul_f64(4.0))
    }
}

fn validate_cc(cc: &CcSpec) -> Result<(), ScenarioError> {
    if !(cc.init_cwnd >= 1.0 && cc.init_cwnd.is_finite()) {
        return Err(ScenarioError::invalid("cc.init_cwnd", "must be at least 1"));
    }
    if let Some(m) = cc.max_cwnd {
        if !(m >= cc.init_cwnd) {
            return Err(ScenarioError::invalid("cc.max_cwnd", "must be at least init_cwnd"));
        }
    }
    if cc.rto_min == SimTime::ZERO {
        return Err(ScenarioError::invalid("cc.rto_min", "must be positive"));
    }
    if !(cc.cubic.beta > 0.0 && cc.cubic.beta < 1.0) {
        return Err(ScenarioError::invalid("cc.cubic.beta", "must lie in (0, 1)"));
    }
    if !(cc.cubic.c_scale > 0.0 && cc.cubic.c_scale.is_finite()) {
        return Err(ScenarioError::invalid("cc.cubic.c_scale", "must be positive"));
    }
    let d = &cc.dcqcn;
    if !(d.alpha_g > 0.0 && d.alpha_g < 1.0) {
        return Err(ScenarioError::invalid("cc.dcqcn.alpha_g", "must lie in (0, 1)"));
    }
    if d.byte_counter == 0 || d.alpha_timer == SimTime::ZERO || d.increase_timer == SimTime::ZERO {
        return Err(ScenarioError::invalid("cc.dcqcn", "timers and byte counter must be positive"));
    }
    if !(d.min_rate_fraction > 0.0 && d.min_rate_fraction <= 1.0) {
        return Err(ScenarioError::invalid("cc.dcqcn.min_rate_fraction", "must lie in (0, 1]"));
    }
    Ok(())
}

fn resolve_function(spec: &ScenarioSpec) -> Result<Option<AggressivenessFunction>, ScenarioError> {
    let Some(mode) = spec.cc.variant.mltcp_mode() else {
        return Ok(None);
    };
    let global = spec.aggressiveness.clone().unwrap_or_else(|| default_function(spec.cc.algorithm, mode));
    global.validate().map_err(|e| ScenarioError::invalid("aggressiveness", e))?;
    for (i, js) in spec.jobs.iter().enumerate() {
        if let Some(f) = &js.aggressiveness {
            if *f != global {
                return Err(ScenarioError::invalid(
                    format!("jobs[{i}].aggressiveness"),
                    "all augmented flows must share one aggressiveness function",
                ));
            }
        }
    }
    Ok(Some(global))
}
