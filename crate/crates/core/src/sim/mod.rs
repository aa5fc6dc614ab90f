//! The simulation driver: wires flows, queues and jobs to the event queue
//! and runs a scenario to completion.

mod flow;
mod report;

pub use report::{JobReport, LinkReport, RunReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cc::{CcAlgorithm, CongestionControl, CubicState, DcqcnState, RenoState, SendBudget};
use crate::engine::{EnqueueOutcome, EventQueue, FlowId, Link, LinkId, Packet, PacketKind};
use crate::mltcp::{JobProgressTracker, Mltcp, MltcpMode};
use crate::scenario::{CcVariant, Scenario, TrackerScope};
use crate::units::SimTime;
use crate::workload::{sample_jitter, sample_straggler, IterationRecord, Job};

use flow::Flow;

/// Default cap on simulated time.
pub const DEFAULT_MAX_TIME: SimTime = SimTime(3_600_000_000_000);

#[derive(Debug, Clone, Copy)]
enum Event {
    TxDone(LinkId),
    Arrive(Packet),
    Inject(Packet),
    FlowSend(FlowId),
    Rto(FlowId),
    CcTimer(FlowId),
    IterStart(usize),
    Peak(usize, usize),
    ComputeEnd(usize),
}

struct JobState {
    job: Job,
    flows: Vec<usize>,
    index: u32,
    start: SimTime,
    straggler: SimTime,
    compute_done: bool,
    peaks_released: usize,
    comm_start: Option<SimTime>,
    last_ack: SimTime,
    done: bool,
    rng: ChaCha8Rng,
    records: Vec<IterationRecord>,
}

struct Trace {
    link: LinkId,
    score: Vec<Vec<u64>>,
    output: Vec<Vec<u64>>,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    q: EventQueue<Event>,
    links: Vec<Link>,
    flows: Vec<Flow>,
    jobs: Vec<JobState>,
    trackers: Vec<JobProgressTracker>,
    augmented: bool,
    rng: ChaCha8Rng,
    /// Source NIC links paused on behalf of each link's queue.
    paused_by: Vec<Vec<LinkId>>,
    /// Flows whose first hop is each link.
    flows_by_src: Vec<Vec<usize>>,
    trace_of: Vec<Option<usize>>,
    traces: Vec<Trace>,
    drops_ms: Vec<Vec<u64>>,
    marks_ms: Vec<Vec<u64>>,
    jobs_left: usize,
    score_bin: u64,
    output_bin: u64,
    nic_limit: u32,
}

/// Runs a validated scenario with its own seed.
pub fn run(scenario: &Scenario) -> RunReport {
    Sim::new(scenario).run()
}

fn bump(v: &mut Vec<u64>, idx: usize, by: u64) {
    if v.len() <= idx {
        v.resize(idx + 1, 0);
    }
    v[idx] += by;
}

/// Spreads `bytes` sent over `[start, end)` across bins of width `bin`,
/// proportionally to overlap. The shares sum to `bytes` exactly.
fn spread(v: &mut Vec<u64>, start: u64, end: u64, bin: u64, bytes: u64) {
    let first = start / bin;
    let last = (end.max(start + 1) - 1) / bin;
    if first == last {
        bump(v, first as usize, bytes);
        return;
    }
    let span = end - start;
    let mut given = 0;
    for b in first..=last {
        let lo = start.max(b * bin);
        let hi = end.min((b + 1) * bin);
        let share = if b == last { bytes - given } else { bytes * (hi - lo) / span };
        given += share;
        bump(v, b as usize, share);
    }
}

fn make_cc(scenario: &Scenario, job: &Job, line: &Link) -> Box<dyn CongestionControl + Send> {
    let cc = &scenario.spec.cc;
    let max_cwnd = cc.max_cwnd.unwrap_or(f64::INFINITY);
    let mode = cc.variant.mltcp_mode();
    macro_rules! wrap {
        ($inner:expr) => {{
            let inner = $inner;
            match (cc.variant, mode) {
                (CcVariant::Base, _) => Box::new(inner) as Box<dyn CongestionControl + Send>,
                (CcVariant::Static, _) => {
                    Box::new(Mltcp::constant(inner, MltcpMode::WindowIncrease, job.static_weight))
                }
                (_, Some(mode)) => {
                    let f = scenario.function.clone().expect("augmented scenario resolves a function");
                    Box::new(Mltcp::new(inner, mode, f))
                }
                (_, None) => unreachable!("augmented variant without a mode"),
            }
        }};
    }
    match cc.algorithm {
        CcAlgorithm::Reno => wrap!(RenoState::new(cc.init_cwnd, cc.rto_min)
            .with_max_cwnd(max_cwnd)
            .with_restart_after_idle(cc.restart_after_idle)),
        CcAlgorithm::Cubic => wrap!(CubicState::new(cc.init_cwnd, cc.cubic).with_max_cwnd(max_cwnd)),
        CcAlgorithm::Dcqcn => wrap!(DcqcnState::new(line.rate, cc.dcqcn, SimTime::ZERO)),
    }
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let spec = &scenario.spec;
        let links = scenario.network.links.clone();
        let n_links = links.len();
        let rate_based = spec.cc.algorithm.is_rate_based();
        let augmented = spec.cc.variant.mltcp_mode().is_some();

        let mut flows = Vec::new();
        let mut jobs = Vec::new();
        let mut trackers = Vec::new();
        let mut flows_by_src = vec![Vec::new(); n_links];
        for (j, job) in scenario.jobs.iter().enumerate() {
            let route = &scenario.routes[j];
            let init_gap = scenario.init_comm_gap(j);
            let job_tracker = trackers.len();
            if spec.cc.tracker_scope == TrackerScope::Job {
                trackers.push(
                    JobProgressTracker::new(job.total_bytes, init_gap, spec.cc.tracker).expect("validated tracker"),
                );
            }
            let mut ids = Vec::new();
            for k in 0..job.flows {
                let share = flow_share(job.total_bytes, job.flows, k);
                let tracker = match spec.cc.tracker_scope {
                    TrackerScope::Job => job_tracker,
                    TrackerScope::Flow => {
                        trackers.push(
                            JobProgressTracker::new(share.max(1), init_gap, spec.cc.tracker)
                                .expect("validated tracker"),
                        );
                        trackers.len() - 1
                    }
                };
                let id = flows.len();
                flows_by_src[route.data[0].index()].push(id);
                flows.push(Flow {
                    id: FlowId(id as u32),
                    job: j,
                    tracker,
                    data_path: route.data.clone(),
                    ack_path: route.ack.clone(),
                    cc: make_cc(scenario, job, &links[route.data[0].index()]),
                    rate_based,
                    mtu: spec.mtu,
                    app_limit: 0,
                    short_segments: Default::default(),
                    snd_una: 0,
                    snd_nxt: 0,
                    snd_max: 0,
                    dupacks: 0,
                    sacked: 0,
                    in_recovery: false,
                    recover: 0,
                    retransmit: None,
                    srtt: None,
                    rttvar: 0.0,
                    rto_min: spec.cc.rto_min,
                    backoff: 0,
                    rto_deadline: None,
                    rto_event: None,
                    next_send: SimTime::ZERO,
                    send_event: false,
                    cc_timer: None,
                    idle_since: Some(SimTime::ZERO),
                    nic_queued: 0,
                    last_inject: SimTime::ZERO,
                    cwnd_limited: false,
                    timeouts: 0,
                    fast_retransmits: 0,
                    rcv_nxt: 0,
                    out_of_order: Default::default(),
                    last_cnp: None,
                });
                ids.push(id);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(j as u64 + 1);
            jobs.push(JobState {
                job: job.clone(),
                flows: ids,
                index: 0,
                start: SimTime::ZERO,
                straggler: SimTime::ZERO,
                compute_done: false,
                peaks_released: 0,
                comm_start: None,
                last_ack: SimTime::ZERO,
                done: false,
                rng,
                records: Vec::with_capacity(job.iterations as usize),
            });
        }

        let mut trace_of = vec![None; n_links];
        let traces = scenario
            .monitored
            .iter()
            .enumerate()
            .map(|(k, &l)| {
                trace_of[l.index()] = Some(k);
                Trace { link: l, score: vec![Vec::new(); jobs.len()], output: vec![Vec::new(); jobs.len()] }
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        Sim {
            scenario,
            q: EventQueue::new(),
            links,
            jobs_left: jobs.len(),
            flows,
            jobs,
            trackers,
            augmented,
            rng,
            paused_by: vec![Vec::new(); n_links],
            flows_by_src,
            trace_of,
            traces,
            drops_ms: vec![Vec::new(); n_links],
            marks_ms: vec![Vec::new(); n_links],
            score_bin: scenario.score_bin.as_nanos(),
            output_bin: spec.metrics.output_bin.as_nanos(),
            nic_limit: spec.cc.nic_queue_limit.max(1),
        }
    }

    fn run(mut self) -> RunReport {
        let max_time = self.scenario.spec.run.max_time.unwrap_or(DEFAULT_MAX_TIME);
        for j in 0..self.jobs.len() {
            self.q.schedule(self.jobs[j].job.start, Event::IterStart(j));
        }
        for f in 0..self.flows.len() {
            self.arm_cc_timer(f);
        }
        while self.jobs_left > 0 {
            let Some((_, _, ev)) = self.q.pop_until(max_time) else { break };
            self.dispatch(ev);
        }
        self.finish()
    }

    fn now(&self) -> SimTime {
        self.q.now()
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::TxDone(l) => self.tx_done(l),
            Event::Arrive(pkt) => self.arrive(pkt),
            Event::Inject(pkt) => self.inject(pkt.flow.0 as usize, pkt),
            Event::FlowSend(f) => {
                let f = f.0 as usize;
                self.flows[f].send_event = false;
                self.try_send(f);
            }
            Event::Rto(f) => self.rto_fired(f.0 as usize),
            Event::CcTimer(f) => self.cc_timer_fired(f.0 as usize),
            Event::IterStart(j) => self.start_iteration(j),
            Event::Peak(j, p) => self.release_peak(j, p),
            Event::ComputeEnd(j) => {
                self.jobs[j].compute_done = true;
                self.check_job(j);
            }
        }
    }

    // ---- network ----

    fn path(&self, pkt: &Packet) -> &[LinkId] {
        let f = &self.flows[pkt.flow.0 as usize];
        match pkt.kind {
            PacketKind::Data => &f.data_path,
            PacketKind::Ack | PacketKind::Cnp => &f.ack_path,
        }
    }

    fn enqueue(&mut self, l: LinkId, pkt: Packet) {
        let now = self.now();
        let ms = (now.as_nanos() / 1_000_000) as usize;
        let link = &mut self.links[l.index()];
        let outcome = link.queue.enqueue(pkt, &mut self.rng);
        if outcome == EnqueueOutcome::Dropped {
            bump(&mut self.drops_ms[l.index()], ms, 1);
            if pkt.is_data() && self.flows[pkt.flow.0 as usize].data_path[0] == l {
                self.nic_dequeued(pkt.flow.0 as usize);
            }
            return;
        }
        if outcome.marked() {
            bump(&mut self.marks_ms[l.index()], ms, 1);
        }
        if let EnqueueOutcome::SenderPaused { .. } = outcome {
            if pkt.is_data() {
                let src = self.flows[pkt.flow.0 as usize].data_path[0];
                if src != l && !self.paused_by[l.index()].contains(&src) {
                    self.paused_by[l.index()].push(src);
                    self.links[src.index()].pause_count += 1;
                }
            }
        }
        if self.links[l.index()].can_start() {
            self.start_tx(l);
        }
    }

    fn start_tx(&mut self, l: LinkId) {
        let link = &mut self.links[l.index()];
        let pkt = link.queue.dequeue().expect("start_tx on an empty queue");
        let ser = link.serialization_time(&pkt);
        link.in_flight = Some(pkt);
        if pkt.is_data() && self.flows[pkt.flow.0 as usize].data_path[0] == l {
            self.nic_dequeued(pkt.flow.0 as usize);
        }
        let link = &mut self.links[l.index()];
        let released = match link.queue.config().resume_threshold() {
            Some(t) if !self.paused_by[l.index()].is_empty() && link.queue.occupancy() <= t => {
                std::mem::take(&mut self.paused_by[l.index()])
            }
            _ => Vec::new(),
        };
        self.q.schedule_in(ser, Event::TxDone(l));
        for src in released {
            let s = &mut self.links[src.index()];
            s.pause_count -= 1;
            if s.can_start() {
                self.start_tx(src);
            }
            if !self.links[src.index()].is_paused() {
                for k in 0..self.flows_by_src[src.index()].len() {
                    let f = self.flows_by_src[src.index()][k];
                    if self.flows[f].rate_based {
                        self.schedule_send(f);
                    }
                }
            }
        }
    }

    fn nic_dequeued(&mut self, f: usize) {
        self.flows[f].nic_queued -= 1;
        if !self.flows[f].rate_based {
            self.schedule_send(f);
        }
    }

    fn tx_done(&mut self, l: LinkId) {
        let now = self.now();
        let link = &mut self.links[l.index()];
        let pkt = link.in_flight.take().expect("tx_done without a packet in flight");
        let prop = link.prop_delay;
        if pkt.is_data() {
            if let Some(t) = self.trace_of[l.index()] {
                let ser = link.serialization_time(&pkt).as_nanos();
                let end = now.as_nanos();
                let job = self.flows[pkt.flow.0 as usize].job;
                let tr = &mut self.traces[t];
                spread(&mut tr.score[job], end - ser, end, self.score_bin, pkt.size as u64);
                spread(&mut tr.output[job], end - ser, end, self.output_bin, pkt.size as u64);
            }
        }
        self.q.schedule(now + prop, Event::Arrive(pkt));
        if self.links[l.index()].can_start() {
            self.start_tx(l);
        }
    }

    fn arrive(&mut self, mut pkt: Packet) {
        let next = pkt.hop as usize + 1;
        let path = self.path(&pkt);
        if next < path.len() {
            let l = path[next];
            pkt.hop = next as u16;
            self.enqueue(l, pkt);
            return;
        }
        let f = pkt.flow.0 as usize;
        match pkt.kind {
            PacketKind::Data => self.receiver_data(f, pkt),
            PacketKind::Ack => self.sender_ack(f, pkt),
            PacketKind::Cnp => {
                let now = self.now();
                self.flows[f].cc.on_cnp(now);
                self.arm_cc_timer(f);
            }
        }
    }

    fn inject(&mut self, f: usize, pkt: Packet) {
        let first = match pkt.kind {
            PacketKind::Data => self.flows[f].data_path[0],
            _ => self.flows[f].ack_path[0],
        };
        self.enqueue(first, pkt);
    }

    // ---- receiver ----

    fn receiver_data(&mut self, f: usize, pkt: Packet) {
        let now = self.now();
        let cnp_interval = self.scenario.spec.cc.cnp_interval;
        let flow = &mut self.flows[f];
        let cum = flow.receive(pkt.seq);
        let mut ack = Packet::ack(flow.id, cum, 1, pkt.ts);
        ack.ecn_marked = pkt.ecn_marked;
        let cnp = flow.rate_based
            && pkt.ecn_marked
            && flow.last_cnp.is_none_or(|t| now.saturating_sub(t) >= cnp_interval);
        if cnp {
            flow.last_cnp = Some(now);
        }
        let id = flow.id;
        self.inject(f, ack);
        if cnp {
            self.inject(f, Packet::cnp(id, now));
        }
    }

    // ---- sender ----

    fn sender_ack(&mut self, f: usize, ack: Packet) {
        let now = self.now();
        let flow = &mut self.flows[f];
        let out = flow.on_ack(ack.seq);
        if out.newly_acked > 0 {
            flow.rtt_sample(now - ack.ts);
        }
        if self.augmented {
            let tr = &mut self.trackers[flow.tracker];
            tr.update(out.newly_acked.min(u32::MAX as u64) as u32, now);
            flow.cc.set_bytes_ratio(tr.bytes_ratio);
        }
        if out.fast_retransmit {
            flow.cc.on_loss(now);
        } else if out.newly_acked > 0 && !flow.in_recovery && flow.cwnd_limited {
            flow.cc.on_ack(out.newly_acked.min(u32::MAX as u64) as u32, ack.ecn_marked, now);
        }
        if out.newly_acked > 0 {
            if flow.outstanding() > 0 {
                flow.rto_deadline = Some(now + flow.rto());
            } else {
                flow.rto_deadline = None;
            }
        }
        let job = flow.job;
        let finished = flow.finished();
        if finished && out.newly_acked > 0 {
            flow.idle_since = Some(now);
        }
        self.arm_cc_timer(f);
        self.try_send(f);
        if out.newly_acked > 0 {
            self.jobs[job].last_ack = now;
            if finished {
                self.check_job(job);
            }
        }
    }

    fn schedule_send(&mut self, f: usize) {
        let flow = &mut self.flows[f];
        if flow.send_event {
            return;
        }
        flow.send_event = true;
        let at = flow.next_send.max(self.q.now());
        self.q.schedule(at, Event::FlowSend(flow.id));
    }

    fn try_send(&mut self, f: usize) {
        let now = self.now();
        if self.flows[f].rate_based {
            let flow = &self.flows[f];
            if flow.retransmit.is_none() && !flow.has_new_data() {
                return;
            }
            if self.links[flow.data_path[0].index()].is_paused() {
                return;
            }
            if flow.next_send > now {
                self.schedule_send(f);
                return;
            }
            let size = self.send_one(f);
            let flow = &mut self.flows[f];
            let SendBudget::Rate(rate) = flow.cc.budget() else { unreachable!("rate-based flow without a rate") };
            flow.next_send = now + SimTime::from_secs_f64(size as f64 * 8.0 / rate);
            if flow.retransmit.is_some() || flow.has_new_data() {
                self.schedule_send(f);
            }
            return;
        }
        if self.flows[f].retransmit.is_some() && self.flows[f].nic_queued < self.nic_limit {
            self.send_one(f);
        }
        loop {
            let flow = &self.flows[f];
            let SendBudget::Window(cwnd) = flow.cc.budget() else { unreachable!("window flow without a window") };
            if !flow.has_new_data() || flow.nic_queued >= self.nic_limit {
                self.flows[f].cwnd_limited = false;
                break;
            }
            if !flow.window_open(cwnd) {
                self.flows[f].cwnd_limited = true;
                break;
            }
            self.send_one(f);
        }
    }

    /// Sends the pending retransmission, or else the next new segment.
    fn send_one(&mut self, f: usize) -> u32 {
        let now = self.now();
        let ect = self.scenario.spec.cc.algorithm.is_rate_based();
        let flow = &mut self.flows[f];
        let seq = match flow.retransmit.take() {
            Some(s) => s,
            None => {
                let s = flow.snd_nxt;
                flow.snd_nxt += 1;
                flow.snd_max = flow.snd_max.max(flow.snd_nxt);
                s
            }
        };
        if let Some(since) = flow.idle_since.take() {
            flow.cc.on_idle_restart(now.saturating_sub(since));
        }
        let size = flow.segment_size(seq);
        flow.cc.on_sent(size as u64, now);
        if flow.rto_deadline.is_none() {
            flow.rto_deadline = Some(now + flow.rto());
        }
        let deadline = flow.rto_deadline.expect("deadline set above");
        let id = flow.id;
        let schedule_rto = flow.rto_event.is_none();
        if schedule_rto {
            flow.rto_event = Some(deadline);
        }
        if schedule_rto {
            self.q.schedule(deadline, Event::Rto(id));
        }
        flow.nic_queued += 1;
        let jitter = self.scenario.spec.cc.send_jitter.as_nanos();
        let delay = if jitter > 0 { self.rng.random_range(0..=jitter) } else { 0 };
        let at = (now + SimTime(delay)).max(flow.last_inject);
        flow.last_inject = at;
        let pkt = Packet::data(id, seq, size, ect, now);
        if at == now {
            self.inject(f, pkt);
        } else {
            self.q.schedule(at, Event::Inject(pkt));
        }
        self.arm_cc_timer(f);
        size
    }

    fn rto_fired(&mut self, f: usize) {
        let now = self.now();
        let flow = &mut self.flows[f];
        flow.rto_event = None;
        let Some(deadline) = flow.rto_deadline else { return };
        if deadline > now {
            flow.rto_event = Some(deadline);
            self.q.schedule(deadline, Event::Rto(flow.id));
            return;
        }
        if flow.outstanding() == 0 && flow.retransmit.is_none() {
            flow.rto_deadline = None;
            return;
        }
        flow.cc.on_loss(now);
        flow.on_timeout();
        flow.rto_deadline = None;
        self.arm_cc_timer(f);
        self.try_send(f);
    }

    fn arm_cc_timer(&mut self, f: usize) {
        let flow = &mut self.flows[f];
        let Some(at) = flow.cc.next_timer() else { return };
        if flow.cc_timer.is_some_and(|t| t <= at) {
            return;
        }
        let at = at.max(self.q.now());
        flow.cc_timer = Some(at);
        self.q.schedule(at, Event::CcTimer(flow.id));
    }

    fn cc_timer_fired(&mut self, f: usize) {
        let now = self.now();
        let flow = &mut self.flows[f];
        if flow.cc_timer != Some(now) {
            return;
        }
        flow.cc_timer = None;
        flow.cc.on_timer(now);
        self.arm_cc_timer(f);
    }

    // ---- jobs ----

    fn start_iteration(&mut self, j: usize) {
        let now = self.now();
        let js = &mut self.jobs[j];
        js.start = now;
        js.straggler = sample_straggler(&js.job, &mut js.rng);
        let jitter = sample_jitter(&js.job, &mut js.rng);
        js.compute_done = false;
        js.peaks_released = 0;
        js.comm_start = None;
        let base = now + js.straggler + jitter;
        self.q.schedule(base + js.job.compute, Event::ComputeEnd(j));
        for p in 0..js.job.peaks.len() {
            self.q.schedule(base + js.job.peaks[p].offset, Event::Peak(j, p));
        }
    }

    fn release_peak(&mut self, j: usize, p: usize) {
        let now = self.now();
        let js = &mut self.jobs[j];
        js.peaks_released += 1;
        js.comm_start.get_or_insert(now);
        let bytes = js.job.peaks[p].bytes;
        let n = js.flows.len() as u32;
        for k in 0..js.flows.len() {
            let f = self.jobs[j].flows[k];
            let flow = &mut self.flows[f];
            flow.release(flow_share(bytes, n, k as u32));
            self.try_send(f);
        }
        self.check_job(j);
    }

    fn check_job(&mut self, j: usize) {
        let now = self.now();
        let js = &self.jobs[j];
        if js.done || !js.compute_done || js.peaks_released < js.job.peaks.len() {
            return;
        }
        if !js.flows.iter().all(|&f| self.flows[f].finished()) {
            return;
        }
        let js = &mut self.jobs[j];
        let comm_start = js.comm_start.unwrap_or(js.start);
        js.records.push(IterationRecord {
            job: j,
            index: js.index,
            start: js.start,
            comm_start,
            comm_end: js.last_ack.max(comm_start),
            duration: now - js.start,
            bytes_delivered: js.job.total_bytes,
            straggler_delay: js.straggler,
        });
        js.index += 1;
        if js.index >= js.job.iterations {
            js.done = true;
            self.jobs_left -= 1;
        } else {
            self.start_iteration(j);
        }
    }

    fn finish(self) -> RunReport {
        let spec = &self.scenario.spec;
        let net = &self.scenario.network;
        let mut links = Vec::new();
        for (i, link) in self.links.iter().enumerate() {
            let id = LinkId(i as u32);
            let trace = self.trace_of[i].map(|t| &self.traces[t]);
            let stats = link.queue.stats();
            if trace.is_none() && stats.dropped == 0 && stats.marked == 0 {
                continue;
            }
            let jobs = (0..self.scenario.routes.len())
                .filter(|&j| self.scenario.routes[j].data.contains(&id))
                .collect();
            links.push(LinkReport {
                name: net.link_name(id),
                rate_bps: link.rate.0,
                monitored: trace.is_some(),
                jobs,
                drops: stats.dropped,
                marks: stats.marked,
                pauses: stats.pauses,
                drops_per_ms: self.drops_ms[i].clone(),
                marks_per_ms: self.marks_ms[i].clone(),
                score_bins: trace.map(|t| t.score.clone()).unwrap_or_default(),
                output_bins: trace.map(|t| t.output.clone()).unwrap_or_default(),
            });
        }
        debug_assert!(self.traces.iter().all(|t| self.trace_of[t.link.index()].is_some()));
        RunReport {
            scenario: self.scenario.name().to_string(),
            seed: spec.seed,
            jobs: self
                .jobs
                .into_iter()
                .map(|js| JobReport {
                    timeouts: js.flows.iter().map(|&f| self.flows[f].timeouts).sum(),
                    fast_retransmits: js.flows.iter().map(|&f| self.flows[f].fast_retransmits).sum(),
                    name: js.job.name,
                    isolation_time: js.job.isolation_time,
                    iterations: js.records,
                })
                .collect(),
            links,
            score_bin: self.scenario.score_bin,
            output_bin: spec.metrics.output_bin,
            activity_threshold: spec.metrics.activity_threshold,
            warmup_iterations: spec.metrics.warmup_iterations,
            end_time: self.q.now(),
            truncated: self.jobs_left > 0,
            events: self.q.dispatched(),
        }
    }
}

/// Bytes of a `total`-byte transfer carried by flow `k` of `n`. The
/// remainder goes to the first flows.
pub fn flow_share(total: u64, n: u32, k: u32) -> u64 {
    let n = n as u64;
    let k = k as u64;
    total / n + u64::from(k < total % n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_sum_to_total() {
        for (total, n) in [(10, 3), (9, 3), (1, 4), (1_000_001, 7)] {
            let sum: u64 = (0..n).map(|k| flow_share(total, n, k)).sum();
            assert_eq!(sum, total);
        }
    }

    #[test]
    fn spread_is_exact() {
        let mut v = Vec::new();
        spread(&mut v, 90, 310, 100, 1000);
        assert_eq!(v.iter().sum::<u64>(), 1000);
        assert_eq!(v, vec![45, 454, 454, 47]);
        let mut w = Vec::new();
        spread(&mut w, 100, 200, 100, 7);
        assert_eq!(w, vec![0, 7]);
    }
}
