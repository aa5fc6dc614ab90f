use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{Link, LinkId, QueueConfig, QueueMode};
use crate::units::{BitRate, SimTime};

/// Egress buffer settings as written in a scenario file. Sizes in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSpec {
    #[serde(with = "crate::units::bytes_serde")]
    pub capacity: u64,
    #[serde(default = "default_mode")]
    pub mode: QueueMode,
    /// Defaults to 100 KB scaled by link rate / 50 Gbps.
    #[serde(default, with = "crate::units::opt_bytes_serde", skip_serializing_if = "Option::is_none")]
    pub ecn_kmin: Option<u64>,
    /// Defaults to 400 KB scaled by link rate / 50 Gbps.
    #[serde(default, with = "crate::units::opt_bytes_serde", skip_serializing_if = "Option::is_none")]
    pub ecn_kmax: Option<u64>,
    #[serde(default = "default_pmax")]
    pub ecn_pmax: f64,
    #[serde(default, with = "crate::units::opt_bytes_serde", skip_serializing_if = "Option::is_none")]
    pub pause_threshold: Option<u64>,
}

fn default_mode() -> QueueMode {
    QueueMode::DropTail
}

fn default_pmax() -> f64 {
    0.2
}

impl Default for QueueSpec {
    fn default() -> Self {
        QueueSpec {
            capacity: 45_000,
            mode: QueueMode::DropTail,
            ecn_kmin: None,
            ecn_kmax: None,
            ecn_pmax: default_pmax(),
            pause_threshold: None,
        }
    }
}

impl QueueSpec {
    pub fn to_config(&self, rate: BitRate) -> QueueConfig {
        let scale = rate.as_f64() / 50e9;
        let kmin = self.ecn_kmin.unwrap_or((100_000.0 * scale).round() as u64);
        let kmax = self.ecn_kmax.unwrap_or((400_000.0 * scale).round() as u64);
        let base = match self.mode {
            QueueMode::DropTail => QueueConfig::drop_tail(self.capacity),
            QueueMode::Ecn => QueueConfig::ecn(self.capacity, kmin, kmax, self.ecn_pmax),
        };
        match self.pause_threshold {
            Some(t) => base.lossless(t),
            None => base,
        }
    }

    pub fn validate(&self, rate: BitRate, mtu: u32) -> Result<(), String> {
        let cfg = self.to_config(rate);
        if cfg.capacity < mtu as u64 {
            return Err(format!("capacity {} is smaller than one MTU", cfg.capacity));
        }
        if cfg.mode == QueueMode::Ecn {
            if cfg.ecn_kmin >= cfg.ecn_kmax {
                return Err("ecn_kmin must be below ecn_kmax".into());
            }
            if !(0.0..=1.0).contains(&cfg.ecn_pmax) {
                return Err("ecn_pmax must lie in [0, 1]".into());
            }
        }
        if let Some(t) = cfg.pause_threshold {
            if t + 8 * mtu as u64 > cfg.capacity {
                return Err("pause_threshold leaves less than 8 MTU of headroom below capacity".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Dumbbell,
    TwoTier,
    Triangle,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    #[serde(default)]
    pub host: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<BitRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<SimTime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<QueueSpec>,
    /// Also create the reverse direction.
    #[serde(default = "yes")]
    pub duplex: bool,
}

fn yes() -> bool {
    true
}

fn default_rate() -> BitRate {
    BitRate::gbps(5)
}

fn default_delay() -> SimTime {
    SimTime::from_micros(5)
}

/// Network shape. Fields that do not apply to `kind` must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    /// Dumbbell host pairs. Defaults to the number of jobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub racks: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hosts_per_rack: Option<u32>,
    /// Rack uplink capacity is `hosts_per_rack * link_rate / oversubscription`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oversubscription: Option<f64>,
    #[serde(default = "default_rate")]
    pub link_rate: BitRate,
    /// Rate of the shared switch-to-switch links. Defaults to `link_rate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottleneck_rate: Option<BitRate>,
    #[serde(default = "default_delay")]
    pub prop_delay: SimTime,
    /// Egress buffer of every switch port.
    #[serde(default)]
    pub queue: QueueSpec,
    /// Override for the switch-to-switch ports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottleneck_queue: Option<QueueSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
}

impl TopologySpec {
    pub fn dumbbell(pairs: u32) -> Self {
        TopologySpec {
            kind: TopologyKind::Dumbbell,
            pairs: Some(pairs),
            racks: None,
            hosts_per_rack: None,
            oversubscription: None,
            link_rate: default_rate(),
            bottleneck_rate: None,
            prop_delay: default_delay(),
            queue: QueueSpec::default(),
            bottleneck_queue: None,
            nodes: Vec::new(),
            links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub is_host: bool,
}

/// Static node/link graph with precomputed routing helpers.
#[derive(Debug, Clone)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    /// Outgoing links per node, in link-id order.
    pub out_links: Vec<Vec<LinkId>>,
    /// Default (source, destination) host per job slot.
    pub default_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyError {
    #[error("field `{field}` does not apply to a {kind:?} topology")]
    FieldNotApplicable { field: &'static str, kind: TopologyKind },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no path from `{0}` to `{1}`")]
    Disconnected(String, String),
}

/// Queue used for host NIC egress. Hosts buffer without bound and are only
/// ever paused, never dropped.
fn host_queue() -> QueueConfig {
    QueueConfig::drop_tail(u64::MAX / 4)
}

struct Builder {
    nodes: Vec<Node>,
    links: Vec<Link>,
    by_name: BTreeMap<String, usize>,
}

impl Builder {
    fn new() -> Self {
        Builder { nodes: Vec::new(), links: Vec::new(), by_name: BTreeMap::new() }
    }

    fn node(&mut self, name: String, is_host: bool) -> Result<usize, TopologyError> {
        if self.by_name.contains_key(&name) {
            return Err(TopologyError::Invalid(format!("duplicate node `{name}`")));
        }
        let id = self.nodes.len();
        self.by_name.insert(name.clone(), id);
        self.nodes.push(Node { name, is_host });
        Ok(id)
    }

    fn simplex(&mut self, from: usize, to: usize, rate: BitRate, delay: SimTime, queue: QueueConfig) {
        let q = if self.nodes[from].is_host { host_queue() } else { queue };
        self.links.push(Link::new(from, to, rate, delay, q));
    }

    fn duplex(&mut self, a: usize, b: usize, rate: BitRate, delay: SimTime, queue: QueueConfig) {
        self.simplex(a, b, rate, delay, queue);
        self.simplex(b, a, rate, delay, queue);
    }

    fn finish(self, default_pairs: Vec<(usize, usize)>) -> Network {
        let mut out_links = vec![Vec::new(); self.nodes.len()];
        for (i, l) in self.links.iter().enumerate() {
            out_links[l.from].push(LinkId(i as u32));
        }
        Network { nodes: self.nodes, links: self.links, out_links, default_pairs }
    }
}

/// Builds the node/link graph. `jobs` is used for defaults such as the
/// number of dumbbell pairs.
pub fn build_network(spec: &TopologySpec, jobs: usize, mtu: u32) -> Result<Network, TopologyError> {
    check_fields(spec)?;
    let rate = spec.link_rate;
    let core_rate = spec.bottleneck_rate.unwrap_or(rate);
    let delay = spec.prop_delay;
    spec.queue.validate(rate, mtu).map_err(TopologyError::Invalid)?;
    let edge_q = spec.queue.to_config(rate);
    let core_spec = spec.bottleneck_queue.unwrap_or(spec.queue);
    core_spec.validate(core_rate, mtu).map_err(TopologyError::Invalid)?;
    let core_q = core_spec.to_config(core_rate);
    let mut b = Builder::new();

    let pairs = match spec.kind {
        TopologyKind::Dumbbell => {
            let n = spec.pairs.unwrap_or(jobs.max(1) as u32) as usize;
            if n == 0 {
                return Err(TopologyError::Invalid("dumbbell needs at least one pair".into()));
            }
            let left: Vec<usize> = (0..n).map(|i| b.node(format!("h{i}"), true)).collect::<Result<_, _>>()?;
            let right: Vec<usize> = (0..n).map(|i| b.node(format!("h{}", n + i), true)).collect::<Result<_, _>>()?;
            let s0 = b.node("s0".into(), false)?;
            let s1 = b.node("s1".into(), false)?;
            for &h in &left {
                b.duplex(h, s0, rate, delay, edge_q);
            }
            for &h in &right {
                b.duplex(h, s1, rate, delay, edge_q);
            }
            b.duplex(s0, s1, core_rate, delay, core_q);
            left.into_iter().zip(right).collect()
        }
        TopologyKind::TwoTier => {
            let racks = spec.racks.unwrap_or(2) as usize;
            let per = spec.hosts_per_rack.unwrap_or(jobs.max(1) as u32) as usize;
            let over = spec.oversubscription.unwrap_or(1.0);
            if racks < 2 || per == 0 || !(over >= 1.0) {
                return Err(TopologyError::Invalid(
                    "two-tier needs racks >= 2, hosts_per_rack >= 1 and oversubscription >= 1".into(),
                ));
            }
            let uplink = spec.bottleneck_rate.unwrap_or(BitRate((rate.0 as f64 * per as f64 / over).round() as u64));
            let hosts: Vec<usize> = (0..racks * per).map(|i| b.node(format!("h{i}"), true)).collect::<Result<_, _>>()?;
            let tors: Vec<usize> = (0..racks).map(|r| b.node(format!("t{r}"), false)).collect::<Result<_, _>>()?;
            let core = b.node("c0".into(), false)?;
            for (i, &h) in hosts.iter().enumerate() {
                b.duplex(h, tors[i / per], rate, delay, edge_q);
            }
            let up_q = core_spec.to_config(uplink);
            for &t in &tors {
                b.duplex(t, core, uplink, delay, up_q);
            }
            // Job i sends from rack 0 to rack 1, cycling through hosts.
            (0..jobs.max(1)).map(|i| (hosts[i % per], hosts[per + i % per])).collect()
        }
        TopologyKind::Triangle => {
            let hosts: Vec<usize> = (0..3).map(|i| b.node(format!("h{i}"), true)).collect::<Result<_, _>>()?;
            let sw: Vec<usize> = (0..3).map(|i| b.node(format!("s{i}"), false)).collect::<Result<_, _>>()?;
            for i in 0..3 {
                b.duplex(hosts[i], sw[i], rate, delay, edge_q);
            }
            // Directed ring s0 -> s1 -> s2 -> s0.
            for i in 0..3 {
                b.simplex(sw[i], sw[(i + 1) % 3], core_rate, delay, core_q);
            }
            (0..3).map(|i| (hosts[i], hosts[(i + 2) % 3])).collect()
        }
        TopologyKind::Custom => {
            if spec.nodes.is_empty() || spec.links.is_empty() {
                return Err(TopologyError::Invalid("custom topology needs nodes and links".into()));
            }
            for n in &spec.nodes {
                b.node(n.name.clone(), n.host)?;
            }
            for l in &spec.links {
                let from = *b.by_name.get(&l.from).ok_or_else(|| TopologyError::UnknownNode(l.from.clone()))?;
                let to = *b.by_name.get(&l.to).ok_or_else(|| TopologyError::UnknownNode(l.to.clone()))?;
                if from == to {
                    return Err(TopologyError::Invalid(format!("self-loop on `{}`", l.from)));
                }
                let r = l.rate.unwrap_or(rate);
                let qs = l.queue.unwrap_or(spec.queue);
                qs.validate(r, mtu).map_err(TopologyError::Invalid)?;
                let q = qs.to_config(r);
                let d = l.delay.unwrap_or(delay);
                if l.duplex {
                    b.duplex(from, to, r, d, q);
                } else {
                    b.simplex(from, to, r, d, q);
                }
            }
            let hosts: Vec<usize> = (0..b.nodes.len()).filter(|&i| b.nodes[i].is_host).collect();
            if hosts.len() < 2 {
                return Err(TopologyError::Invalid("custom topology needs at least two hosts".into()));
            }
            let half = hosts.len() / 2;
            (0..half).map(|i| (hosts[i], hosts[half + i])).collect()
        }
    };
    Ok(b.finish(pairs))
}

fn check_fields(spec: &TopologySpec) -> Result<(), TopologyError> {
    let kind = spec.kind;
    let present: [(&'static str, bool, &[TopologyKind]); 6] = [
        ("pairs", spec.pairs.is_some(), &[TopologyKind::Dumbbell]),
        ("racks", spec.racks.is_some(), &[TopologyKind::TwoTier]),
        ("hosts_per_rack", spec.hosts_per_rack.is_some(), &[TopologyKind::TwoTier]),
        ("oversubscription", spec.oversubscription.is_some(), &[TopologyKind::TwoTier]),
        ("nodes", !spec.nodes.is_empty(), &[TopologyKind::Custom]),
        ("links", !spec.links.is_empty(), &[TopologyKind::Custom]),
    ];
    for (field, set, kinds) in present {
        if set && !kinds.contains(&kind) {
            return Err(TopologyError::FieldNotApplicable { field, kind });
        }
    }
    Ok(())
}

impl Network {
    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn link_name(&self, id: LinkId) -> String {
        let l = &self.links[id.index()];
        format!("{}->{}", self.nodes[l.from].name, self.nodes[l.to].name)
    }

    pub fn link_by_name(&self, name: &str) -> Option<LinkId> {
        (0..self.links.len()).map(|i| LinkId(i as u32)).find(|&id| self.link_name(id) == name)
    }

    /// Links whose both ends are switches.
    pub fn core_links(&self) -> Vec<LinkId> {
        (0..self.links.len())
            .filter(|&i| {
                let l = &self.links[i];
                !self.nodes[l.from].is_host && !self.nodes[l.to].is_host
            })
            .map(|i| LinkId(i as u32))
            .collect()
    }

    /// Fewest-hop path; ties go to the lowest link ids. Paths never transit
    /// through a host.
    pub fn route(&self, src: usize, dst: usize) -> Result<Vec<LinkId>, TopologyError> {
        let mut prev: Vec<Option<LinkId>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        seen[src] = true;
        queue.push_back(src);
        while let Some(n) = queue.pop_front() {
            if n == dst {
                break;
            }
            if n != src && self.nodes[n].is_host {
                continue;
            }
            for &l in &self.out_links[n] {
                let to = self.links[l.index()].to;
                if !seen[to] {
                    seen[to] = true;
                    prev[to] = Some(l);
                    queue.push_back(to);
                }
            }
        }
        if !seen[dst] || src == dst {
            return Err(TopologyError::Disconnected(self.nodes[src].name.clone(), self.nodes[dst].name.clone()));
        }
        let mut path = Vec::new();
        let mut at = dst;
        while at != src {
            let l = prev[at].expect("bfs predecessor");
            path.push(l);
            at = self.links[l.index()].from;
        }
        path.reverse();
        Ok(path)
    }

    /// Lowest link rate along a path.
    pub fn path_rate(&self, path: &[LinkId]) -> BitRate {
        path.iter().map(|l| self.links[l.index()].rate).min().unwrap_or(BitRate(u64::MAX))
    }

    /// Unloaded round trip of an MTU-sized data packet and its ack.
    pub fn base_rtt(&self, data: &[LinkId], ack: &[LinkId], mtu: u32, ack_size: u32) -> SimTime {
        let one_way = |path: &[LinkId], size: u32| {
            path.iter().fold(SimTime::ZERO, |t, l| {
                let link = &self.links[l.index()];
                t + link.prop_delay + link.rate.serialization_time(size as u64)
            })
        };
        one_way(data, mtu) + one_way(ack, ack_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TopologyKind) -> TopologySpec {
        let mut s = TopologySpec::dumbbell(1);
        s.kind = kind;
        s.pairs = None;
        s
    }

    #[test]
    fn dumbbell_six_pairs() {
        let net = build_network(&TopologySpec::dumbbell(6), 6, 1500).unwrap();
        let hosts = net.nodes.iter().filter(|n| n.is_host).count();
        assert_eq!(hosts, 12);
        assert_eq!(net.nodes.len() - hosts, 2);
        assert_eq!(net.core_links().len(), 2);
        let fwd: Vec<_> = net.core_links().into_iter().map(|l| net.link_name(l)).collect();
        assert_eq!(fwd, vec!["s0->s1", "s1->s0"]);
        for &(src, dst) in &net.default_pairs {
            let path = net.route(src, dst).unwrap();
            assert_eq!(path.len(), 3);
            assert_eq!(net.link_name(path[1]), "s0->s1");
        }
    }

    #[test]
    fn dumbbell_rtt() {
        let net = build_network(&TopologySpec::dumbbell(1), 1, 1500).unwrap();
        let (s, d) = net.default_pairs[0];
        let data = net.route(s, d).unwrap();
        let ack = net.route(d, s).unwrap();
        // 6 hops of 5 us, 3 x 2400 ns for data and 3 x 103 ns (64 B, rounded up) for acks.
        assert_eq!(net.base_rtt(&data, &ack, 1500, 64), SimTime(30_000 + 7_200 + 309));
    }

    #[test]
    fn triangle_structure() {
        let net = build_network(&spec(TopologyKind::Triangle), 3, 1500).unwrap();
        let core = net.core_links();
        assert_eq!(core.len(), 3);
        let mut per_link = vec![0; net.links.len()];
        for &(s, d) in &net.default_pairs {
            let path = net.route(s, d).unwrap();
            let on_core: Vec<_> = path.iter().filter(|l| core.contains(l)).collect();
            assert_eq!(on_core.len(), 2);
            for l in on_core {
                per_link[l.index()] += 1;
            }
            let back = net.route(d, s).unwrap();
            assert_eq!(back.iter().filter(|l| core.contains(l)).count(), 1);
        }
        for l in core {
            assert_eq!(per_link[l.index()], 2);
        }
    }

    #[test]
    fn two_tier_uplinks_are_shared() {
        let mut s = spec(TopologyKind::TwoTier);
        s.racks = Some(3);
        s.hosts_per_rack = Some(4);
        s.oversubscription = Some(2.0);
        let net = build_network(&s, 4, 1500).unwrap();
        assert_eq!(net.nodes.iter().filter(|n| n.is_host).count(), 12);
        let core = net.core_links();
        assert_eq!(core.len(), 6);
        assert_eq!(net.links[core[0].index()].rate, BitRate::gbps(10));
        let (a, b) = net.default_pairs[0];
        assert_eq!(net.route(a, b).unwrap().len(), 4);
    }

    #[test]
    fn custom_single_link() {
        let mut s = spec(TopologyKind::Custom);
        s.nodes = vec![NodeSpec { name: "a".into(), host: true }, NodeSpec { name: "b".into(), host: true }];
        s.links = vec![LinkSpec { from: "a".into(), to: "b".into(), rate: None, delay: None, queue: None, duplex: true }];
        let net = build_network(&s, 1, 1500).unwrap();
        assert_eq!(net.route(0, 1).unwrap(), vec![LinkId(0)]);
    }

    #[test]
    fn disconnected_pair_is_reported() {
        let mut s = spec(TopologyKind::Custom);
        s.nodes = ["a", "b", "c"].iter().map(|n| NodeSpec { name: n.to_string(), host: true }).collect();
        s.links = vec![LinkSpec { from: "a".into(), to: "b".into(), rate: None, delay: None, queue: None, duplex: true }];
        let net = build_network(&s, 1, 1500).unwrap();
        assert!(matches!(net.route(0, 2), Err(TopologyError::Disconnected(..))));
    }

    #[test]
    fn misplaced_field_rejected() {
        let mut s = spec(TopologyKind::Triangle);
        s.pairs = Some(2);
        assert!(matches!(build_network(&s, 3, 1500), Err(TopologyError::FieldNotApplicable { field: "pairs", .. })));
    }

    #[test]
    fn ecn_defaults_scale_with_rate() {
        let q = QueueSpec { mode: QueueMode::Ecn, capacity: 1_000_000, ..Default::default() };
        let cfg = q.to_config(BitRate::gbps(5));
        assert_eq!((cfg.ecn_kmin, cfg.ecn_kmax), (10_000, 40_000));
        let cfg50 = q.to_config(BitRate::gbps(50));
        assert_eq!((cfg50.ecn_kmin, cfg50.ecn_kmax), (100_000, 400_000));
    }
}
