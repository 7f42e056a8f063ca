use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Diagnostic, HarnessError};
use crate::egress::{GateControlList, GateEntry, GuardMode, PreemptionConfig};
use crate::ingress::{StreamGate, StreamGateEntry};
use crate::network::{cqf_compose, CqfConfig, ForwardingPreset};
use crate::redundancy::MAX_RECOVERY_WINDOW;
use crate::sim::{ClockConfig, JitterDist, SimTime};
use crate::traffic::{transmission_time, FrameLimits, MacAddr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub clocks: BTreeMap<String, NodeClocks>,
    #[serde(default)]
    pub shapers: Vec<ShaperConfig>,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub frer: Vec<FrerStreamConfig>,
    #[serde(default)]
    pub cqf: Option<CqfScenarioConfig>,
    pub traffic: Vec<TalkerConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    EndStation,
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddr>,
    /// Bridges only; defaults to `linux_bridge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<ForwardingPreset>,
    /// Bridges only; overrides the preset distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forwarding_latency: Option<JitterDist>,
    /// End stations only: delay from frame reception to the software
    /// receive timestamp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_latency: Option<JitterDist>,
}

fn default_rate() -> u64 {
    1_000_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    #[serde(default = "default_rate")]
    pub rate_bps: u64,
    #[serde(default)]
    pub propagation_ns: u64,
    #[serde(default)]
    pub overhead_bytes: u64,
    #[serde(default)]
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeClocks {
    #[serde(default)]
    pub system: ClockConfig,
    #[serde(default)]
    pub phc: ClockConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaprioConfig {
    #[serde(default)]
    pub base_time_ns: u64,
    pub entries: Vec<GateEntry>,
    /// Defaults to the sum of entry durations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_time_ns: Option<u64>,
    #[serde(default)]
    pub guard: GuardMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtfShaperConfig {
    #[serde(default)]
    pub offload: bool,
    /// Defaults to 50 µs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_ns: Option<u64>,
}

/// Egress configuration of the port on `node` facing `port`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShaperConfig {
    pub node: String,
    pub port: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taprio: Option<TaprioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub etf: Option<EtfShaperConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preemption: Option<PreemptionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRuleConfig {
    pub name: String,
    /// Node name or MAC address.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlan_id: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcp: Option<u8>,
}

/// Stream gate on `node` for frames of `stream` arriving from `ingress`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub node: String,
    pub ingress: String,
    pub stream: String,
    #[serde(default)]
    pub base_time_ns: u64,
    pub entries: Vec<StreamGateEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default)]
    pub streams: Vec<StreamRuleConfig>,
    #[serde(default)]
    pub gates: Vec<GateConfig>,
    /// Drop frames that match no gate on a policed port.
    #[serde(default)]
    pub drop_unmatched: bool,
}

fn default_window() -> u16 {
    crate::redundancy::DEFAULT_RECOVERY_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrerStreamConfig {
    pub talker: String,
    /// Member paths as node lists from the talker node to its listener.
    pub paths: Vec<Vec<String>>,
    #[serde(default = "default_window")]
    pub window: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqfScenarioConfig {
    pub cycle_time_ns: u64,
    pub ipv_even: u8,
    pub ipv_odd: u8,
    #[serde(default)]
    pub base_time_ns: u64,
    pub bridges: Vec<String>,
    /// Stream names to gate; all defined streams when empty.
    #[serde(default)]
    pub streams: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TalkerMode {
    /// Sleep until the intended time, then send.
    #[default]
    Sleep,
    /// Wake early and hand the frame to ETF with a launch time.
    Txtime,
}

fn default_period() -> u64 {
    500_000
}

fn default_frame_size() -> u32 {
    64
}

fn default_start() -> u64 {
    1_000_000
}

fn default_advance() -> u64 {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TalkerConfig {
    pub name: String,
    pub node: String,
    pub listener: String,
    #[serde(default = "default_period")]
    pub period_ns: u64,
    /// Intended time of packet 0 on the talker's system clock.
    #[serde(default = "default_start")]
    pub start_ns: u64,
    /// Defaults to `run.count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default = "default_frame_size")]
    pub frame_size_bytes: u32,
    #[serde(default)]
    pub priority: u8,
    #[serde(default)]
    pub vlan_id: u16,
    #[serde(default)]
    pub mode: TalkerMode,
    /// Txtime mode: how long before the launch time the talker wakes.
    #[serde(default = "default_advance")]
    pub txtime_advance_ns: u64,
    #[serde(default)]
    pub wake_jitter: JitterDist,
    #[serde(default)]
    pub stack_latency: JitterDist,
    #[serde(default)]
    pub driver_latency: JitterDist,
    #[serde(default)]
    pub hw_precision: JitterDist,
}

fn default_count() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: u64,
    /// Defaults to 1 ns for offloaded launch-time talkers, 100 ns otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bin_ns: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            count: default_count(),
            histogram_bin_ns: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self, HarnessError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let field = e.path().to_string();
            HarnessError::invalid(field, e.into_inner().to_string())
        })
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| HarnessError::invalid("<document>", e.to_string()))?;
        Self::from_value(value)
    }

    /// Parse and validate a scenario file.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn node(&self, name: &str) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn talker_count(&self, t: &TalkerConfig) -> u64 {
        t.count.unwrap_or(self.run.count)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let diags = Validator::new(self).run();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::ConfigInvalid(diags))
        }
    }

    pub(crate) fn link_between(&self, a: &str, b: &str) -> Option<&LinkConfig> {
        self.links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Node-level shortest path, ties broken by link order.
    pub(crate) fn shortest_path(&self, from: &str, to: &str) -> Option<Vec<String>> {
        let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                let mut path = vec![to.to_string()];
                let mut cur = to;
                while let Some(p) = prev.get(cur) {
                    path.push(p.to_string());
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for l in &self.links {
                let next = if l.a == n {
                    l.b.as_str()
                } else if l.b == n {
                    l.a.as_str()
                } else {
                    continue;
                };
                // frames may only transit bridges
                let transit_ok =
                    next == to || self.node(next).is_some_and(|x| x.kind == NodeKind::Bridge);
                if transit_ok && seen.insert(next) {
                    prev.insert(next, n);
                    queue.push_back(next);
                }
            }
        }
        None
    }

    pub(crate) fn resolve_mac(&self, dest: &str) -> Option<MacAddr> {
        if let Some(i) = self.nodes.iter().position(|n| n.name == dest) {
            return Some(self.node_mac(i));
        }
        dest.parse().ok()
    }

    pub(crate) fn node_mac(&self, index: usize) -> MacAddr {
        self.nodes[index]
            .mac
            .unwrap_or_else(|| MacAddr::local(index as u32 + 1))
    }

    pub(crate) fn histogram_bin(&self) -> u64 {
        self.run.histogram_bin_ns.unwrap_or_else(|| {
            let offload = self.traffic.first().is_some_and(|t| {
                t.mode == TalkerMode::Txtime
                    && self
                        .shapers
                        .iter()
                        .any(|s| s.node == t.node && s.etf.is_some_and(|e| e.offload))
            });
            if offload {
                1
            } else {
                super::stats::DEFAULT_BIN_WIDTH_NS
            }
        })
    }
}

struct Validator<'a> {
    cfg: &'a ScenarioConfig,
    diags: Vec<Diagnostic>,
}

impl<'a> Validator<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Validator {
            cfg,
            diags: Vec::new(),
        }
    }

    fn err(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(field, message));
    }

    fn dist(&mut self, field: String, d: &JitterDist) {
        if let Err(e) = d.validate() {
            self.err(field, e.to_string());
        }
    }

    fn kind_of(&self, name: &str) -> Option<NodeKind> {
        self.cfg.node(name).map(|n| n.kind)
    }

    fn run(mut self) -> Vec<Diagnostic> {
        self.nodes();
        self.links();
        self.clocks();
        self.shapers();
        self.filters();
        self.frer();
        self.cqf();
        self.traffic();
        if self.cfg.run.count == 0 {
            self.err("run.count", "must be positive");
        }
        if self.cfg.run.histogram_bin_ns == Some(0) {
            self.err("run.histogram_bin_ns", "must be positive");
        }
        self.diags
    }

    fn nodes(&mut self) {
        let cfg = self.cfg;
        if cfg.nodes.is_empty() {
            self.err("nodes", "at least one node is required");
        }
        let mut names = BTreeSet::new();
        let mut macs = BTreeSet::new();
        for (i, n) in cfg.nodes.iter().enumerate() {
            let f = format!("nodes[{i}]");
            if n.name.is_empty() {
                self.err(format!("{f}.name"), "must not be empty");
            }
            if !names.insert(n.name.as_str()) {
                self.err(format!("{f}.name"), format!("duplicate node {:?}", n.name));
            }
            if !macs.insert(cfg.node_mac(i)) {
                self.err(format!("{f}.mac"), "duplicate MAC address");
            }
            match n.kind {
                NodeKind::Bridge => {
                    if n.rx_latency.is_some() {
                        self.err(
                            format!("{f}.rx_latency"),
                            "only end stations have rx_latency",
                        );
                    }
                }
                NodeKind::EndStation => {
                    if n.preset.is_some() {
                        self.err(
                            format!("{f}.preset"),
                            "only bridges have a forwarding preset",
                        );
                    }
                    if n.forwarding_latency.is_some() {
                        self.err(
                            format!("{f}.forwarding_latency"),
                            "only bridges have a forwarding latency",
                        );
                    }
                }
            }
            if let Some(d) = &n.forwarding_latency {
                self.dist(format!("{f}.forwarding_latency"), d);
            }
            if let Some(d) = &n.rx_latency {
                self.dist(format!("{f}.rx_latency"), d);
            }
        }
    }

    fn links(&mut self) {
        let cfg = self.cfg;
        let mut pairs = BTreeSet::new();
        for (i, l) in cfg.links.iter().enumerate() {
            let f = format!("links[{i}]");
            for (end, name) in [("a", &l.a), ("b", &l.b)] {
                if cfg.node(name).is_none() {
                    self.err(format!("{f}.{end}"), format!("unknown node {name:?}"));
                }
            }
            if l.a == l.b {
                self.err(f.clone(), "a link needs two distinct nodes");
            }
            let key = if l.a < l.b {
                (l.a.as_str(), l.b.as_str())
            } else {
                (l.b.as_str(), l.a.as_str())
            };
            if !pairs.insert(key) {
                self.err(f.clone(), "duplicate link between the same nodes");
            }
            if l.rate_bps == 0 {
                self.err(format!("{f}.rate_bps"), "must be positive");
            }
            if !(0.0..1.0).contains(&l.loss) {
                self.err(format!("{f}.loss"), "must be in [0, 1)");
            }
        }
    }

    fn clocks(&mut self) {
        let cfg = self.cfg;
        for (name, c) in &cfg.clocks {
            let f = format!("clocks.{name}");
            if cfg.node(name).is_none() {
                self.err(f.clone(), format!("unknown node {name:?}"));
            }
            for (which, cc) in [("system", &c.system), ("phc", &c.phc)] {
                let f = format!("{f}.{which}");
                if !cc.drift_ppm.is_finite() || cc.drift_ppm.abs() > 1e6 {
                    self.err(format!("{f}.drift_ppm"), "must be finite and below 10^6");
                }
                if cc.sync_interval_ns == Some(0) {
                    self.err(format!("{f}.sync_interval_ns"), "must be positive");
                }
                self.dist(format!("{f}.sync_residual"), &cc.sync_residual);
            }
        }
    }

    fn shapers(&mut self) {
        let cfg = self.cfg;
        let mut seen = BTreeSet::new();
        for (i, s) in cfg.shapers.iter().enumerate() {
            let f = format!("shapers[{i}]");
            if cfg.link_between(&s.node, &s.port).is_none() {
                self.err(
                    f.clone(),
                    format!("no link between {:?} and {:?}", s.node, s.port),
                );
            }
            if !seen.insert((s.node.as_str(), s.port.as_str())) {
                self.err(f.clone(), "duplicate shaper for this port");
            }
            if let Some(t) = &s.taprio {
                let gcl = match t.cycle_time_ns {
                    Some(c) => GateControlList::with_cycle_time(
                        SimTime(t.base_time_ns),
                        c,
                        t.entries.clone(),
                    ),
                    None => GateControlList::new(SimTime(t.base_time_ns), t.entries.clone()),
                };
                if let Err(e) = gcl {
                    self.err(format!("{f}.taprio"), e.to_string());
                }
            }
            if s.queue_capacity == Some(0) {
                self.err(format!("{f}.queue_capacity"), "must be positive");
            }
            if let Some(p) = &s.preemption {
                if p.min_fragment_bytes == 0 {
                    self.err(
                        format!("{f}.preemption.min_fragment_bytes"),
                        "must be positive",
                    );
                }
            }
        }
    }

    fn filters(&mut self) {
        let cfg = self.cfg;
        let mut names = BTreeSet::new();
        let mut exact = BTreeSet::new();
        for (i, s) in cfg.filters.streams.iter().enumerate() {
            let f = format!("filters.streams[{i}]");
            if !names.insert(s.name.as_str()) {
                self.err(
                    format!("{f}.name"),
                    format!("duplicate stream {:?}", s.name),
                );
            }
            let mac = s.dest.as_deref().map(|d| (d, cfg.resolve_mac(d)));
            if let Some((d, None)) = mac {
                self.err(
                    format!("{f}.dest"),
                    format!("{d:?} is neither a node nor a MAC"),
                );
            }
            if s.pcp.is_some_and(|p| p > 7) {
                self.err(format!("{f}.pcp"), "must be 0-7");
            }
            if s.vlan_id.is_some_and(|v| v > 4095) {
                self.err(format!("{f}.vlan_id"), "must be 0-4095");
            }
            if let (Some((_, Some(m))), Some(v), Some(p)) = (mac, s.vlan_id, s.pcp) {
                if !exact.insert((m, v, p)) {
                    self.err(f, "duplicate exact match rule");
                }
            }
        }
        let mut gated = BTreeSet::new();
        for (i, g) in cfg.filters.gates.iter().enumerate() {
            let f = format!("filters.gates[{i}]");
            if self.kind_of(&g.node) != Some(NodeKind::Bridge) {
                self.err(format!("{f}.node"), format!("{:?} is not a bridge", g.node));
            }
            if cfg.link_between(&g.node, &g.ingress).is_none() {
                self.err(
                    format!("{f}.ingress"),
                    format!("no link between {:?} and {:?}", g.node, g.ingress),
                );
            }
            if !names.contains(g.stream.as_str()) {
                self.err(
                    format!("{f}.stream"),
                    format!("unknown stream {:?}", g.stream),
                );
            }
            if !gated.insert((g.node.as_str(), g.ingress.as_str(), g.stream.as_str())) {
                self.err(f.clone(), "duplicate gate for this port and stream");
            }
            if g.entries.iter().any(|e| e.ipv.is_some_and(|v| v > 7)) {
                self.err(format!("{f}.entries"), "ipv must be 0-7");
            }
            if let Err(e) = StreamGate::new(SimTime(g.base_time_ns), &g.entries) {
                self.err(format!("{f}.entries"), e.to_string());
            }
        }
    }

    fn frer(&mut self) {
        let cfg = self.cfg;
        let mut talkers = BTreeSet::new();
        for (i, fr) in cfg.frer.iter().enumerate() {
            let f = format!("frer[{i}]");
            let Some(t) = cfg.traffic.iter().find(|t| t.name == fr.talker) else {
                self.err(
                    format!("{f}.talker"),
                    format!("unknown talker {:?}", fr.talker),
                );
                continue;
            };
            if !talkers.insert(fr.talker.as_str()) {
                self.err(
                    format!("{f}.talker"),
                    "talker already has a replication setup",
                );
            }
            if fr.window == 0 || fr.window > MAX_RECOVERY_WINDOW {
                self.err(format!("{f}.window"), "must be in 1..=32768");
            }
            if fr.paths.is_empty() || fr.paths.len() > 254 {
                self.err(format!("{f}.paths"), "needs 1 to 254 member paths");
            }
            for (p, path) in fr.paths.iter().enumerate() {
                let pf = format!("{f}.paths[{p}]");
                if path.first() != Some(&t.node) || path.last() != Some(&t.listener) {
                    self.err(
                        pf.clone(),
                        format!("must run from {:?} to {:?}", t.node, t.listener),
                    );
                }
                if path.len() < 2 {
                    continue;
                }
                for w in path.windows(2) {
                    if cfg.link_between(&w[0], &w[1]).is_none() {
                        self.err(
                            pf.clone(),
                            format!("no link between {:?} and {:?}", w[0], w[1]),
                        );
                    }
                }
                for hop in &path[1..path.len() - 1] {
                    if self.kind_of(hop) != Some(NodeKind::Bridge) {
                        self.err(pf.clone(), format!("{hop:?} is not a bridge"));
                    }
                }
                let unique: BTreeSet<_> = path.iter().collect();
                if unique.len() != path.len() {
                    self.err(pf, "path visits a node twice");
                }
            }
        }
    }

    fn cqf(&mut self) {
        let cfg = self.cfg;
        let Some(c) = &cfg.cqf else {
            return;
        };
        let compose = cqf_compose(&CqfConfig {
            cycle_time_ns: c.cycle_time_ns,
            ipv_even: c.ipv_even,
            ipv_odd: c.ipv_odd,
            hops: c.bridges.len() as u32,
            base_time: SimTime(c.base_time_ns),
        });
        if let Err(e) = compose {
            self.err("cqf", e.to_string());
        }
        if c.bridges.is_empty() {
            self.err("cqf.bridges", "at least one bridge is required");
        }
        for (i, b) in c.bridges.iter().enumerate() {
            if self.kind_of(b) != Some(NodeKind::Bridge) {
                self.err(
                    format!("cqf.bridges[{i}]"),
                    format!("{b:?} is not a bridge"),
                );
            }
            if cfg
                .shapers
                .iter()
                .any(|s| &s.node == b && s.taprio.is_some())
            {
                self.err(
                    format!("cqf.bridges[{i}]"),
                    "CQF bridges get their gate schedule from the cqf section",
                );
            }
            if cfg.filters.gates.iter().any(|g| &g.node == b) {
                self.err(
                    format!("cqf.bridges[{i}]"),
                    "CQF bridges get their stream gates from the cqf section",
                );
            }
        }
        if cfg.filters.streams.is_empty() {
            self.err("cqf", "CQF needs stream rules in filters.streams");
        }
        for (i, s) in c.streams.iter().enumerate() {
            if !cfg.filters.streams.iter().any(|x| &x.name == s) {
                self.err(format!("cqf.streams[{i}]"), format!("unknown stream {s:?}"));
            }
        }
    }

    fn traffic(&mut self) {
        let cfg = self.cfg;
        if cfg.traffic.is_empty() {
            self.err("traffic", "at least one talker is required");
        }
        let limits = FrameLimits::default();
        let mut names = BTreeSet::new();
        for (i, t) in cfg.traffic.iter().enumerate() {
            let f = format!("traffic[{i}]");
            if !names.insert(t.name.as_str()) {
                self.err(
                    format!("{f}.name"),
                    format!("duplicate talker {:?}", t.name),
                );
            }
            for (field, name) in [("node", &t.node), ("listener", &t.listener)] {
                match self.kind_of(name) {
                    Some(NodeKind::EndStation) => {}
                    Some(NodeKind::Bridge) => {
                        self.err(format!("{f}.{field}"), format!("{name:?} is a bridge"))
                    }
                    None => self.err(format!("{f}.{field}"), format!("unknown node {name:?}")),
                }
            }
            if t.node == t.listener {
                self.err(format!("{f}.listener"), "talker and listener must differ");
            }
            if t.period_ns == 0 {
                self.err(format!("{f}.period_ns"), "must be positive");
            }
            if t.count == Some(0) {
                self.err(format!("{f}.count"), "must be positive");
            }
            if let Err(e) = limits.check(t.frame_size_bytes) {
                self.err(format!("{f}.frame_size_bytes"), e.to_string());
            }
            if t.priority > 7 {
                self.err(format!("{f}.priority"), "must be 0-7");
            }
            if t.vlan_id > 4095 {
                self.err(format!("{f}.vlan_id"), "must be 0-4095");
            }
            for (field, d) in [
                ("wake_jitter", &t.wake_jitter),
                ("stack_latency", &t.stack_latency),
                ("driver_latency", &t.driver_latency),
                ("hw_precision", &t.hw_precision),
            ] {
                self.dist(format!("{f}.{field}"), d);
            }
            if t.mode == TalkerMode::Txtime && t.txtime_advance_ns >= t.start_ns {
                self.err(
                    format!("{f}.txtime_advance_ns"),
                    "must be smaller than start_ns",
                );
            }
            if self.kind_of(&t.node).is_none() || self.kind_of(&t.listener).is_none() {
                continue;
            }
            let Some(path) = cfg.shortest_path(&t.node, &t.listener) else {
                self.err(format!("{f}.listener"), "not reachable from the talker");
                continue;
            };
            let first = cfg
                .link_between(&path[0], &path[1])
                .expect("path follows links");
            if let Ok(wire) = transmission_time(
                t.frame_size_bytes as u64,
                first.rate_bps,
                first.overhead_bytes,
            ) {
                if t.period_ns <= wire {
                    self.err(
                        format!("{f}.period_ns"),
                        format!("must exceed the {wire} ns transmission time on the first link"),
                    );
                }
            }
            if t.mode == TalkerMode::Txtime {
                let ports: Vec<&str> = match cfg.frer.iter().find(|x| x.talker == t.name) {
                    Some(fr) => fr
                        .paths
                        .iter()
                        .filter_map(|p| p.get(1))
                        .map(String::as_str)
                        .collect(),
                    None => vec![path[1].as_str()],
                };
                for p in ports {
                    let has_etf = cfg
                        .shapers
                        .iter()
                        .any(|s| s.node == t.node && s.port == p && s.etf.is_some());
                    if !has_etf {
                        self.err(
                            format!("{f}.mode"),
                            format!("txtime mode needs an etf shaper on {:?} port {p:?}", t.node),
                        );
                    }
                }
            }
        }
    }
}

/// Set `key` (dot separated; array elements by index or by `name`) in a
/// scenario document. The last segment may create a missing object field.
pub fn set_dotted(doc: &mut Value, key: &str, new: Value) -> Result<(), HarnessError> {
    let segments: Vec<&str> = key.split('.').collect();
    if key.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(HarnessError::invalid(key, "empty path segment"));
    }
    let mut cur = doc;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let missing = || HarnessError::invalid(key, format!("no element {seg:?}"));
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), new);
                    return Ok(());
                }
                map.get_mut(*seg).ok_or_else(missing)?
            }
            Value::Array(items) => {
                let idx = match seg.parse::<usize>() {
                    Ok(i) => Some(i),
                    Err(_) => items
                        .iter()
                        .position(|v| v.get("name").and_then(Value::as_str) == Some(seg)),
                };
                let slot = idx.and_then(|i| items.get_mut(i)).ok_or_else(missing)?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            _ => return Err(missing()),
        };
    }
    unreachable!("loop returns on the last segment")
}
