use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{NodeKind, ScenarioConfig, TalkerConfig, TalkerMode};
use super::records::PacketRecord;
use super::{Diagnostic, HarnessError};
use crate::egress::{
    launch_time, preempt_transmit, EnqueueOutcome, EtfEnqueue, EtfQueue, GateControlList,
    GuardMode, PreemptableTx, PreemptionConfig, TaprioPort, DEFAULT_OFFLOAD_DELTA_NS,
    DEFAULT_QUEUE_CAPACITY, DEFAULT_SOFTWARE_DELTA_NS, NUM_CLASSES,
};
use crate::ingress::{PsfpDecision, StreamGate};
use crate::network::{
    cqf_compose, BridgeNode, CqfConfig, ForwardOutcome, ForwardingTable, Link, PortId,
};
use crate::redundancy::{
    replicate, RecoveryCounters, RecoveryOutcome, RecoveryState, SequenceGenerator,
};
use crate::sim::{rng_fork, ClockModel, Engine, JitterDist, SimRng, SimTime};
use crate::traffic::{
    make_stream_rules, transmission_time, Frame, MacAddr, StreamHandle, StreamKey, StreamPattern,
    Timeline,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep per-port enqueue and wire logs in the result.
    pub record_logs: bool,
}

/// One contiguous stretch of a frame on the wire (a whole frame, or one
/// fragment when preempted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxSegment {
    pub port: PortId,
    pub frame_id: u64,
    pub talker: usize,
    pub app_seq: u64,
    pub class: u8,
    pub ipv: Option<u8>,
    pub size_bytes: u32,
    pub start: SimTime,
    pub end: SimTime,
    /// False for a fragment followed by a resumption.
    pub last: bool,
}

/// A frame reaching an egress port's queues, at true time `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnqueueEntry {
    pub port: PortId,
    pub frame_id: u64,
    pub class: u8,
    pub size_bytes: u32,
    pub at: SimTime,
}

/// A frame fully received by an end station, before duplicate elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RxEntry {
    pub port: PortId,
    pub frame_id: u64,
    pub talker: usize,
    pub app_seq: u64,
    pub path_label: u8,
    pub seq: Option<u16>,
    pub at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortInfo {
    pub node: String,
    pub peer: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    pub talker: String,
    pub period_ns: u64,
    pub records: Vec<PacketRecord>,
    /// True-time pipeline instants, aligned with `records`.
    pub timelines: Vec<Timeline>,
    pub frer: Option<RecoveryCounters>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub description: String,
    pub seed: u64,
    pub histogram_bin_ns: u64,
    pub streams: Vec<StreamRun>,
    pub drops: BTreeMap<String, u64>,
    pub events_executed: u64,
    pub end_time: SimTime,
    pub ports: Vec<PortInfo>,
    pub tx_log: Vec<TxSegment>,
    pub enqueue_log: Vec<EnqueueEntry>,
    pub rx_log: Vec<RxEntry>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult, HarnessError> {
    run_scenario_with(cfg, RunOptions::default())
}

pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    opts: RunOptions,
) -> Result<RunResult, HarnessError> {
    cfg.validate()?;
    let mut world = World::build(cfg, opts)?;
    world.start()?;
    while let Some((now, ev)) = world.engine.pop_next() {
        world.handle(now, ev)?;
    }
    Ok(world.finish(cfg))
}

#[derive(Debug)]
enum Ev {
    Wake {
        talker: usize,
        k: u64,
    },
    StackDone {
        talker: usize,
        k: u64,
    },
    EtfRelease {
        port: PortId,
    },
    MacEnqueue {
        port: PortId,
        frame: Box<Frame>,
    },
    PortWake {
        port: PortId,
    },
    Kick {
        port: PortId,
    },
    TxDone {
        port: PortId,
        gen: u64,
    },
    Arrive {
        port: PortId,
        frame: Box<Frame>,
        rx_start: SimTime,
    },
    Sync {
        node: usize,
        phc: bool,
    },
}

struct NodeRt {
    name: String,
    mac: MacAddr,
    system: ClockModel,
    phc: ClockModel,
    bridge: Option<BridgeNode>,
    fdb: ForwardingTable,
    rx_latency: JitterDist,
    rng: SimRng,
    sync_rng: [SimRng; 2],
}

#[derive(Debug, Clone)]
struct InFlight {
    frame: Frame,
    first_start: SimTime,
    seg_start: SimTime,
    /// Present for frames sent through the preemptable MAC.
    ptx: Option<PreemptableTx>,
}

struct PortRt {
    node: usize,
    peer_port: PortId,
    link: Link,
    taprio: TaprioPort,
    etf: Option<EtfQueue>,
    preemption: PreemptionConfig,
    current: Option<InFlight>,
    suspended: Option<InFlight>,
    gen: u64,
    kick_pending: bool,
    wake_at: Option<SimTime>,
    etf_at: Option<SimTime>,
    loss_rng: SimRng,
}

struct TalkerRt {
    cfg: TalkerConfig,
    node: usize,
    listener: usize,
    count: u64,
    key: StreamKey,
    labels: Vec<u8>,
    seqgen: Option<SequenceGenerator>,
    recovery: Option<RecoveryState>,
    wake_rng: SimRng,
    stack_rng: SimRng,
    driver_rng: SimRng,
    precision_rng: SimRng,
    records: Vec<PacketRecord>,
    timelines: Vec<Timeline>,
}

impl TalkerRt {
    fn intended(&self, k: u64) -> SimTime {
        SimTime(self.cfg.start_ns + k * self.cfg.period_ns)
    }

    /// System-clock reading the application sleeps until for packet `k`.
    fn wake_target(&self, k: u64) -> SimTime {
        match self.cfg.mode {
            TalkerMode::Sleep => self.intended(k),
            TalkerMode::Txtime => SimTime(self.intended(k).0 - self.cfg.txtime_advance_ns),
        }
    }
}

struct World {
    engine: Engine<Ev>,
    nodes: Vec<NodeRt>,
    ports: Vec<PortRt>,
    port_info: Vec<PortInfo>,
    talkers: Vec<TalkerRt>,
    drops: BTreeMap<String, u64>,
    next_frame_id: u64,
    sync_pending: usize,
    opts: RunOptions,
    tx_log: Vec<TxSegment>,
    enqueue_log: Vec<EnqueueEntry>,
    rx_log: Vec<RxEntry>,
}

fn runtime(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Earliest true time, not before `now`, at which `clock` reads `reading`.
fn true_at(clock: &ClockModel, reading: SimTime, now: SimTime) -> SimTime {
    clock.true_time_for(reading).max(now)
}

fn drop_reason(d: PsfpDecision) -> &'static str {
    match d {
        PsfpDecision::Pass(_) => "pass",
        PsfpDecision::DropClosedGate => "psfp_closed_gate",
        PsfpDecision::DropOctetBudget => "psfp_octet_budget",
        PsfpDecision::DropNoStream => "psfp_no_stream",
    }
}

impl World {
    fn build(cfg: &ScenarioConfig, opts: RunOptions) -> Result<Self, HarnessError> {
        let seed = cfg.run.seed;
        let index: BTreeMap<&str, usize> = cfg
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.as_str(), i))
            .collect();

        let mut nodes: Vec<NodeRt> = cfg
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let clocks = cfg.clocks.get(&n.name).cloned().unwrap_or_default();
                let bridge = (n.kind == NodeKind::Bridge).then(|| {
                    BridgeNode::new(
                        n.name.clone(),
                        n.preset.unwrap_or_default(),
                        n.forwarding_latency.clone(),
                    )
                });
                NodeRt {
                    name: n.name.clone(),
                    mac: cfg.node_mac(i),
                    system: clocks.system.build(),
                    phc: clocks.phc.build(),
                    bridge,
                    fdb: ForwardingTable::default(),
                    rx_latency: n.rx_latency.clone().unwrap_or_default(),
                    rng: rng_fork(seed, &format!("node/{}", n.name)),
                    sync_rng: [
                        rng_fork(seed, &format!("clock/{}/system", n.name)),
                        rng_fork(seed, &format!("clock/{}/phc", n.name)),
                    ],
                }
            })
            .collect();

        let cqf = match &cfg.cqf {
            Some(c) => Some((
                c,
                cqf_compose(&CqfConfig {
                    cycle_time_ns: c.cycle_time_ns,
                    ipv_even: c.ipv_even,
                    ipv_odd: c.ipv_odd,
                    hops: c.bridges.len() as u32,
                    base_time: SimTime(c.base_time_ns),
                })
                .map_err(|e| HarnessError::invalid("cqf", e.to_string()))?,
            )),
            None => None,
        };
        let is_cqf_bridge = |name: &str| {
            cqf.as_ref()
                .is_some_and(|(c, _)| c.bridges.iter().any(|b| b == name))
        };

        let mut ports = Vec::new();
        let mut port_info = Vec::new();
        let mut port_of: BTreeMap<(usize, usize), PortId> = BTreeMap::new();
        for l in &cfg.links {
            let (a, b) = (index[l.a.as_str()], index[l.b.as_str()]);
            let base = ports.len();
            for (dir, (from, to)) in [(a, b), (b, a)].into_iter().enumerate() {
                let from_name = &cfg.nodes[from].name;
                let to_name = &cfg.nodes[to].name;
                let shaper = cfg
                    .shapers
                    .iter()
                    .find(|s| &s.node == from_name && &s.port == to_name);
                let link = Link {
                    rate_bps: l.rate_bps,
                    propagation_ns: l.propagation_ns,
                    overhead_bytes: l.overhead_bytes,
                    loss: l.loss,
                };
                let (gcl, guard) = match (shaper.and_then(|s| s.taprio.as_ref()), &cqf) {
                    (Some(t), _) => {
                        let gcl = match t.cycle_time_ns {
                            Some(c) => GateControlList::with_cycle_time(
                                SimTime(t.base_time_ns),
                                c,
                                t.entries.clone(),
                            ),
                            None => {
                                GateControlList::new(SimTime(t.base_time_ns), t.entries.clone())
                            }
                        }
                        .map_err(runtime)?;
                        (gcl, t.guard)
                    }
                    (None, Some((_, sched))) if is_cqf_bridge(from_name) => (
                        GateControlList::new(sched.base_time, sched.egress.clone())
                            .map_err(runtime)?,
                        GuardMode::Fit,
                    ),
                    _ => (GateControlList::always_open(), GuardMode::Fit),
                };
                let capacity = shaper
                    .and_then(|s| s.queue_capacity)
                    .unwrap_or(DEFAULT_QUEUE_CAPACITY);
                let etf = shaper.and_then(|s| s.etf).map(|e| {
                    let default = if e.offload {
                        DEFAULT_OFFLOAD_DELTA_NS
                    } else {
                        DEFAULT_SOFTWARE_DELTA_NS
                    };
                    EtfQueue::new(e.delta_ns.unwrap_or(default), e.offload)
                });
                port_of.insert((from, to), ports.len());
                ports.push(PortRt {
                    node: from,
                    peer_port: base + 1 - dir,
                    link,
                    taprio: TaprioPort::new(gcl, capacity, guard, l.rate_bps, l.overhead_bytes),
                    etf,
                    preemption: shaper.and_then(|s| s.preemption).unwrap_or_default(),
                    current: None,
                    suspended: None,
                    gen: 0,
                    kick_pending: false,
                    wake_at: None,
                    etf_at: None,
                    loss_rng: rng_fork(seed, &format!("link/{from_name}/{to_name}")),
                });
                port_info.push(PortInfo {
                    node: from_name.clone(),
                    peer: to_name.clone(),
                });
            }
        }

        // stream identification and gates
        let rules = make_stream_rules(cfg.filters.streams.iter().enumerate().map(|(i, s)| {
            (
                StreamPattern {
                    dest_mac: s.dest.as_deref().and_then(|d| cfg.resolve_mac(d)),
                    vlan_id: s.vlan_id,
                    pcp: s.pcp,
                },
                StreamHandle(i as u32),
            )
        }))
        .map_err(|e| HarnessError::invalid("filters.streams", e.to_string()))?;
        let stream_handle = |name: &str| {
            cfg.filters
                .streams
                .iter()
                .position(|s| s.name == name)
                .map(|i| StreamHandle(i as u32))
        };
        for n in nodes.iter_mut() {
            if let Some(b) = n.bridge.as_mut() {
                b.set_stream_rules(rules.clone());
                b.set_drop_unmatched(cfg.filters.drop_unmatched);
            }
        }
        for (i, g) in cfg.filters.gates.iter().enumerate() {
            let node = index[g.node.as_str()];
            let ingress = port_of[&(node, index[g.ingress.as_str()])];
            let gate = StreamGate::new(SimTime(g.base_time_ns), &g.entries)
                .map_err(|e| HarnessError::invalid(format!("filters.gates[{i}]"), e.to_string()))?;
            let handle = stream_handle(&g.stream).expect("validated");
            nodes[node]
                .bridge
                .as_mut()
                .expect("validated")
                .add_gate(ingress, handle, gate);
        }
        if let Some((c, sched)) = &cqf {
            let handles: Vec<StreamHandle> = if c.streams.is_empty() {
                (0..cfg.filters.streams.len() as u32)
                    .map(StreamHandle)
                    .collect()
            } else {
                c.streams.iter().filter_map(|s| stream_handle(s)).collect()
            };
            for b in &c.bridges {
                let node = index[b.as_str()];
                let ingress: Vec<PortId> = port_of
                    .iter()
                    .filter(|((from, _), _)| *from == node)
                    .map(|(_, &p)| p)
                    .collect();
                for &p in &ingress {
                    for &h in &handles {
                        let gate = StreamGate::new(sched.base_time, &sched.ingress)
                            .map_err(|e| HarnessError::invalid("cqf", e.to_string()))?;
                        nodes[node]
                            .bridge
                            .as_mut()
                            .expect("validated")
                            .add_gate(p, h, gate);
                    }
                }
            }
        }

        // static forwarding: label 0 follows shortest paths, replication
        // paths get labels 1.. in declaration order
        let mut diags = Vec::new();
        let install = |nodes: &mut [NodeRt],
                       path: &[usize],
                       dest: MacAddr,
                       label: u8,
                       field: &str,
                       diags: &mut Vec<Diagnostic>| {
            for w in path.windows(2) {
                let port = port_of[&(w[0], w[1])];
                match nodes[w[0]].fdb.lookup(dest, label) {
                    Some(p) if p != port => diags.push(Diagnostic::new(
                        field,
                        format!("conflicting routes at {:?}", nodes[w[0]].name),
                    )),
                    _ => nodes[w[0]].fdb.insert(dest, label, port),
                }
            }
        };
        let mut talkers = Vec::new();
        let mut next_label: u16 = 1;
        for (ti, t) in cfg.traffic.iter().enumerate() {
            let node = index[t.node.as_str()];
            let listener = index[t.listener.as_str()];
            let dest = nodes[listener].mac;
            let mut hop = t.node.clone();
            let mut path = vec![node];
            while hop != t.listener {
                let p = cfg.shortest_path(&hop, &t.listener).ok_or_else(|| {
                    HarnessError::invalid(format!("traffic[{ti}]"), "unreachable")
                })?;
                hop = p[1].clone();
                path.push(index[hop.as_str()]);
            }
            install(
                &mut nodes,
                &path,
                dest,
                0,
                &format!("traffic[{ti}]"),
                &mut diags,
            );

            let frer = cfg
                .frer
                .iter()
                .enumerate()
                .find(|(_, f)| f.talker == t.name);
            let mut labels = vec![0u8];
            let (mut seqgen, mut recovery) = (None, None);
            if let Some((fi, f)) = frer {
                labels.clear();
                for (pi, p) in f.paths.iter().enumerate() {
                    if next_label > u8::MAX as u16 {
                        return Err(HarnessError::invalid("frer", "more than 255 member paths"));
                    }
                    let label = next_label as u8;
                    next_label += 1;
                    let ids: Vec<usize> = p.iter().map(|n| index[n.as_str()]).collect();
                    install(
                        &mut nodes,
                        &ids,
                        dest,
                        label,
                        &format!("frer[{fi}].paths[{pi}]"),
                        &mut diags,
                    );
                    labels.push(label);
                }
                seqgen = Some(SequenceGenerator::new(StreamHandle(ti as u32)));
                recovery = Some(
                    RecoveryState::new(StreamHandle(ti as u32), f.window).map_err(|e| {
                        HarnessError::invalid(format!("frer[{fi}].window"), e.to_string())
                    })?,
                );
            }

            let count = cfg.talker_count(t);
            let label = |what: &str| format!("talker/{}/{what}", t.name);
            let mut rt = TalkerRt {
                cfg: t.clone(),
                node,
                listener,
                count,
                key: StreamKey {
                    dest_mac: dest,
                    vlan_id: t.vlan_id,
                    pcp: t.priority,
                },
                labels,
                seqgen,
                recovery,
                wake_rng: rng_fork(seed, &label("wake")),
                stack_rng: rng_fork(seed, &label("stack")),
                driver_rng: rng_fork(seed, &label("driver")),
                precision_rng: rng_fork(seed, &label("precision")),
                records: Vec::with_capacity(count as usize),
                timelines: vec![Timeline::default(); count as usize],
            };
            rt.records = (0..count)
                .map(|k| PacketRecord::new(k, rt.intended(k)))
                .collect();
            talkers.push(rt);
        }
        if !diags.is_empty() {
            return Err(HarnessError::ConfigInvalid(diags));
        }
        for n in nodes.iter_mut() {
            if let Some(b) = n.bridge.as_mut() {
                b.fdb = std::mem::take(&mut n.fdb);
            }
        }

        Ok(World {
            engine: Engine::new(),
            nodes,
            ports,
            port_info,
            talkers,
            drops: BTreeMap::new(),
            next_frame_id: 0,
            sync_pending: 0,
            opts,
            tx_log: Vec::new(),
            enqueue_log: Vec::new(),
            rx_log: Vec::new(),
        })
    }

    fn at(&mut self, t: SimTime, ev: Ev) -> Result<(), HarnessError> {
        self.engine.schedule(t, ev).map(|_| ()).map_err(runtime)
    }

    fn count_drop(&mut self, reason: &str) {
        *self.drops.entry(reason.to_string()).or_insert(0) += 1;
    }

    fn start(&mut self) -> Result<(), HarnessError> {
        for ti in 0..self.talkers.len() {
            let t = &mut self.talkers[ti];
            let jitter = t.cfg.wake_jitter.sample_latency(&mut t.wake_rng);
            let clock = &self.nodes[t.node].system;
            let wake = true_at(clock, t.wake_target(0), SimTime::ZERO) + jitter;
            self.at(wake, Ev::Wake { talker: ti, k: 0 })?;
        }
        for node in 0..self.nodes.len() {
            for phc in [false, true] {
                if let Some(iv) = self.clock(node, phc).sync_interval_ns {
                    self.at(SimTime(iv), Ev::Sync { node, phc })?;
                    self.sync_pending += 1;
                }
            }
        }
        Ok(())
    }

    fn clock(&self, node: usize, phc: bool) -> &ClockModel {
        let n = &self.nodes[node];
        if phc {
            &n.phc
        } else {
            &n.system
        }
    }

    fn handle(&mut self, now: SimTime, ev: Ev) -> Result<(), HarnessError> {
        match ev {
            Ev::Wake { talker, k } => {
                let t = &mut self.talkers[talker];
                t.timelines[k as usize].wake = Some(now);
                let stack = t.cfg.stack_latency.sample_latency(&mut t.stack_rng);
                self.at(now + stack, Ev::StackDone { talker, k })
            }
            Ev::StackDone { talker, k } => self.stack_done(now, talker, k),
            Ev::EtfRelease { port } => self.etf_release(now, port),
            Ev::MacEnqueue { port, frame } => {
                let p = &mut self.ports[port];
                let local = self.nodes[p.node].phc.read(now);
                if self.opts.record_logs {
                    self.enqueue_log.push(EnqueueEntry {
                        port,
                        frame_id: frame.id,
                        class: frame.traffic_class,
                        size_bytes: frame.size_bytes,
                        at: now,
                    });
                }
                if p.taprio.enqueue(*frame, local) == EnqueueOutcome::DroppedFull {
                    self.count_drop("queue_full");
                }
                self.request_kick(now, port)
            }
            Ev::PortWake { port } => {
                if self.ports[port].wake_at == Some(now) {
                    self.ports[port].wake_at = None;
                }
                self.request_kick(now, port)
            }
            Ev::Kick { port } => {
                self.ports[port].kick_pending = false;
                self.evaluate(now, port)
            }
            Ev::TxDone { port, gen } => self.tx_done(now, port, gen),
            Ev::Arrive {
                port,
                frame,
                rx_start,
            } => self.arrive(now, port, *frame, rx_start),
            Ev::Sync { node, phc } => {
                let n = &mut self.nodes[node];
                let (clock, rng) = if phc {
                    (&mut n.phc, &mut n.sync_rng[1])
                } else {
                    (&mut n.system, &mut n.sync_rng[0])
                };
                clock.apply_sync(now, rng);
                let interval = clock.sync_interval_ns.expect("sync scheduled");
                self.sync_pending -= 1;
                // keep synchronizing only while other work remains
                if self.engine.pending() > self.sync_pending {
                    self.at(now + interval, Ev::Sync { node, phc })?;
                    self.sync_pending += 1;
                }
                Ok(())
            }
        }
    }

    fn stack_done(&mut self, now: SimTime, ti: usize, k: u64) -> Result<(), HarnessError> {
        let id = self.next_frame_id;
        self.next_frame_id += 1;
        let t = &mut self.talkers[ti];
        let node = &self.nodes[t.node];
        t.records[k as usize].sw_tx = Some(node.system.read(now));
        t.timelines[k as usize].sw_tx = Some(now);

        let mut frame = Frame::new(id, t.cfg.frame_size_bytes, t.cfg.priority).with_stream(t.key);
        frame.talker = ti;
        frame.app_seq = k;
        frame.trace.intended_tx = t.intended(k);
        if t.cfg.mode == TalkerMode::Txtime {
            frame.txtime = Some(t.intended(k));
        }
        if let Some(g) = t.seqgen.as_mut() {
            g.stamp(&mut frame);
        }
        let copies = replicate(&frame, &t.labels).map_err(runtime)?;
        let mode = t.cfg.mode;
        let src = t.node;

        for copy in copies {
            let port = self.nodes[src]
                .fdb
                .lookup(t_dest(&copy), copy.path_label)
                .ok_or_else(|| {
                    runtime(format!(
                        "talker {ti} has no route for label {}",
                        copy.path_label
                    ))
                })?;
            match mode {
                TalkerMode::Sleep => {
                    let t = &mut self.talkers[ti];
                    let lat = t.cfg.driver_latency.sample_latency(&mut t.driver_rng);
                    self.at(
                        now + lat,
                        Ev::MacEnqueue {
                            port,
                            frame: Box::new(copy),
                        },
                    )?;
                }
                TalkerMode::Txtime => self.etf_enqueue(now, port, copy)?,
            }
        }

        if k + 1 < self.talkers[ti].count {
            let t = &mut self.talkers[ti];
            let jitter = t.cfg.wake_jitter.sample_latency(&mut t.wake_rng);
            let clock = &self.nodes[t.node].system;
            let wake = (clock.true_time_for(t.wake_target(k + 1)) + jitter).max(now);
            self.at(
                wake,
                Ev::Wake {
                    talker: ti,
                    k: k + 1,
                },
            )?;
        }
        Ok(())
    }

    fn etf_enqueue(
        &mut self,
        now: SimTime,
        port: PortId,
        frame: Frame,
    ) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        let local = self.nodes[p.node].system.read(now);
        let etf = p
            .etf
            .as_mut()
            .ok_or_else(|| runtime(format!("port {port} has no launch-time queue")))?;
        match etf.enqueue(frame, local).map_err(runtime)? {
            EtfEnqueue::Queued => self.schedule_etf(now, port),
            EtfEnqueue::DroppedPastTxtime => {
                self.count_drop("etf_past_txtime");
                Ok(())
            }
        }
    }

    fn schedule_etf(&mut self, now: SimTime, port: PortId) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        let Some(release) = p.etf.as_ref().and_then(EtfQueue::next_release) else {
            return Ok(());
        };
        let t = true_at(&self.nodes[p.node].system, release, now);
        if p.etf_at.is_none_or(|pending| t < pending) {
            p.etf_at = Some(t);
            self.at(t, Ev::EtfRelease { port })?;
        }
        Ok(())
    }

    fn etf_release(&mut self, now: SimTime, port: PortId) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        if p.etf_at == Some(now) {
            p.etf_at = None;
        }
        let node_ix = p.node;
        let etf = p.etf.as_mut().expect("release scheduled for an ETF port");
        let offload = etf.offload;
        let due = etf.pop_due(self.nodes[node_ix].system.read(now));
        for frame in due {
            let t = &mut self.talkers[frame.talker];
            let handoff = now + t.cfg.driver_latency.sample_latency(&mut t.driver_rng);
            let precision = if offload {
                t.cfg.hw_precision.sample(&mut t.precision_rng)
            } else {
                0
            };
            let txtime = frame.txtime.expect("ETF frames carry a txtime");
            let launch = launch_time(
                offload,
                txtime,
                &self.nodes[node_ix].phc,
                precision,
                handoff,
            );
            self.at(
                launch,
                Ev::MacEnqueue {
                    port,
                    frame: Box::new(frame),
                },
            )?;
        }
        self.schedule_etf(now, port)
    }

    fn request_kick(&mut self, now: SimTime, port: PortId) -> Result<(), HarnessError> {
        // deferred so that every arrival and completion at `now` that is
        // already scheduled is seen before the port selects
        if !self.ports[port].kick_pending {
            self.ports[port].kick_pending = true;
            self.at(now, Ev::Kick { port })?;
        }
        Ok(())
    }

    fn schedule_wake(
        &mut self,
        now: SimTime,
        port: PortId,
        local: SimTime,
    ) -> Result<(), HarnessError> {
        let p = &self.ports[port];
        let mut next = p.taprio.next_gate_change(local);
        if let Some(e) = p.taprio.next_expiry().filter(|&e| e > local) {
            next = next.min(e);
        }
        self.wake_at_local(now, port, next)
    }

    fn wake_at_local(
        &mut self,
        now: SimTime,
        port: PortId,
        local: SimTime,
    ) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        let t = true_at(&self.nodes[p.node].phc, local, now);
        if p.wake_at.is_none_or(|w| t < w) {
            p.wake_at = Some(t);
            self.at(t, Ev::PortWake { port })?;
        }
        Ok(())
    }

    fn evaluate(&mut self, now: SimTime, port: PortId) -> Result<(), HarnessError> {
        let local = self.nodes[self.ports[port].node].phc.read(now);
        self.ports[port].taprio.expire(local);
        if self.ports[port].current.is_some() {
            self.try_preempt(now, port, local)?;
        } else if self.ports[port].suspended.is_some() {
            let p = &mut self.ports[port];
            let mask = p.preemption.express_classes;
            match p.taprio.select_masked(local, mask) {
                Some(sel) => self.start_tx(now, port, sel.frame)?,
                None => {
                    let mut f = p.suspended.take().expect("checked");
                    let mut ptx = f.ptx.expect("suspended frames are preemptable");
                    ptx.segment_start = now;
                    f.ptx = Some(ptx);
                    f.seg_start = now;
                    p.current = Some(f);
                    p.gen += 1;
                    let gen = p.gen;
                    self.at(ptx.end(), Ev::TxDone { port, gen })?;
                }
            }
        } else {
            let p = &mut self.ports[port];
            match p.taprio.select(local) {
                Some(sel) => self.start_tx(now, port, sel.frame)?,
                None if p.taprio.total_queued() > 0 => self.schedule_wake(now, port, local)?,
                None => {}
            }
        }
        let oversize = self.ports[port].taprio.take_oversize_drops().len();
        if oversize > 0 {
            *self.drops.entry("oversize".into()).or_insert(0) += oversize as u64;
        }
        // oversize heads are dropped on time even while the link is busy
        if let Some(e) = self.ports[port].taprio.next_expiry() {
            self.wake_at_local(now, port, e)?;
        }
        Ok(())
    }

    fn start_tx(&mut self, at: SimTime, port: PortId, frame: Frame) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        let class = frame.traffic_class;
        let ptx =
            (p.preemption.enabled && !p.preemption.is_express(class)).then_some(PreemptableTx {
                size_bytes: frame.size_bytes,
                class,
                bytes_done: 0,
                segment_start: at,
                link_rate_bps: p.link.rate_bps,
                overhead_bytes: p.link.overhead_bytes,
            });
        let end = match &ptx {
            Some(x) => x.end(),
            None => {
                at + transmission_time(
                    frame.size_bytes as u64,
                    p.link.rate_bps,
                    p.link.overhead_bytes,
                )
                .map_err(runtime)?
            }
        };
        let t = &mut self.talkers[frame.talker];
        if p.node == t.node {
            let k = frame.app_seq as usize;
            if t.records[k].hw_tx.is_none() {
                t.records[k].hw_tx = Some(self.nodes[p.node].phc.read(at));
                t.timelines[k].hw_tx = Some(at);
            }
        }
        p.current = Some(InFlight {
            frame,
            first_start: at,
            seg_start: at,
            ptx,
        });
        p.gen += 1;
        let gen = p.gen;
        self.at(end, Ev::TxDone { port, gen })
    }

    fn try_preempt(
        &mut self,
        now: SimTime,
        port: PortId,
        local: SimTime,
    ) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        if !p.preemption.enabled {
            return Ok(());
        }
        let Some(ptx) = p.current.as_ref().and_then(|c| c.ptx) else {
            return Ok(());
        };
        let mask = p.preemption.express_classes;
        let Some((class, head)) = p.taprio.peek_eligible(local, mask) else {
            let waiting =
                (0..NUM_CLASSES as u8).any(|c| mask & (1 << c) != 0 && p.taprio.queue_len(c) > 0);
            if waiting {
                self.schedule_wake(now, port, local)?;
            }
            return Ok(());
        };
        let size = head.size_bytes;
        let Ok(plan) = preempt_transmit(&p.preemption, &ptx, size, now) else {
            return Ok(());
        };
        let Some(point) = plan.preempt else {
            return Ok(());
        };
        // the express frame must still fit its window at the cut
        let wire = transmission_time(size as u64, p.link.rate_bps, p.link.overhead_bytes)
            .map_err(runtime)?;
        let cut_local = self.nodes[p.node].phc.read(plan.express_start);
        let fits = match p.taprio.gcl().open_remaining(cut_local, class) {
            None => true,
            Some(0) => false,
            Some(left) => p.taprio.guard_mode() == GuardMode::None || wire <= left,
        };
        if !fits {
            return Ok(());
        }
        let express = p.taprio.pop_class(class).expect("peeked");
        let mut cur = p.current.take().expect("checked");
        if self.opts.record_logs {
            self.tx_log.push(segment(port, &cur, point.at, false));
        }
        cur.ptx = Some(PreemptableTx {
            bytes_done: point.bytes_sent,
            ..ptx
        });
        p.suspended = Some(cur);
        self.start_tx(plan.express_start, port, express)
    }

    fn tx_done(&mut self, now: SimTime, port: PortId, gen: u64) -> Result<(), HarnessError> {
        let p = &mut self.ports[port];
        if gen != p.gen {
            return Ok(());
        }
        let Some(done) = p.current.take() else {
            return Ok(());
        };
        if self.opts.record_logs {
            self.tx_log.push(segment(port, &done, now, true));
        }
        let lost = p.link.loss > 0.0 && p.loss_rng.random::<f64>() < p.link.loss;
        let (peer, prop) = (p.peer_port, p.link.propagation_ns);
        if lost {
            self.count_drop("link_loss");
        } else {
            self.at(
                now + prop,
                Ev::Arrive {
                    port: peer,
                    frame: Box::new(done.frame),
                    rx_start: done.first_start + prop,
                },
            )?;
        }
        self.request_kick(now, port)
    }

    fn arrive(
        &mut self,
        now: SimTime,
        port: PortId,
        mut frame: Frame,
        rx_start: SimTime,
    ) -> Result<(), HarnessError> {
        let node_ix = self.ports[port].node;
        let node = &mut self.nodes[node_ix];
        if let Some(bridge) = node.bridge.as_mut() {
            let gate_time = node.phc.read(now);
            return match bridge
                .forward(&mut frame, port, now, gate_time, &mut node.rng)
                .map_err(runtime)?
            {
                ForwardOutcome::Enqueue { egress_port, at } => self.at(
                    at,
                    Ev::MacEnqueue {
                        port: egress_port,
                        frame: Box::new(frame),
                    },
                ),
                ForwardOutcome::Dropped(d) => {
                    self.count_drop(drop_reason(d));
                    Ok(())
                }
            };
        }
        let t = &mut self.talkers[frame.talker];
        if t.listener != node_ix || t_dest(&frame) != node.mac {
            self.count_drop("misdelivered");
            return Ok(());
        }
        if self.opts.record_logs {
            self.rx_log.push(RxEntry {
                port,
                frame_id: frame.id,
                talker: frame.talker,
                app_seq: frame.app_seq,
                path_label: frame.path_label,
                seq: frame.seq,
                at: now,
            });
        }
        if let Some(rs) = t.recovery.as_mut() {
            match rs.recover(&frame).map_err(runtime)? {
                RecoveryOutcome::Accept => {}
                RecoveryOutcome::DiscardDuplicate => {
                    self.count_drop("frer_duplicate");
                    return Ok(());
                }
                RecoveryOutcome::DiscardStale => {
                    self.count_drop("frer_stale");
                    return Ok(());
                }
            }
        }
        let k = frame.app_seq as usize;
        let sw_true = rx_start + node.rx_latency.sample_latency(&mut node.rng);
        let rec = &mut t.records[k];
        rec.hw_rx = Some(node.phc.read(rx_start));
        rec.sw_rx = Some(node.system.read(sw_true));
        let tl = &mut t.timelines[k];
        tl.hw_rx = Some(rx_start);
        tl.rx_end = Some(now);
        tl.sw_rx = Some(sw_true);
        Ok(())
    }

    fn finish(self, cfg: &ScenarioConfig) -> RunResult {
        RunResult {
            scenario: cfg.name.clone(),
            description: cfg.description.clone(),
            seed: cfg.run.seed,
            histogram_bin_ns: cfg.histogram_bin(),
            streams: self
                .talkers
                .into_iter()
                .map(|t| StreamRun {
                    talker: t.cfg.name.clone(),
                    period_ns: t.cfg.period_ns,
                    records: t.records,
                    timelines: t.timelines,
                    frer: t.recovery.map(|r| r.counters),
                })
                .collect(),
            drops: self.drops,
            events_executed: self.engine.executed(),
            end_time: self.engine.now(),
            ports: self.port_info,
            tx_log: self.tx_log,
            enqueue_log: self.enqueue_log,
            rx_log: self.rx_log,
        }
    }
}

fn t_dest(frame: &Frame) -> MacAddr {
    frame.stream.map(|k| k.dest_mac).unwrap_or_default()
}

fn segment(port: PortId, f: &InFlight, end: SimTime, last: bool) -> TxSegment {
    TxSegment {
        port,
        frame_id: f.frame.id,
        talker: f.frame.talker,
        app_seq: f.frame.app_seq,
        class: f.frame.traffic_class,
        ipv: f.frame.ipv,
        size_bytes: f.frame.size_bytes,
        start: f.seg_start,
        end,
        last,
    }
}
