use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkError, PortId};
use crate::ingress::{PsfpDecision, StreamGate};
use crate::sim::{JitterDist, SimTime};
use crate::traffic::{Frame, MacAddr, StreamHandle, StreamRules};

/// Software switching implementations with shipped latency defaults.
///
/// The defaults only encode an ordering of medians
/// (xdp <= af_xdp <= linux_bridge) with equal worst cases for af_xdp and
/// linux_bridge; they are editable starting points, not measurements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardingPreset {
    #[default]
    LinuxBridge,
    Xdp,
    AfXdp,
    Custom,
}

impl ForwardingPreset {
    pub fn default_latency(self) -> JitterDist {
        match self {
            ForwardingPreset::Xdp => JitterDist::normal(1_500.0, 250.0, Some(500)),
            ForwardingPreset::AfXdp => JitterDist::normal(3_000.0, 1_000.0, Some(1_000)),
            ForwardingPreset::LinuxBridge => JitterDist::normal(4_000.0, 750.0, Some(1_000)),
            ForwardingPreset::Custom => JitterDist::ZERO,
        }
    }
}

/// Static forwarding table keyed by destination and routing label.
#[derive(Debug, Clone, Default)]
pub struct ForwardingTable {
    entries: BTreeMap<(MacAddr, u8), PortId>,
}

impl ForwardingTable {
    pub fn insert(&mut self, dest: MacAddr, label: u8, port: PortId) {
        self.entries.insert((dest, label), port);
    }

    pub fn lookup(&self, dest: MacAddr, label: u8) -> Option<PortId> {
        self.entries.get(&(dest, label)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardOutcome {
    Enqueue {
        egress_port: PortId,
        /// True time the frame reaches the egress queue.
        at: SimTime,
    },
    Dropped(PsfpDecision),
}

/// Store-and-forward bridge: ingress PSFP, static lookup, forwarding latency.
#[derive(Debug, Clone)]
pub struct BridgeNode {
    pub name: String,
    pub preset: ForwardingPreset,
    pub forwarding_latency: JitterDist,
    pub fdb: ForwardingTable,
    rules: StreamRules,
    gates: BTreeMap<(PortId, StreamHandle), StreamGate>,
    psfp_ports: BTreeSet<PortId>,
    drop_unmatched: bool,
}

impl BridgeNode {
    pub fn new(
        name: impl Into<String>,
        preset: ForwardingPreset,
        latency: Option<JitterDist>,
    ) -> Self {
        BridgeNode {
            name: name.into(),
            preset,
            forwarding_latency: latency.unwrap_or_else(|| preset.default_latency()),
            fdb: ForwardingTable::default(),
            rules: StreamRules::default(),
            gates: BTreeMap::new(),
            psfp_ports: BTreeSet::new(),
            drop_unmatched: false,
        }
    }

    pub fn set_stream_rules(&mut self, rules: StreamRules) {
        self.rules = rules;
    }

    pub fn set_drop_unmatched(&mut self, drop: bool) {
        self.drop_unmatched = drop;
    }

    pub fn add_gate(&mut self, ingress: PortId, stream: StreamHandle, gate: StreamGate) {
        self.psfp_ports.insert(ingress);
        self.gates.insert((ingress, stream), gate);
    }

    pub fn gate(&self, ingress: PortId, stream: StreamHandle) -> Option<&StreamGate> {
        self.gates.get(&(ingress, stream))
    }

    pub fn has_gate(&self, ingress: PortId, stream: StreamHandle) -> bool {
        self.gates.contains_key(&(ingress, stream))
    }

    /// Apply ingress policing to a fully received frame.
    /// `gate_time` is the bridge clock reading at the reception instant.
    pub fn police(
        &mut self,
        frame: &mut Frame,
        ingress: PortId,
        gate_time: SimTime,
    ) -> PsfpDecision {
        if !self.psfp_ports.contains(&ingress) {
            return PsfpDecision::Pass(None);
        }
        let handle = self.rules.identify(frame.stream.as_ref());
        match handle.and_then(|h| self.gates.get_mut(&(ingress, h))) {
            Some(gate) => gate.process(frame, gate_time),
            None if self.drop_unmatched => PsfpDecision::DropNoStream,
            None => PsfpDecision::Pass(None),
        }
    }

    /// Forward a frame whose last bit arrived on `ingress` at true time `t`.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        frame: &mut Frame,
        ingress: PortId,
        t: SimTime,
        gate_time: SimTime,
        rng: &mut R,
    ) -> Result<ForwardOutcome, NetworkError> {
        let decision = self.police(frame, ingress, gate_time);
        if !decision.passed() {
            return Ok(ForwardOutcome::Dropped(decision));
        }
        let dest = frame.stream.map(|k| k.dest_mac).unwrap_or_default();
        let egress_port =
            self.fdb
                .lookup(dest, frame.path_label)
                .ok_or(NetworkError::UnknownEgress {
                    bridge: self.name.clone(),
                    dest,
                    label: frame.path_label,
                })?;
        frame.traffic_class = frame.egress_class();
        let latency = self.forwarding_latency.sample_latency(rng);
        Ok(ForwardOutcome::Enqueue {
            egress_port,
            at: t + latency,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingress::StreamGateEntry;
    use crate::sim::rng_fork;
    use crate::traffic::{make_stream_rules, StreamKey, StreamPattern};

    fn key() -> StreamKey {
        StreamKey {
            dest_mac: MacAddr::local(9),
            vlan_id: 0,
            pcp: 2,
        }
    }

    fn bridge(latency: JitterDist) -> BridgeNode {
        let mut b = BridgeNode::new("br0", ForwardingPreset::Custom, Some(latency));
        b.fdb.insert(MacAddr::local(9), 0, 4);
        b
    }

    #[test]
    fn zero_latency_open_gate() {
        let mut b = bridge(JitterDist::ZERO);
        let mut f = Frame::new(1, 64, 2).with_stream(key());
        let mut rng = rng_fork(0, "b");
        let out = b
            .forward(&mut f, 1, SimTime(1_000), SimTime(1_000), &mut rng)
            .unwrap();
        assert_eq!(
            out,
            ForwardOutcome::Enqueue {
                egress_port: 4,
                at: SimTime(1_000)
            }
        );
    }

    #[test]
    fn constant_latency() {
        let mut b = bridge(JitterDist::constant(2_000));
        let mut f = Frame::new(1, 64, 2).with_stream(key());
        let mut rng = rng_fork(0, "b");
        let out = b
            .forward(&mut f, 1, SimTime(1_000), SimTime(1_000), &mut rng)
            .unwrap();
        assert_eq!(
            out,
            ForwardOutcome::Enqueue {
                egress_port: 4,
                at: SimTime(3_000)
            }
        );
    }

    #[test]
    fn closed_psfp_gate_drops() {
        let mut b = bridge(JitterDist::ZERO);
        b.set_stream_rules(
            make_stream_rules([(StreamPattern::exact(key()), StreamHandle(0))]).unwrap(),
        );
        let gate = StreamGate::new(
            SimTime(0),
            &[StreamGateEntry {
                open: false,
                duration_ns: 1_000,
                ipv: None,
                max_octets: None,
            }],
        )
        .unwrap();
        b.add_gate(1, StreamHandle(0), gate);
        let mut f = Frame::new(1, 64, 2).with_stream(key());
        let mut rng = rng_fork(0, "b");
        assert_eq!(
            b.forward(&mut f, 1, SimTime(10), SimTime(10), &mut rng)
                .unwrap(),
            ForwardOutcome::Dropped(PsfpDecision::DropClosedGate)
        );
    }

    #[test]
    fn ipv_drives_egress_class() {
        let mut b = bridge(JitterDist::ZERO);
        b.set_stream_rules(
            make_stream_rules([(StreamPattern::exact(key()), StreamHandle(0))]).unwrap(),
        );
        let gate = StreamGate::new(
            SimTime(0),
            &[StreamGateEntry {
                open: true,
                duration_ns: 1_000,
                ipv: Some(5),
                max_octets: None,
            }],
        )
        .unwrap();
        b.add_gate(1, StreamHandle(0), gate);
        let mut f = Frame::new(1, 64, 2).with_stream(key());
        let mut rng = rng_fork(0, "b");
        b.forward(&mut f, 1, SimTime(10), SimTime(10), &mut rng)
            .unwrap();
        assert_eq!(f.traffic_class, 5);
        assert_eq!(f.priority, 2);
    }

    #[test]
    fn unmatched_on_policed_port() {
        let mut b = bridge(JitterDist::ZERO);
        b.add_gate(1, StreamHandle(0), StreamGate::always_open());
        let mut f = Frame::new(1, 64, 2).with_stream(key());
        let mut rng = rng_fork(0, "b");
        assert!(matches!(
            b.forward(&mut f, 1, SimTime(10), SimTime(10), &mut rng),
            Ok(ForwardOutcome::Enqueue { .. })
        ));
        b.set_drop_unmatched(true);
        assert_eq!(
            b.forward(&mut f, 1, SimTime(10), SimTime(10), &mut rng)
                .unwrap(),
            ForwardOutcome::Dropped(PsfpDecision::DropNoStream)
        );
    }

    #[test]
    fn unknown_egress() {
        let mut b = bridge(JitterDist::ZERO);
        let mut f = Frame::new(1, 64, 2).with_stream(StreamKey {
            dest_mac: MacAddr::local(77),
            ..key()
        });
        let mut rng = rng_fork(0, "b");
        assert!(matches!(
            b.forward(&mut f, 1, SimTime(10), SimTime(10), &mut rng),
            Err(NetworkError::UnknownEgress { .. })
        ));
    }

    #[test]
    fn preset_medians_are_ordered() {
        fn median(d: &JitterDist) -> i64 {
            let mut rng = rng_fork(1, "m");
            let mut xs: Vec<i64> = (0..20_001).map(|_| d.sample(&mut rng)).collect();
            xs.sort_unstable();
            xs[xs.len() / 2]
        }
        let xdp = median(&ForwardingPreset::Xdp.default_latency());
        let af = median(&ForwardingPreset::AfXdp.default_latency());
        let lb = median(&ForwardingPreset::LinuxBridge.default_latency());
        assert!(xdp <= af && af <= lb, "{xdp} {af} {lb}");
        assert_eq!(
            ForwardingPreset::AfXdp.default_latency().upper_bound(),
            ForwardingPreset::LinuxBridge
                .default_latency()
                .upper_bound()
        );
        for p in [
            ForwardingPreset::Xdp,
            ForwardingPreset::AfXdp,
            ForwardingPreset::LinuxBridge,
        ] {
            assert!(p.default_latency().lower_bound() >= 0);
        }
    }
}
