use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use tsnsim::egress::{
    preempt_transmit, EtfEnqueue, EtfQueue, GateControlList, GateEntry, PreemptableTx,
    PreemptionConfig,
};
use tsnsim::harness::{export_records, import_records, stats, PacketRecord};
use tsnsim::ingress::{PsfpDecision, StreamGate, StreamGateEntry, WindowId};
use tsnsim::redundancy::{RecoveryOutcome, RecoveryState};
use tsnsim::sim::{ClockModel, Engine, SimTime};
use tsnsim::traffic::{
    make_stream_rules, transmission_time, Frame, MacAddr, StreamHandle, StreamKey, StreamPattern,
};

const GBPS: u64 = 1_000_000_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identity_clock_reads_true_time(t in 0u64..u64::MAX / 4) {
        let c = ClockModel::identity();
        prop_assert_eq!(c.read(SimTime(t)), SimTime(t));
        prop_assert_eq!(c.true_time_for(SimTime(t)), SimTime(t));
    }

    #[test]
    fn drift_is_linear_between_syncs(
        ppb in -200_000i64..200_000,
        offset in -1_000_000i64..1_000_000,
        base in 0u64..1_000_000_000,
        a in 0u64..100_000_000_000,
        b in 0u64..100_000_000_000,
    ) {
        let c = ClockModel {
            offset_ns: offset,
            drift_ppb: ppb,
            last_sync_true_time: SimTime(base),
            ..ClockModel::identity()
        };
        let (t1, t2) = (base + a.min(b), base + a.max(b));
        let got = c.error_at(SimTime(t2)) - c.error_at(SimTime(t1));
        let want = ((t2 - t1) as i128 * ppb as i128) as f64 / 1e9;
        prop_assert!((got as f64 - want).abs() <= 1.0, "got {got} want {want}");
    }

    #[test]
    fn inverse_clock_is_earliest_reading(
        ppb in -200_000i64..200_000,
        offset in -1_000_000i64..1_000_000,
        r in 2_000_000u64..1_000_000_000_000,
    ) {
        let c = ClockModel { offset_ns: offset, drift_ppb: ppb, ..ClockModel::identity() };
        let t = c.true_time_for(SimTime(r));
        prop_assert!(c.read(t) >= SimTime(r));
        prop_assert!(t == SimTime::ZERO || c.read(SimTime(t.0 - 1)) < SimTime(r));
    }

    #[test]
    fn engine_fires_in_time_order(
        initial in prop::collection::vec(0u64..10_000, 1..60),
        follow in prop::collection::vec((0u64..500, 0usize..3), 0..60),
    ) {
        let mut eng: Engine<usize> = Engine::new();
        for (i, t) in initial.iter().enumerate() {
            eng.schedule(SimTime(*t), i).unwrap();
        }
        let mut fired: Vec<(SimTime, usize)> = Vec::new();
        let mut next_id = initial.len();
        let mut follow = follow.into_iter();
        while let Some((t, id)) = eng.pop_next() {
            fired.push((t, id));
            if let Some((dt, n)) = follow.next() {
                for _ in 0..n {
                    eng.schedule(t + dt, next_id).unwrap();
                    next_id += 1;
                }
            }
        }
        prop_assert_eq!(fired.len(), next_id);
        for w in fired.windows(2) {
            prop_assert!(w[0].0 <= w[1].0);
            // equal times keep scheduling order
            if w[0].0 == w[1].0 {
                prop_assert!(w[0].1 < w[1].1);
            }
        }
    }

    #[test]
    fn transmission_time_is_additive(
        a in 0u64..100_000,
        b in 0u64..100_000,
        rate in prop::sample::select(vec![10_000_000u64, 100_000_000, 1_000_000_000, 2_500_000_000, 10_000_000_000]),
    ) {
        let ab = transmission_time(a + b, rate, 0).unwrap() as i64;
        let sum = (transmission_time(a, rate, 0).unwrap() + transmission_time(b, rate, 0).unwrap()) as i64;
        prop_assert!((ab - sum).abs() <= 1);
    }

    #[test]
    fn stream_identification_is_pure(
        rules in prop::collection::vec((prop::option::of(0u32..4), prop::option::of(0u16..4), prop::option::of(0u8..8)), 0..8),
        keys in prop::collection::vec((0u32..4, 0u16..4, 0u8..8), 1..40),
    ) {
        let mut seen = BTreeSet::new();
        let pats: Vec<_> = rules
            .into_iter()
            .map(|(m, v, p)| StreamPattern { dest_mac: m.map(MacAddr::local), vlan_id: v, pcp: p })
            .filter(|p| !p.is_exact() || seen.insert((p.dest_mac, p.vlan_id, p.pcp)))
            .enumerate()
            .map(|(i, p)| (p, StreamHandle(i as u32)))
            .collect();
        let table = make_stream_rules(pats.clone()).unwrap();
        for (m, v, p) in keys {
            let key = StreamKey { dest_mac: MacAddr::local(m), vlan_id: v, pcp: p };
            let first = table.identify(Some(&key));
            prop_assert_eq!(first, table.identify(Some(&key)));
            let want = pats.iter().find(|(pat, _)| pat.matches(&key)).map(|(_, h)| *h);
            prop_assert_eq!(first, want);
        }
        prop_assert_eq!(table.identify(None), None);
    }

    #[test]
    fn gcl_covers_every_instant_once(
        durations in prop::collection::vec((1u64..5_000, any::<u8>()), 1..10),
        base in 0u64..1_000_000,
        probes in prop::collection::vec(0u64..10_000_000, 1..200),
    ) {
        let entries: Vec<_> = durations
            .iter()
            .map(|&(d, m)| GateEntry { gate_mask: m, duration_ns: d })
            .collect();
        let gcl = GateControlList::new(SimTime(base), entries.clone()).unwrap();
        let cycle = gcl.cycle_time_ns();
        for p in probes {
            let t = SimTime(base + p);
            let s = gcl.state(t).unwrap();
            let phase = p % cycle;
            let covering: Vec<usize> = (0..entries.len())
                .filter(|&i| {
                    let start = gcl.entry_start(i);
                    start <= phase && phase < start + entries[i].duration_ns
                })
                .collect();
            prop_assert_eq!(covering, vec![s.entry_index]);
            prop_assert_eq!(s.open_mask, entries[s.entry_index].gate_mask);
            prop_assert_eq!(s.cycle_index, p / cycle);
            prop_assert_eq!(
                s.time_to_next_change,
                gcl.entry_start(s.entry_index) + entries[s.entry_index].duration_ns - phase
            );
        }
        if base > 0 {
            prop_assert!(gcl.state(SimTime(base - 1)).is_err());
        }
    }

    #[test]
    fn etf_releases_in_txtime_order(
        txtimes in prop::collection::vec(0u64..1_000_000, 1..200),
        delta in 0u64..100_000,
        now in 0u64..200_000,
    ) {
        let mut q = EtfQueue::new(delta, true);
        let mut kept = Vec::new();
        for (id, tx) in txtimes.iter().enumerate() {
            let mut f = Frame::new(id as u64, 64, 0);
            f.txtime = Some(SimTime(*tx));
            let out = q.enqueue(f, SimTime(now)).unwrap();
            if *tx < now + delta {
                prop_assert_eq!(out, EtfEnqueue::DroppedPastTxtime);
            } else {
                prop_assert_eq!(out, EtfEnqueue::Queued);
                kept.push((*tx, id as u64));
            }
        }
        kept.sort_unstable();
        let mut got = Vec::new();
        while let Some(f) = q.pop() {
            got.push((f.txtime.unwrap().0, f.id));
        }
        prop_assert_eq!(got, kept);
    }

    #[test]
    fn preemption_conserves_bytes_and_bounds_express_delay(
        size in 128u32..1_600,
        express_bytes in 64u32..256,
        arrivals in prop::collection::vec(0u64..20_000, 1..6),
    ) {
        let rate = 100_000_000;
        let cfg = PreemptionConfig::express(&[7]);
        let mut arrivals = arrivals;
        arrivals.sort_unstable();
        let mut tx = PreemptableTx {
            size_bytes: size,
            class: 0,
            bytes_done: 0,
            segment_start: SimTime(0),
            link_rate_bps: rate,
            overhead_bytes: 0,
        };
        let mut fragments = Vec::new();
        let mut express_total = 0u64;
        for a in arrivals {
            let t = SimTime(a).max(tx.segment_start);
            if t >= tx.end() {
                break;
            }
            let plan = preempt_transmit(&cfg, &tx, express_bytes, t).unwrap();
            let Some(cut) = plan.preempt else { break };
            prop_assert!(cut.bytes_sent % 64 == 0);
            prop_assert!(size - cut.bytes_sent >= 64);
            // the express frame waits at most for one minimum fragment plus one byte short of it
            prop_assert!(plan.express_start - t <= transmission_time(127, rate, 0).unwrap());
            fragments.push(cut.bytes_sent - tx.bytes_done);
            let express_time = plan.express_end - plan.express_start;
            express_total += express_time;
            tx = PreemptableTx { bytes_done: cut.bytes_sent, segment_start: plan.express_end, ..tx };
        }
        fragments.push(size - tx.bytes_done);
        prop_assert_eq!(fragments.iter().sum::<u32>(), size);
        prop_assert!(fragments.iter().all(|&f| f >= 64));
        prop_assert_eq!(tx.end().0, transmission_time(size as u64, rate, 0).unwrap() + express_total);
    }

    #[test]
    fn stream_gate_respects_budget_and_leaves_bytes_alone(
        entries in prop::collection::vec((any::<bool>(), 100u64..5_000, prop::option::of(0u8..8), prop::option::of(64u64..3_000)), 1..6),
        frames in prop::collection::vec((1u64..2_000, 64u32..1_500), 1..200),
    ) {
        let entries: Vec<StreamGateEntry> = entries
            .into_iter()
            .map(|(open, duration_ns, ipv, max_octets)| StreamGateEntry { open, duration_ns, ipv, max_octets })
            .collect();
        let mut gate = StreamGate::new(SimTime(0), &entries).unwrap();
        let mut used: BTreeMap<WindowId, u64> = BTreeMap::new();
        let mut t = 0u64;
        for (i, (dt, size)) in frames.into_iter().enumerate() {
            t += dt;
            let key = StreamKey { dest_mac: MacAddr::local(1), vlan_id: 10, pcp: 3 };
            let mut frame = Frame::new(i as u64, size, 3).with_stream(key);
            let before = frame.wire_image();
            let w = gate.window_at(SimTime(t)).unwrap();
            let e = &entries[w.entry];
            let decision = gate.process(&mut frame, SimTime(t));
            prop_assert_eq!(frame.wire_image(), before);
            if !e.open {
                prop_assert_eq!(decision, PsfpDecision::DropClosedGate);
                continue;
            }
            if decision.passed() {
                let u = used.entry(w).or_default();
                *u += size as u64;
                if let Some(max) = e.max_octets {
                    prop_assert!(*u <= max);
                }
                prop_assert_eq!(decision, PsfpDecision::Pass(e.ipv));
                prop_assert_eq!(frame.ipv, e.ipv);
            } else {
                prop_assert_eq!(decision, PsfpDecision::DropOctetBudget);
                let u = used.get(&w).copied().unwrap_or(0);
                prop_assert!(u + size as u64 > e.max_octets.unwrap());
            }
        }
    }

    #[test]
    fn recovery_accepts_each_sequence_once(
        start in any::<u16>(),
        n in 1usize..2_000,
        losses in prop::collection::vec(0u8..3, 2_000),
        delays in prop::collection::vec(0u64..300, 2_000),
        skew in 0u64..300,
    ) {
        // loss is confined to one path at a time: 0 = none, 1 = path A, 2 = path B
        let mut arrivals = Vec::new();
        for i in 0..n {
            let seq = start.wrapping_add(i as u16);
            let base = i as u64 * 10;
            if losses[i] != 1 {
                arrivals.push((base + delays[i] % 10, 0u8, seq));
            }
            if losses[i] != 2 {
                arrivals.push((base + skew + delays[i], 1u8, seq));
            }
        }
        arrivals.sort_unstable();
        let mut rec = RecoveryState::new(StreamHandle(0), 64).unwrap();
        let mut accepted = Vec::new();
        for (_, _, seq) in &arrivals {
            if rec.recover_seq(*seq) == RecoveryOutcome::Accept {
                accepted.push(*seq);
            }
        }
        let mut want: Vec<u16> = (0..n).map(|i| start.wrapping_add(i as u16)).collect();
        let mut got = accepted.clone();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
        prop_assert_eq!(rec.counters.accepted, n as u64);
        prop_assert_eq!(rec.counters.duplicates + rec.counters.stale, (arrivals.len() - n) as u64);
        prop_assert_eq!(rec.counters.stale, 0);
    }

    #[test]
    fn offset_stats_are_ordered(offsets in prop::collection::vec(-1_000_000i64..1_000_000, 1..500)) {
        let s = stats(&offsets).unwrap();
        prop_assert!(s.min <= s.median && s.median <= s.max);
        prop_assert!(s.p80 <= s.max_abs);
        prop_assert_eq!(s.max_abs, s.min.abs().max(s.max.abs()));
        prop_assert!(s.mean >= s.min as f64 && s.mean <= s.max as f64);
        prop_assert_eq!(s.count, offsets.len() as u64);
        prop_assert_eq!(s.histogram.bins.iter().map(|b| b.count).sum::<u64>(), s.count);
    }

    #[test]
    fn records_survive_csv(rows in prop::collection::vec(
        (0u64..1_000_000_000_000, prop::option::of(0u64..1 << 50), prop::option::of(0u64..1 << 50), prop::option::of(0u64..1 << 50), prop::option::of(0u64..1 << 50)),
        0..50,
    )) {
        let records: Vec<PacketRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (it, a, b, c, d))| PacketRecord {
                seq: i as u64,
                intended_tx: SimTime(it),
                sw_tx: a.map(SimTime),
                hw_tx: b.map(SimTime),
                hw_rx: c.map(SimTime),
                sw_rx: d.map(SimTime),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        export_records(&records, &path).unwrap();
        prop_assert_eq!(import_records(&path).unwrap(), records);
    }
}

#[test]
fn gigabit_minimum_frame_takes_512_ns() {
    assert_eq!(transmission_time(64, GBPS, 0).unwrap(), 512);
}
