//! Delivery evaluation on a hand-priced triangle: the direct path costs 10 mW per delivery,
//! the detour 12 mW, and radios draw nothing when idle.

use std::collections::BTreeMap;

use resilient_embed::domain::{
    Area, BusinessProcess, Edge, IoTLink, IoTNode, NodeId, PhysicalNetwork, Position, Scenario, ServiceRequest,
    VirtualLink, VirtualNode, VnodeKey, VnodeKind,
};
use resilient_embed::resilience::{evaluate_failure, evaluate_no_failure, pdr_crossover, pdr_sweep, SimContext};
use resilient_embed::solution::assemble;
use resilient_embed::{EmbeddingSolution, ObjectiveWeights, Problem, SchemeSpec, TrafficMode};

const E_A: f64 = 10.0;
const E_B: f64 = 12.0;
const TOL: f64 = 1e-9;

fn node(id: u32, x: f64, y: f64) -> IoTNode {
    IoTNode {
        id: NodeId(id),
        position: Position { x, y },
        zone: "z0".into(),
        functions: ["sense".to_string(), "actuate".to_string()].into_iter().collect(),
        mcu_capacity: 8.0,
        ram_capacity: 2.0,
        idle_cpu_power: 1.0,
        max_cpu_power: 8.0,
        idle_net_power: 0.0,
        traffic_capacity: 250.0,
    }
}

/// mW per kb/s `2 * energy_per_bit` with no amplifier term.
fn link(from: u32, to: u32, per_kbps: f64) -> IoTLink {
    IoTLink { from: NodeId(from), to: NodeId(to), distance: 30.0, energy_per_bit: per_kbps / 2.0, amplifier_factor: 0.0 }
}

fn e(a: u32, b: u32) -> Edge {
    Edge(NodeId(a), NodeId(b))
}

/// Demand 10 kb/s from node 0 to node 1, primary direct (1.0 per kb/s), secondary through
/// node 2 (0.6 per kb/s per hop).
fn fixture(scheme: &str, keep_alive: f64) -> (Problem, EmbeddingSolution) {
    let nodes = vec![node(0, 0.0, 0.0), node(1, 30.0, 0.0), node(2, 15.0, 20.0)];
    let mut links = Vec::new();
    for (a, b, c) in [(0, 1, 1.0), (0, 2, 0.6), (2, 1, 0.6)] {
        links.push(link(a, b, c));
        links.push(link(b, a, c));
    }
    let network = PhysicalNetwork::new(Area { width: 50.0, height: 50.0 }, 50.0, nodes, links);
    let vn = |id: &str, function: &str, kind| VirtualNode { id: id.into(), function: function.into(), zone: None, mcu: 1.0, ram: 0.25, kind };
    let bp = BusinessProcess {
        id: "bp0".into(),
        nodes: vec![vn("s", "sense", VnodeKind::Sensor), vn("a", "actuate", VnodeKind::Actuator)],
        links: vec![VirtualLink { from: "s".into(), to: "a".into(), demand: 10.0 }],
    };
    let scenario = Scenario::new(network, ServiceRequest { bps: vec![bp] });
    let scheme: SchemeSpec = scheme.parse().unwrap();
    let scheme = scheme.with_keep_alive(keep_alive).unwrap();
    let p = Problem::new(&scenario, scheme, ObjectiveWeights::default()).unwrap();
    let asg: BTreeMap<_, _> = [(VnodeKey::new("bp0", "s"), NodeId(0)), (VnodeKey::new("bp0", "a"), NodeId(1))].into_iter().collect();
    let pair = (NodeId(0), NodeId(1));
    let p1 = [(pair, vec![e(0, 1)])].into_iter().collect();
    let p2 = if scheme.traffic_mode.is_dual() { [(pair, vec![e(0, 2), e(2, 1)])].into_iter().collect() } else { BTreeMap::new() };
    let s = assemble(&p, asg, &p1, &p2).unwrap();
    (p, s)
}

fn ctx(p: &Problem) -> SimContext<'_> {
    SimContext { network: &p.network, table: &p.table, keep_alive_fraction: p.scheme.keep_alive_fraction }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn no_failure_energies() {
    for (mode, ka, want) in [
        ("SINGLE", 0.01, E_A),
        ("RDTR", 0.01, E_A + 0.01 * E_B),
        ("RDTR", 0.0, E_A),
        ("RPTR", 0.01, E_A + E_B),
        ("STR", 0.01, 0.5 * E_A + 0.5 * E_B),
    ] {
        let (p, s) = fixture(&format!("CCNR+{mode}"), ka);
        let got = evaluate_no_failure(&ctx(&p), &s, p.scheme.traffic_mode).unwrap().energy;
        assert!(close(got, want), "{mode} ka={ka}: {got} vs {want}");
    }
}

#[test]
fn primary_failure_at_start_of_transfer() {
    let fail = |mode: &str| {
        let (p, s) = fixture(&format!("CCNR+{mode}"), 0.0);
        evaluate_failure(&ctx(&p), &s, p.scheme.traffic_mode, e(0, 1), 0.0).unwrap().energy
    };
    // STR: both halves sent, the failed half resent on the detour
    assert!(close(fail("STR"), 0.5 * E_A + 0.5 * E_B + 0.5 * E_B));
    assert!(close(fail("STR"), 17.0));
    // RPTR keeps both replicas going, so the failure changes nothing
    assert!(close(fail("RPTR"), 22.0));
    // RDTR: the attempt on A is spent, then everything goes over B
    assert!(close(fail("RDTR"), E_A + E_B));
    let (p, s) = fixture("CCNR+RPTR", 0.0);
    let rptr_rest = evaluate_no_failure(&ctx(&p), &s, TrafficMode::Rptr).unwrap().energy;
    assert!(close(fail("RDTR"), rptr_rest));
    assert!(fail("STR") < fail("RDTR"));
}

#[test]
fn keep_alive_stays_on_the_backup_during_failover() {
    let (p, s) = fixture("CCNR+RDTR", 0.01);
    let got = evaluate_failure(&ctx(&p), &s, TrafficMode::Rdtr, e(0, 1), 0.25).unwrap().energy;
    assert!(close(got, E_A + (0.75 + 0.01) * E_B), "{got}");
}

#[test]
fn secondary_failure_under_splitting_resends_on_the_primary() {
    let (p, s) = fixture("CCNR+STR", 0.0);
    let got = evaluate_failure(&ctx(&p), &s, TrafficMode::Str, e(2, 1), 0.0).unwrap().energy;
    assert!(close(got, 0.5 * E_A + 0.5 * E_B + 0.5 * E_A), "{got}");
}

#[test]
fn late_failure_equals_no_failure_in_every_mode() {
    for mode in ["SINGLE", "RDTR", "RPTR", "STR"] {
        let (p, s) = fixture(&format!("CCNR+{mode}"), 0.01);
        let m = p.scheme.traffic_mode;
        let rest = evaluate_no_failure(&ctx(&p), &s, m).unwrap();
        let late = evaluate_failure(&ctx(&p), &s, m, e(0, 1), 1.0).unwrap();
        assert!(close(rest.energy, late.energy), "{mode}");
        assert_eq!(rest.delivered_fraction, late.delivered_fraction);
    }
}

#[test]
fn failure_off_the_routes_changes_nothing() {
    for mode in ["SINGLE", "RDTR", "RPTR", "STR"] {
        let (p, s) = fixture(&format!("CCNR+{mode}"), 0.01);
        let m = p.scheme.traffic_mode;
        let rest = evaluate_no_failure(&ctx(&p), &s, m).unwrap();
        // reverse direction of the direct link carries nothing
        let off = evaluate_failure(&ctx(&p), &s, m, e(1, 0), 0.0).unwrap();
        assert_eq!(rest, off, "{mode}");
    }
}

#[test]
fn pdr_sweep_rows() {
    let (p, s) = fixture("CCNR+RDTR", 0.01);
    let rows = pdr_sweep(&ctx(&p), &s, &[0.5, 1.0]).unwrap();
    // RDTR: E_A + (q + ka) E_B; STR: (1 + q)(E_A + E_B) / 2, q = 1 - p
    assert!(close(rows[1].e_rdtr, E_A + 0.01 * E_B));
    assert!(close(rows[1].e_str, 0.5 * (E_A + E_B)));
    assert!(close(rows[0].e_rdtr, E_A + 0.51 * E_B));
    assert!(close(rows[0].e_str, 1.5 * 0.5 * (E_A + E_B)));
    let rest = evaluate_no_failure(&ctx(&p), &s, TrafficMode::Rdtr).unwrap().energy;
    assert!(close(rows[1].e_rdtr, rest));
}

#[test]
fn crossover_matches_hand_solution() {
    let (p, s) = fixture("CCNR+RDTR", 0.01);
    // E_A + (q + ka) E_B = (1 + q)(E_A + E_B) / 2  =>  p = 2 ka E_B / (E_B - E_A)
    let want = 2.0 * 0.01 * E_B / (E_B - E_A);
    let got = pdr_crossover(&ctx(&p), &s).unwrap().unwrap();
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}
