mod common;

use std::time::Duration;

use common::{brute_force, oracle_levels, plain_node, radio_link, tiny_scenario};
use resilient_embed::domain::{
    Area, BusinessProcess, NodeId, PhysicalNetwork, Position, Scenario, ServiceRequest, VirtualLink, VirtualNode,
    VnodeKind,
};
use resilient_embed::heuristic::{solve_heuristic, HeuristicConfig};
use resilient_embed::milp::{check_solution, compile, emit_lp, solve_exact, Limits, SolveError};
use resilient_embed::solution::SolutionStatus;
use resilient_embed::{ObjectiveWeights, Problem};

const TOL: f64 = 1e-6;

/// Three nodes 40 m apart with idle CPU power 1, 3 and 2 mW; one BP `s -> a` of 10 kb/s.
fn triangle(demand: f64) -> Scenario {
    let h = 40.0 * 3f64.sqrt() / 2.0;
    let mut nodes = vec![plain_node(0, 0.0), plain_node(1, 40.0), plain_node(2, 20.0)];
    nodes[2].position = Position { x: 20.0, y: h };
    for (n, idle) in nodes.iter_mut().zip([1.0, 3.0, 2.0]) {
        n.idle_cpu_power = idle;
    }
    let mut links = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        links.push(radio_link(a, b, 40.0));
        links.push(radio_link(b, a, 40.0));
    }
    let network = PhysicalNetwork::new(Area { width: 100.0, height: 100.0 }, 100.0, nodes, links);
    let vn = |id: &str, function: &str, kind| VirtualNode { id: id.into(), function: function.into(), zone: None, mcu: 1.0, ram: 0.25, kind };
    let bp = BusinessProcess {
        id: "bp0".into(),
        nodes: vec![vn("s", "sense", VnodeKind::Sensor), vn("a", "actuate", VnodeKind::Actuator)],
        links: vec![VirtualLink { from: "s".into(), to: "a".into(), demand }],
    };
    let mut s = Scenario::new(network, ServiceRequest { bps: vec![bp] });
    s.latency_table = Some(oracle_levels(10.0));
    s
}

fn problem(s: &Scenario, scheme: &str) -> Problem {
    Problem::new(s, scheme.parse().unwrap(), ObjectiveWeights::default()).unwrap()
}

// 5 mW on the two cheapest hosts, 2 idle radios + 10 * 0.508 mW on the direct link, and
// 30 * 1.024 / 240 s of queuing at the receiver.
const TRIANGLE_OPTIMUM: f64 = 140.08;

#[test]
fn triangle_single_path_matches_enumeration() {
    let s = triangle(10.0);
    let oracle = brute_force(&s, "CCNR".parse().unwrap(), ObjectiveWeights::default()).unwrap();
    assert!((oracle.objective - TRIANGLE_OPTIMUM).abs() < 1e-9);
    let p = problem(&s, "CCNR");
    let x = solve_exact(&p, &Limits::default()).unwrap();
    assert!((x.costs.objective - TRIANGLE_OPTIMUM).abs() < TOL, "{}", x.costs.objective);
    assert_eq!(x.status, SolutionStatus::Optimal);
    let hosts: Vec<NodeId> = x.assignment.values().copied().collect();
    assert!(hosts.contains(&NodeId(0)) && hosts.contains(&NodeId(2)), "{hosts:?}");
    assert_eq!(x.routes1.len(), 1);
    assert_eq!(x.routes1[0].edges.len(), 1);
}

#[test]
fn zero_demand_and_empty_requests() {
    let empty = Scenario { services: ServiceRequest { bps: vec![] }, ..triangle(10.0) };
    let x = solve_exact(&problem(&empty, "CCNR+RPTR"), &Limits::default()).unwrap();
    assert_eq!(x.costs.objective, 0.0);
    assert!(x.assignment.is_empty() && x.routes1.is_empty());

    // a placed request with no traffic pays only for processing
    let quiet = triangle(0.0);
    for scheme in ["CCNR", "CCNR+STR"] {
        let x = solve_exact(&problem(&quiet, scheme), &Limits::default()).unwrap();
        assert!(x.routes1.is_empty() && x.routes2.is_empty());
        assert_eq!(x.costs.tl, 0.0);
        assert_eq!(x.costs.tnp, 0.0);
        assert!((x.costs.objective - 5.0).abs() < TOL);
    }
}

#[test]
fn repeated_and_parallel_solves_agree() {
    for seed in 0..6 {
        let s = tiny_scenario(seed, 5, 3);
        let p = problem(&s, "CCNR+STR");
        let one = solve_exact(&p, &Limits::default());
        let again = solve_exact(&p, &Limits::default());
        let four = solve_exact(&p, &Limits { threads: 4, ..Limits::default() });
        assert_eq!(one, again, "seed {seed}");
        assert_eq!(one, four, "seed {seed}");
    }
}

#[test]
fn exact_outputs_pass_the_checker_and_beat_the_heuristic() {
    for seed in 0..8 {
        let s = tiny_scenario(200 + seed, 5, 3);
        for scheme in ["CCNR", "PRNR", "CCNR+RDTR", "CCNR+STR"] {
            let p = problem(&s, scheme);
            let Ok(x) = solve_exact(&p, &Limits::default()) else { continue };
            let report = check_solution(&p, &x);
            assert!(report.all_pass(), "seed {seed} {scheme}\n{report}");
            if let Ok(h) = solve_heuristic(&p, &HeuristicConfig::default()) {
                assert!(h.costs.objective >= x.costs.objective - TOL, "seed {seed} {scheme}");
            }
        }
    }
}

#[test]
fn disjoint_schemes_on_a_tree_name_disjointness() {
    let mut s = triangle(10.0);
    let kept: Vec<_> = s.network.links().iter().filter(|l| l.from.0 + l.to.0 != 1).cloned().collect();
    s.network = PhysicalNetwork::new(s.network.area, s.network.max_link_distance, s.network.nodes().to_vec(), kept);
    for scheme in ["CCNR+RDTR", "CCNR+RPTR", "CCNR+STR"] {
        match solve_exact(&problem(&s, scheme), &Limits::default()) {
            Err(SolveError::Infeasible(h)) => {
                assert!(h.iter().any(|h| h.to_string().contains("(27)")), "{scheme}: {h:?}")
            }
            other => panic!("{scheme}: expected infeasible, got {other:?}"),
        }
    }
    assert!(solve_exact(&problem(&s, "CCNR"), &Limits::default()).is_ok());
}

#[test]
fn limits_stop_the_search() {
    // no heuristic cutoff, so the node budget decides
    let zero_nodes = Limits { nodes: Some(0), cutoff: Some(f64::INFINITY), ..Limits::default() };
    let x = solve_exact(&problem(&tiny_scenario(0, 5, 3), "CCNR+STR"), &zero_nodes).unwrap();
    assert_eq!(x.status, SolutionStatus::LimitReached);
    let p = problem(&tiny_scenario(4, 5, 3), "PRNR+RPTR");
    assert_eq!(solve_exact(&p, &zero_nodes), Err(SolveError::LimitNoIncumbent));
    let no_time = Limits { time: Some(Duration::ZERO), cutoff: Some(f64::INFINITY), ..Limits::default() };
    match solve_exact(&p, &no_time) {
        Ok(x) => assert_eq!(x.status, SolutionStatus::LimitReached),
        Err(e) => assert_eq!(e, SolveError::LimitNoIncumbent),
    }
    assert_eq!(solve_exact(&p, &Limits::default()).unwrap().status, SolutionStatus::Optimal);
}

#[test]
fn lp_export_is_stable() {
    let s = triangle(10.0);
    for scheme in ["CCNR", "FRNR+STR"] {
        let p = problem(&s, scheme);
        let a = emit_lp(&compile(&p).unwrap().instance);
        let b = emit_lp(&compile(&p).unwrap().instance);
        assert_eq!(a, b);
        for section in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(a.contains(section), "{scheme}: {section}");
        }
        assert!(a.contains("\\ (5)"), "family tags as comments");
    }
}
