//! Small hand-built fixtures for unit tests.

use crate::cost_model::build_latency_table;
use crate::domain::{
    Area, BusinessProcess, IoTLink, IoTNode, NodeId, PhysicalNetwork, Position, ServiceRequest, VirtualLink,
    VirtualNode, VnodeKind,
};
use crate::solution::Problem;
use crate::{ObjectiveWeights, SchemeSpec};

pub const ALL_FUNCTIONS: [&str; 3] = ["sense", "process", "actuate"];

pub fn node(id: u32, x: f64, y: f64, functions: &[&str]) -> IoTNode {
    IoTNode {
        id: NodeId(id),
        position: Position { x, y },
        zone: "z0".into(),
        functions: functions.iter().map(|s| s.to_string()).collect(),
        mcu_capacity: 8.0,
        ram_capacity: 2.0,
        idle_cpu_power: 1.0,
        max_cpu_power: 8.0,
        idle_net_power: 1.0,
        traffic_capacity: 250.0,
    }
}

/// Both directions of every listed pair, with geometric distances.
pub fn network(nodes: Vec<IoTNode>, pairs: &[(u32, u32)]) -> PhysicalNetwork {
    let mut links = Vec::new();
    for &(a, b) in pairs {
        let d = nodes[a as usize].position.distance(nodes[b as usize].position);
        for (f, t) in [(a, b), (b, a)] {
            links.push(IoTLink { from: NodeId(f), to: NodeId(t), distance: d, energy_per_bit: 0.05, amplifier_factor: 2.55e-4 });
        }
    }
    PhysicalNetwork::new(Area { width: 200.0, height: 200.0 }, 100.0, nodes, links)
}

/// Triangle 0-1-2 with 40 m sides, every node offering every function.
pub fn triangle() -> PhysicalNetwork {
    let h = 40.0 * 3f64.sqrt() / 2.0;
    network(
        vec![node(0, 0.0, 0.0, &ALL_FUNCTIONS), node(1, 40.0, 0.0, &ALL_FUNCTIONS), node(2, 20.0, h, &ALL_FUNCTIONS)],
        &[(0, 1), (1, 2), (0, 2)],
    )
}

/// Virtual nodes named by id, function inferred from the first letter (s, c, a).
pub fn bp(id: &str, vnodes: &[&str], links: &[(&str, &str, f64)]) -> BusinessProcess {
    let nodes = vnodes
        .iter()
        .map(|v| {
            let (function, kind) = match &v[..1] {
                "s" => ("sense", VnodeKind::Sensor),
                "a" => ("actuate", VnodeKind::Actuator),
                _ => ("process", VnodeKind::Controller),
            };
            VirtualNode { id: v.to_string(), function: function.into(), zone: None, mcu: 1.0, ram: 0.25, kind }
        })
        .collect();
    let links = links
        .iter()
        .map(|&(f, t, demand)| VirtualLink { from: f.into(), to: t.into(), demand })
        .collect();
    BusinessProcess { id: id.into(), nodes, links }
}

pub fn problem(network: PhysicalNetwork, bps: Vec<BusinessProcess>, scheme: &str) -> Problem {
    let scheme: SchemeSpec = scheme.parse().expect("valid scheme");
    let table = build_latency_table(250.0, 128.0, 10.0).expect("valid table");
    Problem::from_parts(network, &ServiceRequest { bps }, scheme, ObjectiveWeights::default(), table)
}
