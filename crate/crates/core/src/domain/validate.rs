use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{PhysicalNetwork, Scenario, ServiceRequest};
use crate::cost_model::LatencyTable;

/// One invariant violation, located by a JSON-style path into the scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const DISTANCE_REL_TOL: f64 = 1e-9;

struct Report(Vec<Violation>);

impl Report {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { path: path.into(), message: message.into() });
    }
}

/// Checks every type invariant of a scenario. An empty result means the scenario is valid.
pub fn validate_scenario(scenario: &Scenario) -> Vec<Violation> {
    let mut report = Report(Vec::new());
    check_network(&scenario.network, &mut report);
    check_request(&scenario.services, &mut report);
    if let Some(levels) = &scenario.latency_table {
        if let Err(e) = LatencyTable::from_levels(levels.clone(), scenario.table_capacity()) {
            report.push("latency_table", e.to_string());
        }
    }
    report.0
}

fn check_network(net: &PhysicalNetwork, r: &mut Report) {
    let area = net.area;
    if !(area.width > 0.0 && area.height > 0.0) {
        r.push("network.area", "area dimensions must be positive");
    }
    if !(net.max_link_distance > 0.0) {
        r.push("network.max_link_distance", "must be positive");
    }
    for (i, node) in net.nodes().iter().enumerate() {
        let p = format!("network.nodes[{i}]");
        if node.id.index() != i {
            r.push(&p, format!("node id {} must equal its position {i}", node.id));
        }
        if !(node.mcu_capacity > 0.0) {
            r.push(&p, "mcu_capacity must be positive");
        }
        if !(node.ram_capacity > 0.0) {
            r.push(&p, "ram_capacity must be positive");
        }
        if !(node.traffic_capacity > 0.0) {
            r.push(&p, "traffic_capacity must be positive");
        }
        if !(node.idle_cpu_power <= node.max_cpu_power) {
            r.push(&p, "idle_cpu_power exceeds max_cpu_power");
        }
        if !(node.idle_cpu_power >= 0.0 && node.idle_net_power >= 0.0) {
            r.push(&p, "idle powers must be non-negative");
        }
        if !area.contains(node.position) {
            r.push(&p, "position lies outside the deployment area");
        }
    }
    let n = net.node_count();
    let mut seen = BTreeSet::new();
    for (i, link) in net.links().iter().enumerate() {
        let p = format!("network.links[{i}]");
        if link.from == link.to {
            r.push(&p, "self-loop link");
            continue;
        }
        if link.from.index() >= n || link.to.index() >= n {
            r.push(&p, "endpoint is not a node of the network");
            continue;
        }
        if !seen.insert(link.edge()) {
            r.push(&p, format!("duplicate link {}", link.edge()));
        }
        let reverse = net.link(link.edge().reversed());
        if let Some(rev) = reverse {
            if rev.distance != link.distance
                || rev.energy_per_bit != link.energy_per_bit
                || rev.amplifier_factor != link.amplifier_factor
            {
                r.push(&p, format!("orientations of {} disagree on distance or coefficients", link.edge()));
            }
            if link.from > link.to {
                // checked through the other orientation
                continue;
            }
        } else {
            r.push(&p, format!("reverse orientation of {} is missing", link.edge()));
        }
        if !(link.distance > 0.0) {
            r.push(&p, "distance must be positive");
        }
        if link.distance > net.max_link_distance {
            r.push(
                &p,
                format!(
                    "link {} distance {} m exceeds max_link_distance {} m",
                    link.edge(),
                    link.distance,
                    net.max_link_distance
                ),
            );
        }
        let a = net.nodes()[link.from.index()].position;
        let b = net.nodes()[link.to.index()].position;
        let euclid = a.distance(b);
        if (link.distance - euclid).abs() > DISTANCE_REL_TOL * euclid.max(link.distance).max(1.0) {
            r.push(&p, format!("distance {} differs from endpoint distance {euclid}", link.distance));
        }
        if !(link.energy_per_bit >= 0.0 && link.amplifier_factor >= 0.0) {
            r.push(&p, "energy coefficients must be non-negative");
        }
    }
}

fn check_request(req: &ServiceRequest, r: &mut Report) {
    let mut bp_ids = BTreeSet::new();
    for (i, bp) in req.bps.iter().enumerate() {
        let p = format!("services.bps[{i}]");
        if !bp_ids.insert(bp.id.as_str()) {
            r.push(&p, format!("duplicate business process id {}", bp.id));
        }
        let mut ids = BTreeSet::new();
        for (a, vn) in bp.nodes.iter().enumerate() {
            let vp = format!("{p}.nodes[{a}]");
            if !ids.insert(vn.id.as_str()) {
                r.push(&vp, format!("duplicate virtual node id {}", vn.id));
            }
            if !(vn.mcu >= 0.0) {
                r.push(&vp, "mcu demand must be non-negative");
            }
            if !(vn.ram >= 0.0) {
                r.push(&vp, "ram demand must be non-negative");
            }
        }
        for (l, vl) in bp.links.iter().enumerate() {
            let lp = format!("{p}.links[{l}]");
            for end in [&vl.from, &vl.to] {
                if !ids.contains(end.as_str()) {
                    r.push(&lp, format!("dangling reference to virtual node {end}"));
                }
            }
            if vl.from == vl.to {
                r.push(&lp, "virtual link endpoints must be distinct");
            }
            if !(vl.demand >= 0.0) {
                r.push(&lp, "traffic demand must be non-negative");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    fn two_node() -> Scenario {
        let mk = |id: u32, x: f64| IoTNode {
            id: NodeId(id),
            position: Position { x, y: 10.0 },
            zone: "z0".into(),
            functions: ["sense".to_string(), "process".to_string()].into_iter().collect(),
            mcu_capacity: 8.0,
            ram_capacity: 2.0,
            idle_cpu_power: 1.0,
            max_cpu_power: 8.0,
            idle_net_power: 1.0,
            traffic_capacity: 250.0,
        };
        let nodes = vec![mk(0, 10.0), mk(1, 60.0)];
        let links = [(0, 1), (1, 0)]
            .into_iter()
            .map(|(a, b)| IoTLink {
                from: NodeId(a),
                to: NodeId(b),
                distance: 50.0,
                energy_per_bit: 0.05,
                amplifier_factor: 2.55e-4,
            })
            .collect();
        let net = PhysicalNetwork::new(Area { width: 200.0, height: 200.0 }, 100.0, nodes, links);
        let bp = BusinessProcess {
            id: "bp0".into(),
            nodes: vec![
                VirtualNode { id: "s".into(), function: "sense".into(), zone: Some("z0".into()), mcu: 1.0, ram: 0.1, kind: VnodeKind::Sensor },
                VirtualNode { id: "c".into(), function: "process".into(), zone: None, mcu: 2.0, ram: 0.2, kind: VnodeKind::Controller },
            ],
            links: vec![VirtualLink { from: "s".into(), to: "c".into(), demand: 10.0 }],
        };
        Scenario::new(net, ServiceRequest { bps: vec![bp] })
    }

    fn rebuild(sc: &Scenario, f: impl FnOnce(&mut Vec<IoTNode>, &mut Vec<IoTLink>)) -> Scenario {
        let mut nodes = sc.network.nodes().to_vec();
        let mut links = sc.network.links().to_vec();
        f(&mut nodes, &mut links);
        let net = PhysicalNetwork::new(sc.network.area, sc.network.max_link_distance, nodes, links);
        Scenario { network: net, ..sc.clone() }
    }

    #[test]
    fn well_formed_is_empty() {
        assert_eq!(validate_scenario(&two_node()), vec![]);
    }

    #[test]
    fn overlong_link_is_named() {
        let sc = rebuild(&two_node(), |nodes, links| {
            nodes[1].position.x = 160.0;
            links[0].distance = 150.0;
            links[1].distance = 150.0;
        });
        let report = validate_scenario(&sc);
        let over: Vec<_> = report.iter().filter(|v| v.message.contains("exceeds max_link_distance")).collect();
        assert_eq!(report.len(), 1, "{report:?}");
        assert_eq!(over.len(), 1);
        assert_eq!(over[0].path, "network.links[0]");
        assert!(over[0].message.contains("0->1"));
    }

    #[test]
    fn dangling_vlink() {
        let mut sc = two_node();
        sc.services.bps[0].links[0].to = "ghost".into();
        let report = validate_scenario(&sc);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("dangling"));
        assert_eq!(report[0].path, "services.bps[0].links[0]");
    }

    #[test]
    fn every_single_injection_is_reported() {
        type Inject = fn(&Scenario) -> Scenario;
        let injections: Vec<(&str, Inject)> = vec![
            ("zero mcu", |s| rebuild(s, |n, _| n[0].mcu_capacity = 0.0)),
            ("zero ram", |s| rebuild(s, |n, _| n[1].ram_capacity = 0.0)),
            ("zero traffic cap", |s| rebuild(s, |n, _| n[0].traffic_capacity = -1.0)),
            ("idle > max", |s| rebuild(s, |n, _| n[0].idle_cpu_power = 9.0)),
            ("outside area", |s| rebuild(s, |n, _| n[0].position.y = -1.0)),
            ("bad distance", |s| rebuild(s, |_, l| l[0].distance = 51.0)),
            ("missing reverse", |s| rebuild(s, |_, l| { l.pop(); })),
            ("self loop", |s| rebuild(s, |_, l| l[0].to = NodeId(0))),
            ("id mismatch", |s| rebuild(s, |n, _| n[1].id = NodeId(5))),
            ("negative vnode mcu", |s| { let mut s = s.clone(); s.services.bps[0].nodes[0].mcu = -1.0; s }),
            ("negative demand", |s| { let mut s = s.clone(); s.services.bps[0].links[0].demand = -1.0; s }),
            ("vlink loop", |s| { let mut s = s.clone(); s.services.bps[0].links[0].to = "s".into(); s }),
            ("dup vnode", |s| { let mut s = s.clone(); s.services.bps[0].nodes[1].id = "s".into(); s }),
            ("bad table", |s| { let mut s = s.clone(); s.latency_table = Some(vec![]); s }),
        ];
        let base = two_node();
        for (name, inject) in injections {
            assert!(!validate_scenario(&inject(&base)).is_empty(), "{name} not reported");
        }
    }
}
