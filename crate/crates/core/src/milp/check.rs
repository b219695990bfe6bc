//! Independent verification of an embedding, family by family, computed from the
//! solution itself rather than from any compiled model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::instance::Family;
use crate::domain::{NodeId, VnodeKey};
use crate::solution::{self, EmbeddingSolution, Pair, Problem, Route};

const TOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyCheck {
    /// Constraint family numbers covered, empty for the cost recomputation.
    pub families: Vec<u8>,
    pub label: String,
    pub status: Status,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<FamilyCheck>,
}

impl CheckReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failed(&self) -> Vec<&FamilyCheck> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }

    /// Status of the check covering `family`.
    pub fn status(&self, family: Family) -> Option<Status> {
        self.checks.iter().find(|c| c.families.contains(&family.number())).map(|c| c.status)
    }

    pub fn costs_status(&self) -> Option<Status> {
        self.checks.iter().find(|c| c.families.is_empty()).map(|c| c.status)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let s = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::NotApplicable => "N/A ",
            };
            writeln!(f, "{s} {}", c.label)?;
            for v in &c.violations {
                writeln!(f, "     {v}")?;
            }
        }
        Ok(())
    }
}

struct Builder(Vec<FamilyCheck>);

impl Builder {
    fn push(&mut self, fams: &[Family], violations: Vec<String>) {
        let label = fams
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join("-")
            + " "
            + fams[0].describe();
        let status = if violations.is_empty() { Status::Pass } else { Status::Fail };
        self.0.push(FamilyCheck { families: fams.iter().map(|f| f.number()).collect(), label, status, violations });
    }

    fn skip(&mut self, fams: &[Family]) {
        self.push(fams, Vec::new());
        self.0.last_mut().expect("just pushed").status = Status::NotApplicable;
    }
}

fn chain_errors(problem: &Problem, r: &Route) -> Option<String> {
    if r.nodes().is_none() {
        return Some(format!("route {}->{} is not a chain from source to destination", r.source, r.dest));
    }
    r.edges
        .iter()
        .find(|e| !problem.network.has_edge(**e))
        .map(|e| format!("route {}->{} uses missing link {e}", r.source, r.dest))
}

fn traffic_mismatch(stored: &BTreeMap<crate::domain::Edge, f64>, expected: &BTreeMap<crate::domain::Edge, f64>) -> Vec<String> {
    let keys: BTreeSet<_> = stored.keys().chain(expected.keys()).collect();
    keys.into_iter()
        .filter_map(|e| {
            let s = stored.get(e).copied().unwrap_or(0.0);
            let x = expected.get(e).copied().unwrap_or(0.0);
            (!close(s, x)).then(|| format!("link {e}: stored {s} kb/s, routes give {x} kb/s"))
        })
        .collect()
}

fn route_layer(
    b: &mut Builder,
    problem: &Problem,
    routes: &[Route],
    expected: &BTreeMap<Pair, f64>,
    conservation: Family,
    nosplit: Family,
) {
    let share = problem.scheme.traffic_mode.path_share();
    let mut v = Vec::new();
    let mut seen = BTreeSet::new();
    for r in routes {
        if !seen.insert(r.pair()) {
            v.push(format!("commodity {}->{} routed twice", r.source, r.dest));
        }
        if let Some(err) = chain_errors(problem, r) {
            v.push(err);
        }
        match expected.get(&r.pair()) {
            Some(&d) if !close(r.flow, share * d) => v.push(format!(
                "commodity {}->{} carries {} kb/s, expected {} of demand {d}",
                r.source, r.dest, r.flow, share
            )),
            None => v.push(format!("route for {}->{} which carries no demand", r.source, r.dest)),
            _ => {}
        }
    }
    for p in expected.keys() {
        if !seen.contains(p) {
            v.push(format!("commodity {}->{} has no route", p.0, p.1));
        }
    }
    b.push(&[conservation], v);
    let split: Vec<String> = routes
        .iter()
        .filter(|r| r.nodes().is_some() && !r.is_simple())
        .map(|r| format!("route {}->{} revisits a node", r.source, r.dest))
        .collect();
    b.push(&[nosplit], split);
}

/// Evaluates every constraint family on `solution` for `problem`.
pub fn check_solution(problem: &Problem, solution: &EmbeddingSolution) -> CheckReport {
    let mut b = Builder(Vec::new());
    let net = &problem.network;
    let keys: BTreeSet<VnodeKey> = problem.vnode_keys().into_iter().collect();
    let asg = &solution.assignment;

    let mut v = Vec::new();
    if solution.scheme.node_level != problem.scheme.node_level || solution.scheme.traffic_mode != problem.scheme.traffic_mode {
        v.push(format!("solution scheme {} differs from requested {}", solution.scheme, problem.scheme));
    }
    for k in &keys {
        match asg.get(k) {
            None => v.push(format!("{k} is not embedded")),
            Some(n) if net.node(*n).is_none() => v.push(format!("{k} embedded in unknown node {n}")),
            _ => {}
        }
    }
    for k in asg.keys().filter(|k| !keys.contains(*k)) {
        v.push(format!("{k} is not a virtual node of the request"));
    }
    b.push(&[Family::Assignment], v);

    let placed: Vec<(&VnodeKey, &crate::domain::VirtualNode, &crate::domain::IoTNode)> = asg
        .iter()
        .filter_map(|(k, n)| Some((k, problem.vnode(k)?, net.node(*n)?)))
        .collect();

    if problem.scheme.coexistence {
        let mut by: BTreeMap<(&str, NodeId), Vec<&str>> = BTreeMap::new();
        for (k, _, n) in &placed {
            by.entry((k.bp.as_str(), n.id)).or_default().push(k.vnode.as_str());
        }
        let v = by
            .into_iter()
            .filter(|(_, vs)| vs.len() > 1)
            .map(|((bp, n), vs)| format!("node {n} hosts {} of {bp}", vs.join(", ")))
            .collect();
        b.push(&[Family::Coexistence], v);
    } else {
        b.skip(&[Family::Coexistence]);
    }

    let mut mcu: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut ram: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (_, vn, n) in &placed {
        *mcu.entry(n.id).or_insert(0.0) += vn.mcu;
        *ram.entry(n.id).or_insert(0.0) += vn.ram;
    }
    let over = |load: &BTreeMap<NodeId, f64>, cap: fn(&crate::domain::IoTNode) -> f64, unit: &str| -> Vec<String> {
        load.iter()
            .filter_map(|(&n, &l)| {
                let c = cap(net.node(n)?);
                (l > c * (1.0 + 1e-12)).then(|| format!("node {n} load {l} {unit} exceeds {c} {unit}"))
            })
            .collect()
    };
    b.push(&[Family::McuCapacity], over(&mcu, |n| n.mcu_capacity, "MHz"));
    b.push(&[Family::RamCapacity], over(&ram, |n| n.ram_capacity, "kB"));
    b.push(
        &[Family::FunctionLink, Family::FunctionAvailable],
        placed
            .iter()
            .filter(|(_, vn, n)| !n.provides(&vn.function))
            .map(|(k, vn, n)| format!("{k} needs {:?} which node {} lacks", vn.function, n.id))
            .collect(),
    );
    b.push(
        &[Family::ZoneLink, Family::ZoneAvailable],
        placed
            .iter()
            .filter(|(_, vn, n)| vn.zone.as_ref().is_some_and(|z| *z != n.zone))
            .map(|(k, vn, n)| format!("{k} needs zone {:?}, node {} is in {:?}", vn.zone.as_deref().unwrap_or(""), n.id, n.zone))
            .collect(),
    );

    let expected: BTreeMap<Pair, f64> =
        problem.commodity_demands(asg).into_iter().filter(|&(_, d)| d > 0.0).collect();
    let mut v = Vec::new();
    let routed: BTreeSet<Pair> = solution.routes1.iter().map(|r| r.pair()).collect();
    for p in expected.keys().filter(|p| !routed.contains(*p)) {
        v.push(format!("pair {}->{} has demand {} but no route", p.0, p.1, expected[p]));
    }
    for p in routed.iter().filter(|p| !expected.contains_key(*p)) {
        v.push(format!("pair {}->{} is routed but the assignment gives it no demand", p.0, p.1));
    }
    b.push(&[Family::PairDemand], v);

    let mode = problem.scheme.traffic_mode;
    let split = mode.path_share() < 1.0;
    let (c1, c2) = if split {
        (Family::SplitPrimaryConservation, Family::SplitSecondaryConservation)
    } else {
        (Family::PrimaryConservation, Family::SecondaryConservation)
    };
    route_layer(&mut b, problem, &solution.routes1, &expected, c1, Family::PrimaryNoSplit);
    if mode.is_dual() {
        route_layer(&mut b, problem, &solution.routes2, &expected, c2, Family::SecondaryNoSplit);
        let mut v = Vec::new();
        for r1 in &solution.routes1 {
            if let Some(r2) = solution.route2(r1.pair()) {
                let e1: BTreeSet<_> = r1.edges.iter().collect();
                for e in r2.edges.iter().filter(|e| e1.contains(e)) {
                    v.push(format!("commodity {}->{} uses link {e} on both paths", r1.source, r1.dest));
                }
            }
        }
        b.push(&[Family::Disjointness], v);
    } else {
        let v = solution
            .routes2
            .iter()
            .map(|r| format!("secondary route {}->{} under single-path routing", r.source, r.dest))
            .collect();
        b.push(&[Family::SecondaryConservation], v);
        b.skip(&[Family::SecondaryNoSplit]);
        b.skip(&[Family::Disjointness]);
    }

    b.push(&[Family::PrimaryLinkTraffic], traffic_mismatch(&solution.link_traffic1, &solution::link_traffic(&solution.routes1)));
    b.push(&[Family::SecondaryLinkTraffic], traffic_mismatch(&solution.link_traffic2, &solution::link_traffic(&solution.routes2)));

    let arrivals = solution::node_arrivals(net, &solution.link_traffic1, &solution.link_traffic2);
    let nodes: BTreeSet<NodeId> = arrivals.keys().chain(solution.node_arrivals.keys()).copied().collect();
    let v = nodes
        .iter()
        .filter_map(|n| {
            let s = solution.node_arrivals.get(n).copied().unwrap_or(0.0);
            let x = arrivals.get(n).copied().unwrap_or(0.0);
            (!close(s, x)).then(|| format!("node {n}: stored arrival {s} kb/s, links give {x} kb/s"))
        })
        .collect();
    b.push(&[Family::Arrival], v);
    let v = arrivals
        .iter()
        .filter_map(|(&n, &a)| {
            let cap = net.node(n)?.traffic_capacity;
            (a > cap + TOL).then(|| format!("node {n} arrival {a} kb/s exceeds capacity {cap} kb/s"))
        })
        .collect();
    b.push(&[Family::NodeCapacity], v);

    let mut v = Vec::new();
    let mut tl = 0.0;
    for (&n, &a) in &arrivals {
        match problem.table.node_latency(a) {
            Ok(w) => tl += w,
            Err(e) => v.push(format!("node {n}: {e}")),
        }
    }
    if v.is_empty() && !close(tl, solution.costs.tl) {
        v.push(format!("stored latency {} ms, levels give {tl} ms", solution.costs.tl));
    }
    b.push(&[Family::ArrivalLevel, Family::OneLevel, Family::NodeLatency], v);

    let mut v = Vec::new();
    match solution::price(problem, solution) {
        Ok(c) => {
            for (name, stored, fresh) in [
                ("TPP", solution.costs.tpp, c.tpp),
                ("TNP", solution.costs.tnp, c.tnp),
                ("objective", solution.costs.objective, c.objective),
            ] {
                if !close(stored, fresh) {
                    v.push(format!("stored {name} {stored}, recomputed {fresh}"));
                }
            }
        }
        Err(e) => v.push(e.to_string()),
    }
    let status = if v.is_empty() { Status::Pass } else { Status::Fail };
    b.0.push(FamilyCheck { families: Vec::new(), label: "costs recomputed from assignment and routes".into(), status, violations: v });
    CheckReport { checks: b.0 }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::domain::{Edge, NodeId, VnodeKey};
    use crate::solution::{assemble, Pair};
    use crate::testkit::{bp, problem, triangle};

    fn e(a: u32, b: u32) -> Edge {
        Edge(NodeId(a), NodeId(b))
    }

    fn dual(scheme: &str) -> (Problem, EmbeddingSolution) {
        let p = problem(triangle(), vec![bp("bp0", &["s", "a"], &[("s", "a", 10.0)])], scheme);
        let asg = [(VnodeKey::new("bp0", "s"), NodeId(0)), (VnodeKey::new("bp0", "a"), NodeId(1))].into_iter().collect();
        let pair: Pair = (NodeId(0), NodeId(1));
        let p1: BTreeMap<_, _> = [(pair, vec![e(0, 1)])].into_iter().collect();
        let p2: BTreeMap<_, _> = [(pair, vec![e(0, 2), e(2, 1)])].into_iter().collect();
        let s = assemble(&p, asg, &p1, &p2).unwrap();
        (p, s)
    }

    #[test]
    fn assembled_solutions_pass() {
        for scheme in ["CCNR+RDTR", "CCNR+RPTR", "CCNR+STR"] {
            let (p, s) = dual(scheme);
            let r = check_solution(&p, &s);
            assert!(r.all_pass(), "{scheme}\n{r}");
            assert_eq!(r.costs_status(), Some(Status::Pass));
        }
    }

    #[test]
    fn shared_link_fails_disjointness_naming_it() {
        let (p, mut s) = dual("CCNR+RDTR");
        s.routes2[0].edges = s.routes1[0].edges.clone();
        let r = check_solution(&p, &s);
        assert_eq!(r.status(Family::Disjointness), Some(Status::Fail));
        let check = r.checks.iter().find(|c| c.families.contains(&27)).unwrap();
        assert!(check.violations.iter().any(|v| v.contains("0->1")), "{:?}", check.violations);
    }

    #[test]
    fn wrong_split_share_fails_split_conservation() {
        let (p, mut s) = dual("CCNR+STR");
        s.routes1[0].flow = 7.0;
        s.routes2[0].flow = 3.0;
        let r = check_solution(&p, &s);
        assert_eq!(r.status(Family::SplitPrimaryConservation), Some(Status::Fail));
        assert_eq!(r.status(Family::SplitSecondaryConservation), Some(Status::Fail));
    }

    #[test]
    fn single_path_marks_secondary_checks_not_applicable() {
        let p = problem(triangle(), vec![bp("bp0", &["s", "a"], &[("s", "a", 10.0)])], "CCNR");
        let asg = [(VnodeKey::new("bp0", "s"), NodeId(0)), (VnodeKey::new("bp0", "a"), NodeId(1))].into_iter().collect();
        let p1: BTreeMap<_, _> = [((NodeId(0), NodeId(1)), vec![e(0, 1)])].into_iter().collect();
        let s = assemble(&p, asg, &p1, &BTreeMap::new()).unwrap();
        let r = check_solution(&p, &s);
        assert!(r.all_pass(), "{r}");
        assert_eq!(r.status(Family::Disjointness), Some(Status::NotApplicable));
    }

    #[test]
    fn stale_costs_fail_the_recomputation() {
        let (p, mut s) = dual("CCNR+RPTR");
        s.costs.objective += 1.0;
        let r = check_solution(&p, &s);
        assert_eq!(r.costs_status(), Some(Status::Fail));
        assert_eq!(r.failed().len(), 1);
    }
}
