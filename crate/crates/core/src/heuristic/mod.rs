//! Fast embedding for instances beyond exact reach.
//!
//! [`embed_greedy`] places virtual nodes by descending MCU demand on the node with the
//! smallest processing-power increase, then routes commodities one by one with
//! [`route_paths`] under an edge cost that mirrors the objective at the current load.
//! [`local_search`] then tries single relocations and path swaps, keeping only strict
//! improvements.

mod baseline;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use baseline::elru_baseline;

use crate::cost_model::link_power_per_kbps;
use crate::domain::{Edge, NodeId, PhysicalNetwork, VnodeKey};
use crate::graph::{self, dijkstra, disjoint_pair, disjoint_path_count, edge_disjoint, k_shortest_paths, node_disjoint};
use crate::solution::{assemble, EmbeddingSolution, Pair, Problem};

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicConfig {
    pub k_candidate_paths: usize,
    pub local_search_budget: usize,
    /// Orders local-search moves.
    pub seed: u64,
    /// Require secondary paths to avoid the primary's intermediate nodes too.
    pub node_disjoint: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { k_candidate_paths: 4, local_search_budget: 200, seed: 0, node_disjoint: false }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeuristicError {
    #[error("no feasible node for {0} (function, zone, capacity or coexistence)")]
    NoFeasibleNode(VnodeKey),
    #[error("no node for {0} is joined to its placed neighbours by two link-disjoint paths")]
    NoDisjointHost(VnodeKey),
    #[error("{}->{}: {error}", .pair.0, .pair.1)]
    Routing { pair: Pair, error: RouteError },
    #[error("k must be at least 2 for dual-path schemes")]
    BadConfig,
    #[error("{0}")]
    Assemble(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RouteError {
    #[error("source equals destination")]
    SameEndpoints,
    #[error("no usable path")]
    Disconnected,
    #[error("no link-disjoint pair of paths")]
    NoDisjointPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteMode {
    Single,
    DualDisjoint,
}

/// Primary path, and for dual mode a disjoint secondary, minimizing
/// `primary_cost(A) + secondary_cost(B)` over pairs drawn from the `k` cheapest paths and
/// the min-sum disjoint pair.
pub fn route_paths(
    net: &PhysicalNetwork,
    source: NodeId,
    dest: NodeId,
    mode: RouteMode,
    primary_cost: &impl Fn(Edge) -> Option<f64>,
    secondary_cost: &impl Fn(Edge) -> Option<f64>,
    k: usize,
    node_disjoint_only: bool,
) -> Result<(Vec<Edge>, Option<Vec<Edge>>), RouteError> {
    if source == dest {
        return Err(RouteError::SameEndpoints);
    }
    if mode == RouteMode::Single {
        let (_, p) = dijkstra(net, source, dest, primary_cost).ok_or(RouteError::Disconnected)?;
        return Ok((p, None));
    }
    let mut cands: Vec<Vec<Edge>> = k_shortest_paths(net, source, dest, k.max(2), primary_cost)
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    for (_, p) in k_shortest_paths(net, source, dest, k.max(2), secondary_cost) {
        if !cands.contains(&p) {
            cands.push(p);
        }
    }
    let both = |e: Edge| Some(primary_cost(e)?.max(secondary_cost(e)?));
    if let Some((a, b)) = disjoint_pair(net, source, dest, &both) {
        for p in [a, b] {
            if !cands.contains(&p) {
                cands.push(p);
            }
        }
    }
    let mut best: Option<(f64, Vec<Edge>, Vec<Edge>)> = None;
    for a in &cands {
        let Some(ca) = graph::path_cost(a, primary_cost) else { continue };
        for b in &cands {
            if a == b || !edge_disjoint(a, b) || (node_disjoint_only && !node_disjoint(a, b)) {
                continue;
            }
            let Some(cb) = graph::path_cost(b, secondary_cost) else { continue };
            let total = ca + cb;
            let better = match &best {
                None => true,
                Some((t, ba, bb)) => total < t - 1e-12 || ((total - t).abs() <= 1e-12 && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((total, a.clone(), b.clone()));
            }
        }
    }
    best.map(|(_, a, b)| (a, Some(b))).ok_or(RouteError::NoDisjointPair)
}

/// Link loads and active radios while commodities are routed one at a time.
struct Loads<'p> {
    problem: &'p Problem,
    arrivals: BTreeMap<NodeId, f64>,
    active: BTreeSet<NodeId>,
}

impl<'p> Loads<'p> {
    fn new(problem: &'p Problem) -> Self {
        Loads { problem, arrivals: BTreeMap::new(), active: BTreeSet::new() }
    }

    /// Objective increase from sending `flow` over `e` with power scale `scale`.
    fn edge_cost(&self, e: Edge, flow: f64, scale: f64) -> Option<f64> {
        let p = self.problem;
        let link = p.network.link(e)?;
        let head = p.network.node(e.1)?;
        let before = self.arrivals.get(&e.1).copied().unwrap_or(0.0);
        let after = before + flow;
        if after > head.traffic_capacity {
            return None;
        }
        let dw = p.table.node_latency(after).ok()? - p.table.node_latency(before).ok()?;
        let mut idle = 0.0;
        for n in [e.0, e.1] {
            if !self.active.contains(&n) {
                idle += p.network.node(n)?.idle_net_power;
            }
        }
        Some(p.weights.gamma * (scale * flow * link_power_per_kbps(link) + idle) + p.weights.alpha * dw)
    }

    fn add(&mut self, path: &[Edge], flow: f64) {
        for e in path {
            *self.arrivals.entry(e.1).or_insert(0.0) += flow;
            self.active.insert(e.0);
            self.active.insert(e.1);
        }
    }
}

type Paths = BTreeMap<Pair, Vec<Edge>>;

/// Routes every commodity of `assignment`, largest demand first.
fn route_all(problem: &Problem, assignment: &BTreeMap<VnodeKey, NodeId>, config: &HeuristicConfig) -> Result<(Paths, Paths), HeuristicError> {
    let mode = problem.scheme.traffic_mode;
    let share = mode.path_share();
    let scale2 = problem.scheme.secondary_power_scale();
    let mut order: Vec<(Pair, f64)> = problem.commodity_demands(assignment).into_iter().filter(|&(_, d)| d > 0.0).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut loads = Loads::new(problem);
    let mut p1 = Paths::new();
    let mut p2 = Paths::new();
    let rmode = if mode.is_dual() { RouteMode::DualDisjoint } else { RouteMode::Single };
    for (pair, demand) in order {
        let flow = share * demand;
        let c1 = |e: Edge| loads.edge_cost(e, flow, 1.0);
        let c2 = |e: Edge| loads.edge_cost(e, flow, scale2);
        let (a, b) = route_paths(&problem.network, pair.0, pair.1, rmode, &c1, &c2, config.k_candidate_paths, config.node_disjoint)
            .map_err(|error| HeuristicError::Routing { pair, error })?;
        loads.add(&a, flow);
        p1.insert(pair, a);
        if let Some(b) = b {
            loads.add(&b, flow);
            p2.insert(pair, b);
        }
    }
    Ok((p1, p2))
}

fn build(problem: &Problem, assignment: BTreeMap<VnodeKey, NodeId>, config: &HeuristicConfig) -> Result<EmbeddingSolution, HeuristicError> {
    let (p1, p2) = route_all(problem, &assignment, config)?;
    assemble(problem, assignment, &p1, &p2).map_err(|e| HeuristicError::Assemble(e.to_string()))
}

/// Hosts still able to take `key` given everything else in `assignment`.
fn open_hosts(problem: &Problem, assignment: &BTreeMap<VnodeKey, NodeId>, key: &VnodeKey) -> Vec<NodeId> {
    let Some(vn) = problem.vnode(key) else { return Vec::new() };
    let mut mcu: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut ram: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut same_bp = BTreeSet::new();
    for (k, &n) in assignment {
        if k == key {
            continue;
        }
        if let Some(v) = problem.vnode(k) {
            *mcu.entry(n).or_insert(0.0) += v.mcu;
            *ram.entry(n).or_insert(0.0) += v.ram;
        }
        if k.bp == key.bp {
            same_bp.insert(n);
        }
    }
    problem
        .hosts(vn)
        .into_iter()
        .filter(|n| {
            let node = problem.network.node(*n).expect("hosts are network nodes");
            mcu.get(n).copied().unwrap_or(0.0) + vn.mcu <= node.mcu_capacity * (1.0 + 1e-12)
                && ram.get(n).copied().unwrap_or(0.0) + vn.ram <= node.ram_capacity * (1.0 + 1e-12)
                && !(problem.scheme.coexistence && same_bp.contains(n))
        })
        .collect()
}

/// Placed BP neighbours of `key` with the direction and demand of each virtual link.
fn placed_neighbours(problem: &Problem, assignment: &BTreeMap<VnodeKey, NodeId>, key: &VnodeKey) -> Vec<(NodeId, bool, f64)> {
    let Some(bp) = problem.request.bps.iter().find(|b| b.id == key.bp) else { return Vec::new() };
    let mut out = Vec::new();
    for vl in &bp.links {
        let (other, outgoing) = if vl.from == key.vnode {
            (&vl.to, true)
        } else if vl.to == key.vnode {
            (&vl.from, false)
        } else {
            continue;
        };
        if let Some(&n) = assignment.get(&VnodeKey::new(&bp.id, other)) {
            out.push((n, outgoing, vl.demand));
        }
    }
    out
}

/// Candidate hosts of the not yet placed virtual neighbours of `key` joined to it by a
/// link with positive demand, with the link direction seen from `key`.
fn unplaced_neighbours(problem: &Problem, assignment: &BTreeMap<VnodeKey, NodeId>, key: &VnodeKey) -> Vec<(Vec<NodeId>, bool)> {
    let Some(bp) = problem.request.bps.iter().find(|b| b.id == key.bp) else { return Vec::new() };
    let mut out = Vec::new();
    for vl in bp.links.iter().filter(|vl| vl.demand > 0.0) {
        let (other, outgoing) = if vl.from == key.vnode {
            (&vl.to, true)
        } else if vl.to == key.vnode {
            (&vl.from, false)
        } else {
            continue;
        };
        let other_key = VnodeKey::new(&bp.id, other);
        if !assignment.contains_key(&other_key) {
            if let Some(vn) = problem.vnode(&other_key) {
                out.push((problem.hosts(vn), outgoing));
            }
        }
    }
    out
}

fn place(problem: &Problem) -> Result<BTreeMap<VnodeKey, NodeId>, HeuristicError> {
    let net = &problem.network;
    let dual = problem.scheme.traffic_mode.is_dual();
    let mut order: Vec<(usize, VnodeKey, f64)> = problem
        .request
        .vnodes()
        .enumerate()
        .map(|(i, (bp, vn))| (i, VnodeKey::new(&bp.id, &vn.id), vn.mcu))
        .collect();
    order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let energy = |e: Edge| net.link(e).map(link_power_per_kbps);
    let mut assignment = BTreeMap::new();
    let mut hosting: BTreeSet<NodeId> = BTreeSet::new();
    for (_, key, _) in order {
        let vn = problem.vnode(&key).expect("key from request");
        let open = open_hosts(problem, &assignment, &key);
        if open.is_empty() {
            return Err(HeuristicError::NoFeasibleNode(key));
        }
        let neigh = placed_neighbours(problem, &assignment, &key);
        let reachable = |c: NodeId| {
            neigh.iter().all(|&(n, outgoing, demand)| {
                let (s, t) = if outgoing { (c, n) } else { (n, c) };
                s == t || demand <= 0.0 || disjoint_path_count(net, s, t, if dual { 2 } else { 1 }) >= if dual { 2 } else { 1 }
            })
        };
        let pending = if dual { unplaced_neighbours(problem, &assignment, &key) } else { Vec::new() };
        // every still unplaced neighbour must keep a host joined to `c` by disjoint paths
        let lookahead = |c: NodeId| {
            pending.iter().all(|(hosts, outgoing)| {
                hosts.iter().any(|&h| {
                    let (s, t) = if *outgoing { (c, h) } else { (h, c) };
                    h != c && disjoint_path_count(net, s, t, 2) >= 2
                })
            })
        };
        let usable: Vec<NodeId> = open.iter().copied().filter(|&c| reachable(c) && lookahead(c)).collect();
        if usable.is_empty() {
            return Err(if dual { HeuristicError::NoDisjointHost(key) } else { HeuristicError::NoFeasibleNode(key) });
        }
        let score = |c: NodeId| -> (f64, f64, NodeId) {
            let node = net.node(c).expect("usable host");
            let mut power = problem.weights.beta * node.max_cpu_power * vn.mcu / node.mcu_capacity;
            if !hosting.contains(&c) {
                power += problem.weights.beta * node.idle_cpu_power;
            }
            let route: f64 = neigh
                .iter()
                .map(|&(n, outgoing, demand)| {
                    let (s, t) = if outgoing { (c, n) } else { (n, c) };
                    if s == t {
                        0.0
                    } else {
                        demand * dijkstra(net, s, t, &energy).map_or(f64::INFINITY, |(d, _)| d)
                    }
                })
                .sum();
            ((power * 1e9).round() / 1e9, route, c)
        };
        let best = usable
            .into_iter()
            .map(score)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
            .expect("non-empty");
        assignment.insert(key, best.2);
        hosting.insert(best.2);
    }
    Ok(assignment)
}

fn check_config(problem: &Problem, config: &HeuristicConfig) -> Result<(), HeuristicError> {
    if problem.scheme.traffic_mode.is_dual() && config.k_candidate_paths < 2 {
        return Err(HeuristicError::BadConfig);
    }
    Ok(())
}

/// Greedy placement followed by cost-aware routing.
pub fn embed_greedy(problem: &Problem, config: &HeuristicConfig) -> Result<EmbeddingSolution, HeuristicError> {
    check_config(problem, config)?;
    let assignment = place(problem)?;
    build(problem, assignment, config)
}

fn better(candidate: &EmbeddingSolution, current: &EmbeddingSolution) -> bool {
    candidate.costs.objective < current.costs.objective - 1e-9 * (1.0 + current.costs.objective.abs())
}

/// Relocation and path re-selection moves, each accepted only when it strictly lowers the
/// objective. Every evaluated move counts against `budget`.
pub fn local_search(problem: &Problem, solution: &EmbeddingSolution, budget: usize, config: &HeuristicConfig) -> EmbeddingSolution {
    let mut current = solution.clone();
    let mut used = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    'outer: while used < budget {
        let mut improved = false;
        let mut keys: Vec<VnodeKey> = current.assignment.keys().cloned().collect();
        keys.shuffle(&mut rng);
        for key in keys {
            for host in open_hosts(problem, &current.assignment, &key) {
                if current.assignment.get(&key) == Some(&host) {
                    continue;
                }
                if used >= budget {
                    break 'outer;
                }
                used += 1;
                let mut asg = current.assignment.clone();
                asg.insert(key.clone(), host);
                if let Ok(cand) = build(problem, asg, config) {
                    if better(&cand, &current) {
                        current = cand;
                        improved = true;
                    }
                }
            }
        }
        let pairs: Vec<Pair> = current.routes1.iter().map(|r| r.pair()).collect();
        for pair in pairs {
            for layer in 0..if problem.scheme.traffic_mode.is_dual() { 2 } else { 1 } {
                let routes = if layer == 0 { &current.routes1 } else { &current.routes2 };
                let Some(own) = routes.iter().find(|r| r.pair() == pair).map(|r| r.edges.clone()) else { continue };
                let other = if layer == 0 { current.route2(pair) } else { current.route1(pair) }.map(|r| r.edges.clone());
                let unit = |e: Edge| problem.network.link(e).map(|l| 1.0 + link_power_per_kbps(l));
                for (_, alt) in k_shortest_paths(&problem.network, pair.0, pair.1, config.k_candidate_paths.max(2), &unit) {
                    if alt == own || other.as_ref().is_some_and(|o| !edge_disjoint(o, &alt) || (config.node_disjoint && !node_disjoint(o, &alt))) {
                        continue;
                    }
                    if used >= budget {
                        break 'outer;
                    }
                    used += 1;
                    let mut p1: Paths = current.routes1.iter().map(|r| (r.pair(), r.edges.clone())).collect();
                    let mut p2: Paths = current.routes2.iter().map(|r| (r.pair(), r.edges.clone())).collect();
                    if layer == 0 { &mut p1 } else { &mut p2 }.insert(pair, alt);
                    if let Ok(cand) = assemble(problem, current.assignment.clone(), &p1, &p2) {
                        if better(&cand, &current) {
                            current = cand;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// Greedy embedding refined by local search within the configured budget.
pub fn solve_heuristic(problem: &Problem, config: &HeuristicConfig) -> Result<EmbeddingSolution, HeuristicError> {
    let start = embed_greedy(problem, config)?;
    Ok(local_search(problem, &start, config.local_search_budget, config))
}
