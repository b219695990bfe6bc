//! Tiny seeded scenarios and an exhaustive oracle that prices embeddings without the library
//! cost model.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resilient_embed::cost_model::LatencyLevel;
use resilient_embed::domain::{
    Area, BusinessProcess, IoTLink, IoTNode, NodeId, PhysicalNetwork, Position, Scenario, ServiceRequest,
    VirtualLink, VirtualNode, VnodeKind,
};
use resilient_embed::{NodeLevel, ObjectiveWeights, SchemeSpec, TrafficMode};

pub const CAPACITY: f64 = 250.0;

/// M/M/1 levels written out independently of the library builder.
pub fn oracle_levels(step: f64) -> Vec<LatencyLevel> {
    let kbit_per_packet = 128.0 * 8.0 / 1000.0;
    (1..)
        .map(|k| k as f64 * step)
        .take_while(|&l| l < CAPACITY)
        .map(|l| LatencyLevel { lambda_kbps: l, w_ms: 1000.0 / ((CAPACITY - l) / kbit_per_packet) })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = lo + rng.random::<f64>() * (hi - lo);
    (v * 4.0).round() / 4.0
}

fn connected(n: usize, links: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in links {
            for (x, y) in [(a, b), (b, a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// A connected network of `3..=max_nodes` nodes with a coarse latency table and at most
/// `max_vnodes` virtual nodes in one or two business processes.
pub fn tiny_scenario(seed: u64, max_nodes: usize, max_vnodes: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=max_nodes);
    let pos: Vec<Position> = (0..n)
        .map(|_| Position { x: uniform(&mut rng, 0.0, 100.0), y: uniform(&mut rng, 0.0, 100.0) })
        .collect();
    let links = loop {
        let mut l = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < 0.85 {
                    l.push((a, b));
                }
            }
        }
        if connected(n, &l) {
            break l;
        }
    };
    let all_fns = ["sense", "process", "actuate"];
    let nodes: Vec<IoTNode> = (0..n)
        .map(|i| {
            let mut functions: BTreeSet<String> =
                all_fns.iter().filter(|_| rng.random::<f64>() < 0.8).map(|s| s.to_string()).collect();
            if functions.is_empty() {
                functions.insert("process".into());
            }
            IoTNode {
                id: NodeId(i as u32),
                position: pos[i],
                zone: if pos[i].x < 50.0 { "z0".into() } else { "z1".into() },
                functions,
                mcu_capacity: [8.0, 16.0, 48.0][rng.random_range(0..3)],
                ram_capacity: uniform(&mut rng, 1.0, 4.0),
                idle_cpu_power: uniform(&mut rng, 1.0, 5.0),
                max_cpu_power: uniform(&mut rng, 10.0, 60.0),
                idle_net_power: 1.0,
                traffic_capacity: CAPACITY,
            }
        })
        .collect();
    let mut iot_links = Vec::new();
    for &(a, b) in &links {
        for (x, y) in [(a, b), (b, a)] {
            iot_links.push(IoTLink {
                from: NodeId(x as u32),
                to: NodeId(y as u32),
                distance: pos[x].distance(pos[y]).max(1.0),
                energy_per_bit: 0.05,
                amplifier_factor: 255e-6,
            });
        }
    }
    let network = PhysicalNetwork::new(Area { width: 100.0, height: 100.0 }, 150.0, nodes, iot_links);

    // one BP chain of 2 or 3 vnodes, or a 2-vnode BP next to a lone controller
    let layout = rng.random_range(0..3);
    let nv = if layout == 0 || max_vnodes < 3 { 2 } else { 3 };
    let vn = |rng: &mut ChaCha8Rng, id: &str, function: &str, kind: VnodeKind| VirtualNode {
        id: id.into(),
        function: function.into(),
        zone: (rng.random::<f64>() < 0.2).then(|| if rng.random::<bool>() { "z0".into() } else { "z1".into() }),
        mcu: uniform(rng, 0.5, 4.0),
        ram: uniform(rng, 0.1, 0.5),
        kind,
    };
    let demand = |rng: &mut ChaCha8Rng| uniform(rng, 5.0, 40.0);
    let bps = if nv == 2 || layout == 1 {
        let mut nodes = vec![vn(&mut rng, "s", "sense", VnodeKind::Sensor), vn(&mut rng, "c", "process", VnodeKind::Controller)];
        let mut links = vec![VirtualLink { from: "s".into(), to: "c".into(), demand: demand(&mut rng) }];
        if nv == 3 {
            nodes.push(vn(&mut rng, "a", "actuate", VnodeKind::Actuator));
            links.push(VirtualLink { from: "c".into(), to: "a".into(), demand: demand(&mut rng) });
        }
        vec![BusinessProcess { id: "bp0".into(), nodes, links }]
    } else {
        let nodes = vec![vn(&mut rng, "s", "sense", VnodeKind::Sensor), vn(&mut rng, "a", "actuate", VnodeKind::Actuator)];
        let links = vec![VirtualLink { from: "s".into(), to: "a".into(), demand: demand(&mut rng) }];
        vec![
            BusinessProcess { id: "bp0".into(), nodes, links },
            BusinessProcess { id: "bp1".into(), nodes: vec![vn(&mut rng, "c", "process", VnodeKind::Controller)], links: vec![] },
        ]
    };
    let step = [25.0, 50.0][rng.random_range(0..2)];
    Scenario { network, services: ServiceRequest { bps }, latency_table: Some(oracle_levels(step)) }
}

pub fn all_schemes() -> Vec<SchemeSpec> {
    let mut out = Vec::new();
    for level in [NodeLevel::Ccnr, NodeLevel::Prnr, NodeLevel::Frnr] {
        for mode in [TrafficMode::Single, TrafficMode::Rdtr, TrafficMode::Rptr, TrafficMode::Str] {
            out.push(SchemeSpec::new(level, mode));
        }
    }
    out
}

// ---------------------------------------------------------------------------------------
// Exhaustive oracle

struct OVnode {
    bp: usize,
    function: String,
    zone: Option<String>,
    mcu: f64,
    ram: f64,
}

struct OReq {
    vnodes: Vec<OVnode>,
    /// (from, to, demand) over vnode indices.
    links: Vec<(usize, usize, f64)>,
}

/// Replica expansion written from the scheme description: duplicated vnodes copy their
/// requirements and every virtual link is repeated between all copies of its ends.
fn expand(base: &ServiceRequest, level: NodeLevel) -> OReq {
    let mut vnodes = Vec::new();
    let mut links = Vec::new();
    for (bi, bp) in base.bps.iter().enumerate() {
        let mut copies: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for v in &bp.nodes {
            let dup = match level {
                NodeLevel::Ccnr => false,
                NodeLevel::Prnr => matches!(v.kind, VnodeKind::Sensor | VnodeKind::Actuator),
                NodeLevel::Frnr => true,
            };
            for _ in 0..if dup { 2 } else { 1 } {
                copies.entry(&v.id).or_default().push(vnodes.len());
                vnodes.push(OVnode { bp: bi, function: v.function.clone(), zone: v.zone.clone(), mcu: v.mcu, ram: v.ram });
            }
        }
        for l in &bp.links {
            for &a in &copies[l.from.as_str()] {
                for &b in &copies[l.to.as_str()] {
                    links.push((a, b, l.demand));
                }
            }
        }
    }
    OReq { vnodes, links }
}

type OPath = Vec<(usize, usize)>;

fn simple_paths(adj: &[Vec<usize>], s: usize, t: usize) -> Vec<OPath> {
    fn go(adj: &[Vec<usize>], u: usize, t: usize, seen: &mut Vec<bool>, cur: &mut OPath, out: &mut Vec<OPath>) {
        if u == t {
            out.push(cur.clone());
            return;
        }
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                cur.push((u, v));
                go(adj, v, t, seen, cur, out);
                cur.pop();
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; adj.len()];
    seen[s] = true;
    let mut out = Vec::new();
    go(adj, s, t, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub struct OracleResult {
    pub objective: f64,
    pub assignment: Vec<usize>,
}

struct Ctx<'a> {
    net: &'a PhysicalNetwork,
    levels: &'a [LatencyLevel],
    weights: ObjectiveWeights,
    /// mW per kb/s of each directed link, `n * from + to`, infinite where absent.
    coef: Vec<f64>,
    secondary_scale: f64,
}

/// Link loads of both layers, dense `n * from + to`.
struct Loads {
    t1: Vec<f64>,
    t2: Vec<f64>,
}

impl Ctx<'_> {
    fn latency(&self, rate: f64) -> Option<f64> {
        if rate <= 1e-9 {
            return Some(0.0);
        }
        self.levels.iter().find(|l| l.lambda_kbps >= rate - 1e-9).map(|l| l.w_ms)
    }

    /// alpha*TL + gamma*TNP of the traffic placed so far, `None` past capacity.
    fn traffic_cost(&self, loads: &Loads) -> Option<f64> {
        let n = self.net.node_count();
        let mut arrival = vec![0.0; n];
        let mut active = vec![false; n];
        let mut prop = 0.0;
        for u in 0..n {
            for v in 0..n {
                let k = n * u + v;
                let (a, b) = (loads.t1[k], loads.t2[k]);
                if a > 1e-12 || b > 1e-12 {
                    arrival[v] += a + b;
                    active[u] = true;
                    active[v] = true;
                    prop += self.coef[k] * (a + self.secondary_scale * b);
                }
            }
        }
        let mut tl = 0.0;
        for (i, &a) in arrival.iter().enumerate() {
            if a > self.net.nodes()[i].traffic_capacity + 1e-9 {
                return None;
            }
            tl += self.latency(a)?;
        }
        let idle: f64 = (0..n).filter(|&i| active[i]).map(|i| self.net.nodes()[i].idle_net_power).sum();
        Some(self.weights.alpha * tl + self.weights.gamma * (idle + prop))
    }
}

struct Search<'a> {
    ctx: Ctx<'a>,
    /// (flow per path, candidate (primary, secondary) path choices)
    commodities: Vec<(f64, Vec<(OPath, Option<OPath>)>)>,
    best: f64,
}

impl Search<'_> {
    fn dfs(&mut self, i: usize, loads: &mut Loads, base: f64) {
        let n = self.ctx.net.node_count();
        let Some(c) = self.ctx.traffic_cost(loads) else { return };
        // adding traffic never lowers the cost, so a partial routing bounds its completions
        if base + c >= self.best - 1e-12 {
            return;
        }
        if i == self.commodities.len() {
            self.best = base + c;
            return;
        }
        let (flow, options) = std::mem::take(&mut self.commodities[i]);
        for (a, b) in &options {
            for &(u, v) in a {
                loads.t1[n * u + v] += flow;
            }
            for &(u, v) in b.iter().flatten() {
                loads.t2[n * u + v] += flow;
            }
            self.dfs(i + 1, loads, base);
            for &(u, v) in a {
                loads.t1[n * u + v] -= flow;
            }
            for &(u, v) in b.iter().flatten() {
                loads.t2[n * u + v] -= flow;
            }
        }
        self.commodities[i] = (flow, options);
    }
}

/// Minimum objective over every assignment and every choice of simple path (or ordered pair
/// of link-disjoint simple paths) per commodity. `None` when nothing is feasible.
pub fn brute_force(scenario: &Scenario, scheme: SchemeSpec, weights: ObjectiveWeights) -> Option<OracleResult> {
    let net = &scenario.network;
    let levels = scenario.latency_table.as_ref().expect("tiny scenarios carry a table");
    let req = expand(&scenario.services, scheme.node_level);
    let n = net.node_count();
    let mut adj = vec![Vec::new(); n];
    for l in net.links() {
        adj[l.from.index()].push(l.to.index());
    }
    let dual = scheme.traffic_mode.is_dual();
    let mut coef = vec![f64::INFINITY; n * n];
    for l in net.links() {
        coef[n * l.from.index() + l.to.index()] = 2.0 * l.energy_per_bit + l.distance * l.distance * l.amplifier_factor;
    }
    let secondary_scale = if scheme.traffic_mode == TrafficMode::Rdtr { scheme.keep_alive_fraction } else { 1.0 };
    let share = if scheme.traffic_mode == TrafficMode::Str { 0.5 } else { 1.0 };
    let mut route_options: BTreeMap<(usize, usize), Vec<(OPath, Option<OPath>)>> = BTreeMap::new();
    let mut options_for = |s: usize, t: usize| -> Vec<(OPath, Option<OPath>)> {
        route_options
            .entry((s, t))
            .or_insert_with(|| {
                let ps = simple_paths(&adj, s, t);
                if !dual {
                    return ps.into_iter().map(|p| (p, None)).collect();
                }
                let mut out = Vec::new();
                for a in &ps {
                    for b in &ps {
                        if a != b && a.iter().all(|e| !b.contains(e)) {
                            out.push((a.clone(), Some(b.clone())));
                        }
                    }
                }
                out
            })
            .clone()
    };

    let mut best: Option<OracleResult> = None;
    let mut assignment = vec![0usize; req.vnodes.len()];
    let total = n.pow(req.vnodes.len() as u32);
    for code in 0..total {
        let mut c = code;
        for slot in assignment.iter_mut() {
            *slot = c % n;
            c /= n;
        }
        // node constraints
        let mut mcu = vec![0.0; n];
        let mut ram = vec![0.0; n];
        let mut ok = true;
        for (v, &h) in req.vnodes.iter().zip(&assignment) {
            let node = &net.nodes()[h];
            if !node.functions.contains(&v.function) || v.zone.as_ref().is_some_and(|z| *z != node.zone) {
                ok = false;
                break;
            }
            mcu[h] += v.mcu;
            ram[h] += v.ram;
        }
        if !ok || (0..n).any(|h| mcu[h] > net.nodes()[h].mcu_capacity + 1e-9 || ram[h] > net.nodes()[h].ram_capacity + 1e-9) {
            continue;
        }
        if scheme.coexistence {
            let mut used = BTreeSet::new();
            if req.vnodes.iter().zip(&assignment).any(|(v, &h)| !used.insert((v.bp, h))) {
                continue;
            }
        }
        let mut tpp = 0.0;
        for h in 0..n {
            let hosted: Vec<&OVnode> = req.vnodes.iter().zip(&assignment).filter(|(_, &x)| x == h).map(|(v, _)| v).collect();
            if !hosted.is_empty() {
                let node = &net.nodes()[h];
                tpp += node.idle_cpu_power + hosted.iter().map(|v| node.max_cpu_power * v.mcu / node.mcu_capacity).sum::<f64>();
            }
        }
        let mut demand: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, d) in &req.links {
            let (s, t) = (assignment[a], assignment[b]);
            if s != t && d > 0.0 {
                *demand.entry((s, t)).or_insert(0.0) += d;
            }
        }
        let mut commodities = Vec::new();
        for (&(s, t), &d) in &demand {
            let opts = options_for(s, t);
            if opts.is_empty() {
                ok = false;
                break;
            }
            commodities.push((share * d, opts));
        }
        if !ok {
            continue;
        }
        let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.objective);
        let mut search = Search {
            ctx: Ctx { net, levels, weights, coef: coef.clone(), secondary_scale },
            commodities,
            best: incumbent,
        };
        let mut loads = Loads { t1: vec![0.0; n * n], t2: vec![0.0; n * n] };
        search.dfs(0, &mut loads, weights.beta * tpp);
        if search.best < incumbent {
            best = Some(OracleResult { objective: search.best, assignment: assignment.clone() });
        }
    }
    best
}

/// Node offering every function in zone `z0`, on the x axis.
pub fn plain_node(id: u32, x: f64) -> IoTNode {
    IoTNode {
        id: NodeId(id),
        position: Position { x, y: 0.0 },
        zone: "z0".into(),
        functions: ["sense", "process", "actuate"].iter().map(|s| s.to_string()).collect(),
        mcu_capacity: 8.0,
        ram_capacity: 2.0,
        idle_cpu_power: 1.0,
        max_cpu_power: 8.0,
        idle_net_power: 1.0,
        traffic_capacity: 250.0,
    }
}

pub fn radio_link(from: u32, to: u32, distance: f64) -> IoTLink {
    // 50 nJ/bit and 255 pJ/bit/m² in mW per kb/s
    IoTLink { from: NodeId(from), to: NodeId(to), distance, energy_per_bit: 0.05, amplifier_factor: 2.55e-4 }
}


/// Source 0, sink 3, primary through node 1 over 50 m legs, backup through node 2 over
/// slightly longer legs.
pub fn diamond() -> (Scenario, [f64; 2]) {
    let (near, far) = (50.0, 50.7);
    let nodes = vec![plain_node(0, 0.0), plain_node(1, 50.0), plain_node(2, 50.0), plain_node(3, 100.0)];
    let mut links = Vec::new();
    for (a, b, d) in [(0, 1, near), (1, 3, near), (0, 2, far), (2, 3, far)] {
        links.push(radio_link(a, b, d));
        links.push(radio_link(b, a, d));
    }
    let network = PhysicalNetwork::new(Area { width: 100.0, height: 100.0 }, 100.0, nodes, links);
    let vn = |id: &str, function: &str, kind| VirtualNode {
        id: id.into(),
        function: function.into(),
        zone: None,
        mcu: 1.0,
        ram: 0.25,
        kind,
    };
    let bp = BusinessProcess {
        id: "bp0".into(),
        nodes: vec![vn("s", "sense", VnodeKind::Sensor), vn("a", "actuate", VnodeKind::Actuator)],
        links: vec![VirtualLink { from: "s".into(), to: "a".into(), demand: 10.0 }],
    };
    // per kb/s cost of each path, by hand: two hops of 2E + d^2 F
    let hop = |d: f64| 2.0 * 0.05 + d * d * 2.55e-4;
    (Scenario::new(network, ServiceRequest { bps: vec![bp] }), [2.0 * hop(near), 2.0 * hop(far)])
}
