//! Concrete embeddings: the assignment, the routes and everything derived from them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cost_model::{
    self, CostBreakdown, CostError, LatencyTable, LinkTraffic, ObjectiveWeights,
};
use crate::domain::{
    Edge, NodeId, PhysicalNetwork, Scenario, ServiceRequest, VirtualNode, VnodeKey,
};
use crate::resilience::{apply_node_scheme, SchemeSpec};

/// An ordered pair of physical nodes hosting the two ends of at least one virtual link.
pub type Pair = (NodeId, NodeId);

/// Everything needed to build and price an embedding. `request` is already transformed by
/// the scheme's node level.
#[derive(Clone, Debug)]
pub struct Problem {
    pub network: PhysicalNetwork,
    pub request: ServiceRequest,
    pub scheme: SchemeSpec,
    pub weights: ObjectiveWeights,
    pub table: LatencyTable,
}

impl Problem {
    pub fn new(scenario: &Scenario, scheme: SchemeSpec, weights: ObjectiveWeights) -> Result<Self, CostError> {
        let table = scenario.latency_table()?;
        Ok(Self::from_parts(scenario.network.clone(), &scenario.services, scheme, weights, table))
    }

    pub fn from_parts(
        network: PhysicalNetwork,
        base_request: &ServiceRequest,
        scheme: SchemeSpec,
        weights: ObjectiveWeights,
        table: LatencyTable,
    ) -> Self {
        let request = apply_node_scheme(base_request, scheme.node_level);
        Problem { network, request, scheme, weights, table }
    }

    pub fn vnode(&self, key: &VnodeKey) -> Option<&VirtualNode> {
        let bp = self.request.bps.iter().find(|b| b.id == key.bp)?;
        bp.nodes.iter().find(|v| v.id == key.vnode)
    }

    pub fn vnode_keys(&self) -> Vec<VnodeKey> {
        self.request.vnodes().map(|(bp, vn)| VnodeKey::new(&bp.id, &vn.id)).collect()
    }

    /// Physical nodes that provide the function and zone of `vn` and can hold it alone.
    pub fn hosts(&self, vn: &VirtualNode) -> Vec<NodeId> {
        self.network
            .nodes()
            .iter()
            .filter(|n| {
                n.provides(&vn.function)
                    && vn.zone.as_ref().is_none_or(|z| *z == n.zone)
                    && vn.mcu <= n.mcu_capacity
                    && vn.ram <= n.ram_capacity
            })
            .map(|n| n.id)
            .collect()
    }

    /// Aggregated demand per pair of distinct hosts. Virtual links whose ends share a host
    /// create no network traffic.
    pub fn commodity_demands(&self, assignment: &BTreeMap<VnodeKey, NodeId>) -> BTreeMap<Pair, f64> {
        let mut out = BTreeMap::new();
        for bp in &self.request.bps {
            for vl in &bp.links {
                let c = assignment.get(&VnodeKey::new(&bp.id, &vl.from));
                let d = assignment.get(&VnodeKey::new(&bp.id, &vl.to));
                if let (Some(&c), Some(&d)) = (c, d) {
                    if c != d {
                        *out.entry((c, d)).or_insert(0.0) += vl.demand;
                    }
                }
            }
        }
        out
    }
}

/// One path of one commodity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub source: NodeId,
    pub dest: NodeId,
    /// kb/s carried by this path.
    pub flow: f64,
    pub edges: Vec<Edge>,
}

impl Route {
    pub fn pair(&self) -> Pair {
        (self.source, self.dest)
    }

    /// The node sequence, or `None` when consecutive edges do not chain from source to dest.
    pub fn nodes(&self) -> Option<Vec<NodeId>> {
        let mut seq = vec![self.source];
        for e in &self.edges {
            if e.0 != *seq.last()? {
                return None;
            }
            seq.push(e.1);
        }
        (seq.last() == Some(&self.dest) && !self.edges.is_empty()).then_some(seq)
    }

    pub fn is_simple(&self) -> bool {
        self.nodes().is_some_and(|seq| {
            let set: BTreeSet<_> = seq.iter().collect();
            set.len() == seq.len()
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    /// Proven optimal by the exact solver.
    Optimal,
    /// Best incumbent when a time or node limit stopped the exact solver.
    LimitReached,
    /// Produced by the heuristic or assembled by hand.
    #[default]
    Unproven,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SolutionRepr", into = "SolutionRepr")]
pub struct EmbeddingSolution {
    pub scheme: SchemeSpec,
    pub status: SolutionStatus,
    pub assignment: BTreeMap<VnodeKey, NodeId>,
    /// Primary paths, one per commodity with positive demand, ordered by pair.
    pub routes1: Vec<Route>,
    /// Secondary paths (dual-path modes only), ordered by pair.
    pub routes2: Vec<Route>,
    pub link_traffic1: LinkTraffic,
    /// Reserved secondary traffic. For RDTR this is the full backup reservation even though
    /// only the keep-alive share is powered at rest.
    pub link_traffic2: LinkTraffic,
    /// Incoming traffic per node, both layers.
    pub node_arrivals: BTreeMap<NodeId, f64>,
    pub costs: CostBreakdown,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Placement {
    bp: String,
    vnode: String,
    node: NodeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkLoad {
    from: NodeId,
    to: NodeId,
    kbps: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeLoad {
    node: NodeId,
    kbps: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionRepr {
    scheme: SchemeSpec,
    status: SolutionStatus,
    assignment: Vec<Placement>,
    routes1: Vec<Route>,
    routes2: Vec<Route>,
    link_traffic1: Vec<LinkLoad>,
    link_traffic2: Vec<LinkLoad>,
    node_arrivals: Vec<NodeLoad>,
    costs: CostBreakdown,
}

fn loads_out(m: LinkTraffic) -> Vec<LinkLoad> {
    m.into_iter().map(|(e, kbps)| LinkLoad { from: e.0, to: e.1, kbps }).collect()
}

fn loads_in(v: Vec<LinkLoad>) -> LinkTraffic {
    v.into_iter().map(|l| (Edge(l.from, l.to), l.kbps)).collect()
}

impl From<EmbeddingSolution> for SolutionRepr {
    fn from(s: EmbeddingSolution) -> Self {
        SolutionRepr {
            scheme: s.scheme,
            status: s.status,
            assignment: s
                .assignment
                .into_iter()
                .map(|(k, node)| Placement { bp: k.bp, vnode: k.vnode, node })
                .collect(),
            routes1: s.routes1,
            routes2: s.routes2,
            link_traffic1: loads_out(s.link_traffic1),
            link_traffic2: loads_out(s.link_traffic2),
            node_arrivals: s.node_arrivals.into_iter().map(|(node, kbps)| NodeLoad { node, kbps }).collect(),
            costs: s.costs,
        }
    }
}

impl From<SolutionRepr> for EmbeddingSolution {
    fn from(r: SolutionRepr) -> Self {
        EmbeddingSolution {
            scheme: r.scheme,
            status: r.status,
            assignment: r.assignment.into_iter().map(|p| (VnodeKey::new(p.bp, p.vnode), p.node)).collect(),
            routes1: r.routes1,
            routes2: r.routes2,
            link_traffic1: loads_in(r.link_traffic1),
            link_traffic2: loads_in(r.link_traffic2),
            node_arrivals: r.node_arrivals.into_iter().map(|l| (l.node, l.kbps)).collect(),
            costs: r.costs,
        }
    }
}

impl EmbeddingSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn route1(&self, pair: Pair) -> Option<&Route> {
        self.routes1.iter().find(|r| r.pair() == pair)
    }

    pub fn route2(&self, pair: Pair) -> Option<&Route> {
        self.routes2.iter().find(|r| r.pair() == pair)
    }

    /// Nodes touched by any route.
    pub fn routed_nodes(&self) -> BTreeSet<NodeId> {
        self.routes1
            .iter()
            .chain(&self.routes2)
            .flat_map(|r| r.edges.iter().flat_map(|e| [e.0, e.1]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssembleError {
    #[error("virtual node {0} is not assigned")]
    Unassigned(VnodeKey),
    #[error("virtual node {0} is assigned to unknown node {1}")]
    UnknownHost(VnodeKey, NodeId),
    #[error("commodity {}->{} has no {which} path", .pair.0, .pair.1)]
    MissingPath { pair: Pair, which: &'static str },
    #[error("path given for {}->{} which carries no demand", .0.0, .0.1)]
    StrayPath(Pair),
    #[error("path of {}->{} is not a chain of existing links", .0.0, .0.1)]
    BrokenPath(Pair),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Sum of the flows of `routes` per directed link.
pub fn link_traffic(routes: &[Route]) -> LinkTraffic {
    let mut m = LinkTraffic::new();
    for r in routes {
        for &e in &r.edges {
            *m.entry(e).or_insert(0.0) += r.flow;
        }
    }
    m
}

/// Incoming traffic of every node over both layers.
pub fn node_arrivals(network: &PhysicalNetwork, t1: &LinkTraffic, t2: &LinkTraffic) -> BTreeMap<NodeId, f64> {
    let mut m: BTreeMap<NodeId, f64> = network.node_ids().map(|n| (n, 0.0)).collect();
    for (e, v) in t1.iter().chain(t2) {
        *m.entry(e.1).or_insert(0.0) += v;
    }
    m
}

/// Builds the solution implied by `assignment` and one path per commodity and layer, and
/// prices it with the cost model.
pub fn assemble(
    problem: &Problem,
    assignment: BTreeMap<VnodeKey, NodeId>,
    paths1: &BTreeMap<Pair, Vec<Edge>>,
    paths2: &BTreeMap<Pair, Vec<Edge>>,
) -> Result<EmbeddingSolution, AssembleError> {
    for key in problem.vnode_keys() {
        match assignment.get(&key) {
            None => return Err(AssembleError::Unassigned(key)),
            Some(&n) if problem.network.node(n).is_none() => return Err(AssembleError::UnknownHost(key, n)),
            _ => {}
        }
    }
    let mode = problem.scheme.traffic_mode;
    let share = mode.path_share();
    let demands = problem.commodity_demands(&assignment);
    let live: BTreeMap<Pair, f64> = demands.into_iter().filter(|&(_, d)| d > 0.0).collect();
    let mut layers = vec![(paths1, "primary")];
    if mode.is_dual() {
        layers.push((paths2, "secondary"));
    }
    let mut routes = [Vec::new(), Vec::new()];
    for (li, (paths, which)) in layers.into_iter().enumerate() {
        for pair in paths.keys() {
            if !live.contains_key(pair) {
                return Err(AssembleError::StrayPath(*pair));
            }
        }
        for (&pair, &demand) in &live {
            let edges = paths.get(&pair).ok_or(AssembleError::MissingPath { pair, which })?;
            let route = Route { source: pair.0, dest: pair.1, flow: share * demand, edges: edges.clone() };
            if route.nodes().is_none() || !edges.iter().all(|&e| problem.network.has_edge(e)) {
                return Err(AssembleError::BrokenPath(pair));
            }
            routes[li].push(route);
        }
    }
    let [routes1, routes2] = routes;
    let t1 = link_traffic(&routes1);
    let t2 = link_traffic(&routes2);
    let arrivals = node_arrivals(&problem.network, &t1, &t2);
    let mut solution = EmbeddingSolution {
        scheme: problem.scheme,
        status: SolutionStatus::Unproven,
        assignment,
        routes1,
        routes2,
        link_traffic1: t1,
        link_traffic2: t2,
        node_arrivals: arrivals,
        costs: CostBreakdown::default(),
    };
    solution.costs = price(problem, &solution)?;
    Ok(solution)
}

/// Latency, processing and network power of a solution, recomputed from its assignment and
/// routes.
pub fn price(problem: &Problem, s: &EmbeddingSolution) -> Result<CostBreakdown, CostError> {
    let t1 = link_traffic(&s.routes1);
    let t2 = link_traffic(&s.routes2);
    let arrivals = node_arrivals(&problem.network, &t1, &t2);
    let mut tl = 0.0;
    for &a in arrivals.values() {
        tl += problem.table.node_latency(a)?;
    }
    let mut hosted: BTreeMap<NodeId, Vec<&VirtualNode>> = BTreeMap::new();
    for (key, &n) in &s.assignment {
        if let Some(vn) = problem.vnode(key) {
            hosted.entry(n).or_default().push(vn);
        }
    }
    let mut tpp = 0.0;
    for (n, vns) in &hosted {
        if let Some(node) = problem.network.node(*n) {
            tpp += cost_model::processing_power(node, vns)?;
        }
    }
    let tnp = cost_model::network_power_with(
        &problem.network,
        &s.routed_nodes(),
        &t1,
        &t2,
        problem.scheme.secondary_power_scale(),
    )?;
    Ok(cost_model::total_objective(&problem.weights, tl, tpp, tnp))
}
