//! Physical and virtual layers of the embedding problem.
//!
//! A [`PhysicalNetwork`] is a set of IoT nodes joined by wireless links. Links are stored in
//! both orientations, so every directed [`Edge`] used by a route is a stored link. A
//! [`ServiceRequest`] is a set of business processes, each a small graph of virtual nodes
//! joined by virtual links that carry a traffic demand.
//!
//! Units are fixed throughout: meters, MHz, kB, kb/s and mW. Energy coefficients are kept in
//! mW per kb/s (and mW per kb/s per m² for the amplifier term).

mod generate;
mod scenario;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use generate::{
    generate_request, generate_scenario, generate_topology, GenerateError, GeneratorDefaults, McuProfile,
    RequestDefaults, MCU_PROFILES,
};
pub use scenario::{Scenario, ScenarioError};
pub use validate::{validate_scenario, Violation};

/// Identifier of a physical IoT node. Node ids are the positions `0..n` of the node list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A directed physical link `(from, to)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub NodeId, pub NodeId);

impl Edge {
    pub fn from(self) -> NodeId {
        self.0
    }

    pub fn to(self) -> NodeId {
        self.1
    }

    pub fn reversed(self) -> Edge {
        Edge(self.1, self.0)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.0, self.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub fn contains(self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// A physical IoT node with its processing and radio profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoTNode {
    pub id: NodeId,
    pub position: Position,
    pub zone: String,
    pub functions: BTreeSet<String>,
    /// MHz
    pub mcu_capacity: f64,
    /// kB
    pub ram_capacity: f64,
    /// mW
    pub idle_cpu_power: f64,
    /// mW
    pub max_cpu_power: f64,
    /// mW
    pub idle_net_power: f64,
    /// kb/s
    pub traffic_capacity: f64,
}

impl IoTNode {
    pub fn provides(&self, function: &str) -> bool {
        self.functions.contains(function)
    }
}

/// One orientation of a wireless link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoTLink {
    pub from: NodeId,
    pub to: NodeId,
    /// meters
    pub distance: f64,
    /// mW per kb/s
    pub energy_per_bit: f64,
    /// mW per kb/s per m²
    pub amplifier_factor: f64,
}

impl IoTLink {
    pub fn edge(&self) -> Edge {
        Edge(self.from, self.to)
    }
}

/// The physical layer. Build with [`PhysicalNetwork::new`] or deserialize; both keep the
/// adjacency index in sync with the link list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "NetworkRepr", into = "NetworkRepr")]
pub struct PhysicalNetwork {
    pub area: Area,
    pub max_link_distance: f64,
    nodes: Vec<IoTNode>,
    links: Vec<IoTLink>,
    by_edge: BTreeMap<Edge, usize>,
    adjacency: Vec<Vec<NodeId>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRepr {
    area: Area,
    max_link_distance: f64,
    nodes: Vec<IoTNode>,
    links: Vec<IoTLink>,
}

impl From<NetworkRepr> for PhysicalNetwork {
    fn from(r: NetworkRepr) -> Self {
        PhysicalNetwork::new(r.area, r.max_link_distance, r.nodes, r.links)
    }
}

impl From<PhysicalNetwork> for NetworkRepr {
    fn from(n: PhysicalNetwork) -> Self {
        NetworkRepr {
            area: n.area,
            max_link_distance: n.max_link_distance,
            nodes: n.nodes,
            links: n.links,
        }
    }
}

/// Error for lookups of nodes that are not part of the network.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unknown node {0}")]
pub struct UnknownNode(pub NodeId);

impl PhysicalNetwork {
    /// Builds a network and its adjacency index. No invariant is enforced here; use
    /// [`validate_scenario`] to get a full violation report.
    pub fn new(area: Area, max_link_distance: f64, nodes: Vec<IoTNode>, links: Vec<IoTLink>) -> Self {
        let mut by_edge = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, link) in links.iter().enumerate() {
            by_edge.entry(link.edge()).or_insert(i);
            if let Some(adj) = adjacency.get_mut(link.from.index()) {
                if link.to.index() < nodes.len() && !adj.contains(&link.to) {
                    adj.push(link.to);
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort();
        }
        PhysicalNetwork { area, max_link_distance, nodes, links, by_edge, adjacency }
    }

    pub fn nodes(&self) -> &[IoTNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[IoTLink] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&IoTNode> {
        self.nodes.get(id.index()).filter(|n| n.id == id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn link(&self, edge: Edge) -> Option<&IoTLink> {
        self.by_edge.get(&edge).map(|&i| &self.links[i])
    }

    pub fn has_edge(&self, edge: Edge) -> bool {
        self.by_edge.contains_key(&edge)
    }

    /// All stored directed edges, in `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.by_edge.keys().copied()
    }

    /// Link-adjacent nodes of `node`, ascending.
    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], UnknownNode> {
        self.node(node).ok_or(UnknownNode(node))?;
        Ok(&self.adjacency[node.index()])
    }

    /// Number of bidirectional links (pairs with both orientations counted once).
    pub fn bidirectional_link_count(&self) -> usize {
        self.by_edge.keys().filter(|e| e.0 < e.1 && self.has_edge(e.reversed())).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in &self.adjacency[u] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    stack.push(v.index());
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

impl PartialEq for PhysicalNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.area == other.area
            && self.max_link_distance == other.max_link_distance
            && self.nodes == other.nodes
            && self.links == other.links
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VnodeKind {
    Sensor,
    Actuator,
    Controller,
    Storage,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualNode {
    pub id: String,
    pub function: String,
    /// `None` accepts any zone.
    #[serde(default)]
    pub zone: Option<String>,
    /// MHz
    pub mcu: f64,
    /// kB
    pub ram: f64,
    pub kind: VnodeKind,
}

/// Directed traffic demand between two virtual nodes of the same business process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtualLink {
    pub from: String,
    pub to: String,
    /// kb/s
    pub demand: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusinessProcess {
    pub id: String,
    pub nodes: Vec<VirtualNode>,
    #[serde(default)]
    pub links: Vec<VirtualLink>,
}

impl BusinessProcess {
    pub fn vnode_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Virtual neighbors of `id` (either link direction), ascending and deduplicated.
    pub fn neighbors(&self, id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .links
            .iter()
            .filter_map(|l| {
                if l.from == id {
                    Some(l.to.as_str())
                } else if l.to == id {
                    Some(l.from.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceRequest {
    pub bps: Vec<BusinessProcess>,
}

impl ServiceRequest {
    pub fn vnode_count(&self) -> usize {
        self.bps.iter().map(|bp| bp.nodes.len()).sum()
    }

    pub fn vlink_count(&self) -> usize {
        self.bps.iter().map(|bp| bp.links.len()).sum()
    }

    /// Every `(bp, vnode)` pair in declaration order.
    pub fn vnodes(&self) -> impl Iterator<Item = (&BusinessProcess, &VirtualNode)> {
        self.bps.iter().flat_map(|bp| bp.nodes.iter().map(move |n| (bp, n)))
    }
}

/// Reference to a virtual node by business-process and virtual-node identifiers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VnodeKey {
    pub bp: String,
    pub vnode: String,
}

impl VnodeKey {
    pub fn new(bp: impl Into<String>, vnode: impl Into<String>) -> Self {
        VnodeKey { bp: bp.into(), vnode: vnode.into() }
    }
}

impl fmt::Display for VnodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.bp, self.vnode)
    }
}
