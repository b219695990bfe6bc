//! Resilience schemes.
//!
//! A scheme is a node level (which virtual nodes get a redundant replica) combined with a
//! traffic mode (how each commodity uses one or two link-disjoint paths).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{BusinessProcess, ServiceRequest, VirtualLink, VirtualNode, VnodeKind};

mod evaluate;

pub use evaluate::{
    evaluate_failure, evaluate_no_failure, pdr_crossover, pdr_sweep, DeliveryOutcome, EvalError,
    PdrRow, SimContext,
};

/// Suffix appended to the id of a replica virtual node.
pub const REPLICA_SUFFIX: &str = "~r";

pub const DEFAULT_KEEP_ALIVE_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeLevel {
    /// Coexistence only.
    #[serde(rename = "CCNR")]
    Ccnr,
    /// Sensors and actuators replicated.
    #[serde(rename = "PRNR")]
    Prnr,
    /// Every virtual node replicated.
    #[serde(rename = "FRNR")]
    Frnr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrafficMode {
    /// One path; a failed delivery is retransmitted on it.
    #[serde(rename = "SINGLE")]
    Single,
    /// Backup path kept alive, used after a failure.
    #[serde(rename = "RDTR")]
    Rdtr,
    /// Full replica on both paths.
    #[serde(rename = "RPTR")]
    Rptr,
    /// Half of the demand on each path.
    #[serde(rename = "STR")]
    Str,
}

impl NodeLevel {
    pub const ALL: [NodeLevel; 3] = [NodeLevel::Ccnr, NodeLevel::Prnr, NodeLevel::Frnr];

    pub fn name(self) -> &'static str {
        match self {
            NodeLevel::Ccnr => "CCNR",
            NodeLevel::Prnr => "PRNR",
            NodeLevel::Frnr => "FRNR",
        }
    }

    fn replicates(self, kind: VnodeKind) -> bool {
        match self {
            NodeLevel::Ccnr => false,
            NodeLevel::Prnr => matches!(kind, VnodeKind::Sensor | VnodeKind::Actuator),
            NodeLevel::Frnr => true,
        }
    }
}

impl TrafficMode {
    pub const ALL: [TrafficMode; 4] =
        [TrafficMode::Single, TrafficMode::Rdtr, TrafficMode::Rptr, TrafficMode::Str];

    pub fn name(self) -> &'static str {
        match self {
            TrafficMode::Single => "SINGLE",
            TrafficMode::Rdtr => "RDTR",
            TrafficMode::Rptr => "RPTR",
            TrafficMode::Str => "STR",
        }
    }

    pub fn is_dual(self) -> bool {
        !matches!(self, TrafficMode::Single)
    }

    /// Fraction of a commodity's demand carried by each path.
    pub fn path_share(self) -> f64 {
        match self {
            TrafficMode::Str => 0.5,
            _ => 1.0,
        }
    }

    /// Scale of the secondary path's traffic-proportional power at rest.
    pub fn secondary_power_scale(self, keep_alive_fraction: f64) -> f64 {
        match self {
            TrafficMode::Single => 0.0,
            TrafficMode::Rdtr => keep_alive_fraction,
            TrafficMode::Rptr | TrafficMode::Str => 1.0,
        }
    }
}

impl fmt::Display for NodeLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for TrafficMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemeError {
    #[error("unknown node level {0:?} (expected CCNR, PRNR or FRNR)")]
    NodeLevel(String),
    #[error("unknown traffic mode {0:?} (expected SINGLE, RDTR, RPTR or STR)")]
    TrafficMode(String),
    #[error("keep-alive fraction {0} must lie in [0, 1)")]
    KeepAlive(f64),
}

impl FromStr for NodeLevel {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SchemeError::NodeLevel(s.to_string()))
    }
}

impl FromStr for TrafficMode {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrafficMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SchemeError::TrafficMode(s.to_string()))
    }
}

/// A complete scheme such as `FRNR+STR`. A bare node level means single-path routing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub node_level: NodeLevel,
    pub traffic_mode: TrafficMode,
    pub keep_alive_fraction: f64,
    /// Forbid two virtual nodes of one BP on the same physical node.
    pub coexistence: bool,
}

impl SchemeSpec {
    pub fn new(node_level: NodeLevel, traffic_mode: TrafficMode) -> Self {
        SchemeSpec {
            node_level,
            traffic_mode,
            keep_alive_fraction: DEFAULT_KEEP_ALIVE_FRACTION,
            coexistence: true,
        }
    }

    pub fn with_keep_alive(mut self, fraction: f64) -> Result<Self, SchemeError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(SchemeError::KeepAlive(fraction));
        }
        self.keep_alive_fraction = fraction;
        Ok(self)
    }

    /// Every node level combined with every traffic mode.
    pub fn all() -> Vec<SchemeSpec> {
        NodeLevel::ALL
            .into_iter()
            .flat_map(|l| TrafficMode::ALL.into_iter().map(move |m| SchemeSpec::new(l, m)))
            .collect()
    }

    pub fn secondary_power_scale(&self) -> f64 {
        self.traffic_mode.secondary_power_scale(self.keep_alive_fraction)
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.node_level, self.traffic_mode)
    }
}

impl FromStr for SchemeSpec {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (level, mode) = match s.split_once('+') {
            Some((l, m)) => (l.parse()?, m.parse()?),
            None => (s.parse()?, TrafficMode::Single),
        };
        Ok(SchemeSpec::new(level, mode))
    }
}

pub fn replica_id(id: &str) -> String {
    format!("{id}{REPLICA_SUFFIX}")
}

/// Adds replicas for the virtual nodes selected by `level`.
///
/// A replica copies its original's requirements and lives in the same BP, so coexistence
/// keeps it off the original's host. Every virtual link touching a replicated node is
/// duplicated with the same demand for each combination of original and replica endpoints.
pub fn apply_node_scheme(request: &ServiceRequest, level: NodeLevel) -> ServiceRequest {
    let bps = request
        .bps
        .iter()
        .map(|bp| {
            let mut nodes = bp.nodes.clone();
            let mut copies = std::collections::BTreeMap::new();
            for vn in &bp.nodes {
                if level.replicates(vn.kind) {
                    let replica = VirtualNode { id: replica_id(&vn.id), ..vn.clone() };
                    copies.insert(vn.id.clone(), replica.id.clone());
                    nodes.push(replica);
                }
            }
            let variants = |id: &String| -> Vec<String> {
                let mut v = vec![id.clone()];
                v.extend(copies.get(id).cloned());
                v
            };
            let links = bp
                .links
                .iter()
                .flat_map(|vl| {
                    let froms = variants(&vl.from);
                    let tos = variants(&vl.to);
                    froms
                        .into_iter()
                        .flat_map(move |f| {
                            tos.clone()
                                .into_iter()
                                .map(move |t| VirtualLink { from: f.clone(), to: t, demand: vl.demand })
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            BusinessProcess { id: bp.id.clone(), nodes, links }
        })
        .collect();
    ServiceRequest { bps }
}
