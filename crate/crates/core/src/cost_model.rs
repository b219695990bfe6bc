//! Power and latency accounting.
//!
//! * Processing power of a node is zero when it hosts nothing, otherwise its idle CPU power
//!   plus a share of its maximum CPU power proportional to the hosted MCU load.
//! * Network power is the idle radio power of every node that sends or receives, plus a
//!   per-kb/s charge on every directed link: transmit and receive electronics
//!   (`2 * energy_per_bit`) and the distance-squared amplifier term.
//! * Queuing latency of a node is read from a [`LatencyTable`] of arrival-rate levels,
//!   by default the M/M/1 mean sojourn time of fixed-size packets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Edge, IoTLink, IoTNode, NodeId, PhysicalNetwork, VirtualNode};

/// Bytes per packet used by the default latency table.
pub const DEFAULT_PACKET_SIZE_BYTES: f64 = 128.0;
/// Spacing of arrival-rate levels in the default latency table.
pub const DEFAULT_LATENCY_STEP_KBPS: f64 = 10.0;

/// Slack used when matching a traffic rate against a table level.
const RATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("latency step {step} must lie strictly between 0 and capacity {capacity}")]
    BadStep { step: f64, capacity: f64 },
    #[error("latency table has no levels")]
    EmptyTable,
    #[error("latency levels must be strictly ascending in rate and latency (level {0})")]
    NotAscending(usize),
    #[error("latency level {index} rate {lambda} is not below capacity {capacity}")]
    Unstable { index: usize, lambda: f64, capacity: f64 },
    #[error("arrival rate {rate} kb/s exceeds the top latency level {top} kb/s")]
    CapacityViolation { rate: f64, top: f64 },
    #[error("negative arrival rate {0}")]
    NegativeRate(f64),
    #[error("node {node} MCU load {load} MHz exceeds capacity {capacity} MHz")]
    McuExceeded { node: NodeId, load: f64, capacity: f64 },
    #[error("traffic on link {0} which is not part of the network")]
    UnknownLink(Edge),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyLevel {
    pub lambda_kbps: f64,
    pub w_ms: f64,
}

/// Discretized arrival rate to mean latency map.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyTable {
    levels: Vec<LatencyLevel>,
    capacity: f64,
    packet_size: Option<f64>,
}

/// Builds the M/M/1 table with levels at `step, 2*step, ...` below `capacity`.
///
/// Service rate is `capacity / packet_bits` packets per second and the latency of a level is
/// the mean sojourn time `1 / (mu - lambda)` in milliseconds.
pub fn build_latency_table(capacity: f64, packet_size: f64, step: f64) -> Result<LatencyTable, CostError> {
    if !(step > 0.0 && step < capacity) {
        return Err(CostError::BadStep { step, capacity });
    }
    let kbit_per_packet = packet_size * 8.0 / 1000.0;
    let mu = capacity / kbit_per_packet;
    let mut levels = Vec::new();
    let mut k = 1u32;
    loop {
        let lambda = k as f64 * step;
        if lambda >= capacity {
            break;
        }
        let lambda_pkt = lambda / kbit_per_packet;
        levels.push(LatencyLevel { lambda_kbps: lambda, w_ms: 1000.0 / (mu - lambda_pkt) });
        k += 1;
    }
    let mut table = LatencyTable::from_levels(levels, capacity)?;
    table.packet_size = Some(packet_size);
    Ok(table)
}

impl LatencyTable {
    /// Validates a user supplied table.
    pub fn from_levels(levels: Vec<LatencyLevel>, capacity: f64) -> Result<Self, CostError> {
        if levels.is_empty() {
            return Err(CostError::EmptyTable);
        }
        for (i, w) in levels.windows(2).enumerate() {
            if !(w[1].lambda_kbps > w[0].lambda_kbps && w[1].w_ms > w[0].w_ms) {
                return Err(CostError::NotAscending(i + 1));
            }
        }
        for (index, l) in levels.iter().enumerate() {
            if !(l.lambda_kbps > 0.0 && l.w_ms >= 0.0) {
                return Err(CostError::NotAscending(index));
            }
            if !(l.lambda_kbps < capacity) {
                return Err(CostError::Unstable { index, lambda: l.lambda_kbps, capacity });
            }
        }
        Ok(LatencyTable { levels, capacity, packet_size: None })
    }

    pub fn levels(&self) -> &[LatencyLevel] {
        &self.levels
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn packet_size(&self) -> Option<f64> {
        self.packet_size
    }

    /// Highest arrival rate the table can price.
    pub fn top_rate(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.lambda_kbps)
    }

    /// Mean latency at `arrival_rate`: the latency of the smallest level at or above the
    /// rate, and zero for an idle node.
    pub fn node_latency(&self, arrival_rate: f64) -> Result<f64, CostError> {
        if arrival_rate < -RATE_TOL {
            return Err(CostError::NegativeRate(arrival_rate));
        }
        if arrival_rate <= RATE_TOL {
            return Ok(0.0);
        }
        let idx = self.levels.partition_point(|l| l.lambda_kbps < arrival_rate - RATE_TOL);
        self.levels
            .get(idx)
            .map(|l| l.w_ms)
            .ok_or(CostError::CapacityViolation { rate: arrival_rate, top: self.top_rate() })
    }
}

/// Weights of latency, processing power and network power in the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    /// per ms
    pub alpha: f64,
    /// per mW
    pub beta: f64,
    /// per mW
    pub gamma: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights { alpha: 30.0, beta: 1.0, gamma: 1.0 }
    }
}

impl ObjectiveWeights {
    pub fn is_valid(&self) -> bool {
        self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma >= 0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostBreakdown {
    /// Total latency, ms.
    pub tl: f64,
    /// Total processing power, mW.
    pub tpp: f64,
    /// Total network power, mW.
    pub tnp: f64,
    pub objective: f64,
}

impl CostBreakdown {
    /// Processing plus network power.
    pub fn power(&self) -> f64 {
        self.tpp + self.tnp
    }
}

pub fn total_objective(weights: &ObjectiveWeights, tl: f64, tpp: f64, tnp: f64) -> CostBreakdown {
    CostBreakdown {
        tl,
        tpp,
        tnp,
        objective: weights.alpha * tl + weights.beta * tpp + weights.gamma * tnp,
    }
}

pub fn processing_power(node: &IoTNode, hosted: &[&VirtualNode]) -> Result<f64, CostError> {
    if hosted.is_empty() {
        return Ok(0.0);
    }
    let load: f64 = hosted.iter().map(|v| v.mcu).sum();
    if load > node.mcu_capacity * (1.0 + 1e-12) {
        return Err(CostError::McuExceeded { node: node.id, load, capacity: node.mcu_capacity });
    }
    Ok(node.idle_cpu_power
        + hosted
            .iter()
            .map(|v| node.max_cpu_power * (v.mcu / node.mcu_capacity))
            .sum::<f64>())
}

/// Network power per kb/s carried on `link`.
pub fn link_power_per_kbps(link: &IoTLink) -> f64 {
    2.0 * link.energy_per_bit + link.distance * link.distance * link.amplifier_factor
}

/// Directed link loads in kb/s.
pub type LinkTraffic = BTreeMap<Edge, f64>;

/// Network power of two traffic layers. Nodes are charged idle power when any incident
/// link carries traffic in either layer.
pub fn network_power(
    network: &PhysicalNetwork,
    traffic1: &LinkTraffic,
    traffic2: &LinkTraffic,
) -> Result<f64, CostError> {
    network_power_with(network, &BTreeSet::new(), traffic1, traffic2, 1.0)
}

/// Network power with explicit extra active nodes and a scale on the second layer's
/// traffic-proportional term. Nodes in `routed` pay idle power even when their traffic is
/// scaled to zero (a reserved path still keeps its radios up).
pub fn network_power_with(
    network: &PhysicalNetwork,
    routed: &BTreeSet<NodeId>,
    traffic1: &LinkTraffic,
    traffic2: &LinkTraffic,
    secondary_scale: f64,
) -> Result<f64, CostError> {
    let mut active: BTreeSet<NodeId> = routed.clone();
    let mut proportional = 0.0;
    for (traffic, scale) in [(traffic1, 1.0), (traffic2, secondary_scale)] {
        for (&edge, &kbps) in traffic {
            let link = network.link(edge).ok_or(CostError::UnknownLink(edge))?;
            if kbps > 0.0 {
                active.insert(edge.0);
                active.insert(edge.1);
                proportional += scale * kbps * link_power_per_kbps(link);
            }
        }
    }
    let idle: f64 = active
        .iter()
        .map(|&n| network.node(n).map_or(0.0, |node| node.idle_net_power))
        .sum();
    Ok(idle + proportional)
}
