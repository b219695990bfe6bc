//! Resilient, energy- and latency-aware embedding of virtual IoT services into a
//! physical wireless-node network.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] holds the physical and virtual layers, scenario files, validation and the
//!   seeded topology generator.
//! * [`cost_model`] evaluates processing power, network power, queuing latency and the
//!   weighted objective for any candidate embedding.
//! * [`resilience`] describes the node/traffic resilience schemes, transforms requests for
//!   node redundancy and evaluates deliveries under link failures and packet loss.
//! * [`solution`] assembles a concrete [`EmbeddingSolution`] from an assignment and routes.
//! * [`milp`] compiles a problem into a mixed-integer linear program, writes it in LP
//!   format, solves it exactly by branch and bound and independently checks solutions.
//! * [`heuristic`] is the fast greedy + disjoint-path + local-search embedder.

pub mod cost_model;
pub mod domain;
pub mod graph;
pub mod heuristic;
pub mod milp;
pub mod resilience;
pub mod solution;
#[cfg(test)]
mod testkit;

pub use cost_model::{CostBreakdown, LatencyTable, ObjectiveWeights};
pub use domain::{
    BusinessProcess, Edge, IoTLink, IoTNode, NodeId, PhysicalNetwork, Scenario, ServiceRequest,
    VirtualLink, VirtualNode, VnodeKind,
};
pub use resilience::{NodeLevel, SchemeSpec, TrafficMode};
pub use solution::{EmbeddingSolution, Problem, Route};
