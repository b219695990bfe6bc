//! Cheap necessary conditions for feasibility, each tied to the constraint family that
//! fails when it does not hold.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::instance::Family;
use crate::domain::NodeId;
use crate::graph::disjoint_path_count;
use crate::solution::Problem;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hint {
    pub family: Family,
    pub message: String,
}

impl fmt::Display for Hint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "constraint {} ({}): {}", self.family, self.family.describe(), self.message)
    }
}

/// Virtual nodes whose function or zone no physical node offers.
pub fn placement_hints(problem: &Problem) -> Vec<Hint> {
    let mut out = Vec::new();
    let nodes = problem.network.nodes();
    for (bp, vn) in problem.request.vnodes() {
        let with_fn: Vec<_> = nodes.iter().filter(|n| n.provides(&vn.function)).collect();
        if with_fn.is_empty() {
            out.push(Hint {
                family: Family::FunctionAvailable,
                message: format!("no node provides function {:?} required by {}/{}", vn.function, bp.id, vn.id),
            });
        } else if let Some(zone) = &vn.zone {
            if !with_fn.iter().any(|n| n.zone == *zone) {
                out.push(Hint {
                    family: Family::ZoneAvailable,
                    message: format!(
                        "no node in zone {zone:?} provides function {:?} required by {}/{}",
                        vn.function, bp.id, vn.id
                    ),
                });
            }
        }
    }
    out
}

/// Bipartite matching of one BP's virtual nodes onto distinct hosts.
fn distinct_hosts_possible(cands: &[Vec<NodeId>]) -> bool {
    fn try_assign(v: usize, cands: &[Vec<NodeId>], owner: &mut Vec<Option<usize>>, seen: &mut Vec<bool>) -> bool {
        for &c in &cands[v] {
            if seen[c.index()] {
                continue;
            }
            seen[c.index()] = true;
            if owner[c.index()].is_none_or(|w| try_assign(w, cands, owner, seen)) {
                owner[c.index()] = Some(v);
                return true;
            }
        }
        false
    }
    let n = cands.iter().flatten().map(|c| c.index() + 1).max().unwrap_or(0);
    let mut owner = vec![None; n];
    (0..cands.len()).all(|v| try_assign(v, cands, &mut owner, &mut vec![false; n]))
}

/// All hints that prove infeasibility, checked from cheapest to most specific.
pub fn infeasibility_hints(problem: &Problem) -> Vec<Hint> {
    let mut out = placement_hints(problem);
    if !out.is_empty() {
        return out;
    }
    let net = &problem.network;
    for (bp, vn) in problem.request.vnodes() {
        if problem.hosts(vn).is_empty() {
            let family = if net.nodes().iter().any(|n| n.provides(&vn.function) && vn.mcu <= n.mcu_capacity) {
                Family::RamCapacity
            } else {
                Family::McuCapacity
            };
            out.push(Hint { family, message: format!("{}/{} exceeds the capacity of every matching node", bp.id, vn.id) });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for bp in &problem.request.bps {
        let cands: Vec<Vec<NodeId>> = bp.nodes.iter().map(|vn| problem.hosts(vn)).collect();
        if problem.scheme.coexistence && !distinct_hosts_possible(&cands) {
            out.push(Hint {
                family: Family::Coexistence,
                message: format!("{} has more virtual nodes than distinct matching hosts", bp.id),
            });
            continue;
        }
        let need = if problem.scheme.traffic_mode.is_dual() { 2 } else { 1 };
        for vl in &bp.links {
            if vl.demand <= 0.0 {
                continue;
            }
            let (Some(a), Some(b)) = (bp.vnode_index(&vl.from), bp.vnode_index(&vl.to)) else { continue };
            let ha: BTreeSet<_> = cands[a].iter().copied().collect();
            let hb: BTreeSet<_> = cands[b].iter().copied().collect();
            if !problem.scheme.coexistence && !ha.is_disjoint(&hb) {
                continue;
            }
            let ok = ha.iter().any(|&c| hb.iter().any(|&d| c != d && disjoint_path_count(net, c, d, need) >= need));
            if !ok {
                let family = if need == 2 { Family::Disjointness } else { Family::PrimaryConservation };
                let what = if need == 2 { "two link-disjoint paths" } else { "a path" };
                out.push(Hint {
                    family,
                    message: format!("no candidate hosts of {}/{}->{} are joined by {what}", bp.id, vl.from, vl.to),
                });
            }
        }
    }
    out
}
