//! Builds the embedding MILP for a [`Problem`].
//!
//! Reductions that keep every optimum:
//! * link-embedding variables exist only for host pairs `(c, d)`, `c != d`, where `c` can
//!   host the tail and `d` the head of some virtual link;
//! * commodity flow variables exist only for such pairs and never enter the source or
//!   leave the destination;
//! * latency levels above the largest arrival a node can see are dropped.

use std::collections::{BTreeMap, BTreeSet};

use super::instance::{Family, LinExpr, MilpInstance, Relation, Tag, Var, VarKind};
use super::Hint;
use crate::domain::{BusinessProcess, Edge, NodeId};
use crate::resilience::replica_id;
use crate::solution::{Pair, Problem};

/// Large constant linking continuous flows to binary indicators.
pub const BIG_M: f64 = 1e8;

const PRIO_NE: u8 = 0;
const PRIO_LE: u8 = 1;
const PRIO_ROUTE: u8 = 2;
const PRIO_MODULE: u8 = 3;
const PRIO_AUX: u8 = 4;

/// Handles of the model's variables, keyed by model indices.
#[derive(Clone, Debug, Default)]
pub struct VarIndex {
    /// (bp index, vnode index, node) -> placement indicator
    pub ne: BTreeMap<(usize, usize, NodeId), Var>,
    /// (bp index, vlink index, c, d) -> link embedding indicator
    pub le: BTreeMap<(usize, usize, NodeId, NodeId), Var>,
    pub pair_demand: BTreeMap<Pair, Var>,
    pub flow1: BTreeMap<(Pair, Edge), Var>,
    pub ind1: BTreeMap<(Pair, Edge), Var>,
    pub flow2: BTreeMap<(Pair, Edge), Var>,
    pub ind2: BTreeMap<(Pair, Edge), Var>,
    pub link1: BTreeMap<Edge, Var>,
    pub link2: BTreeMap<Edge, Var>,
    pub arrival: BTreeMap<NodeId, Var>,
    pub latency: BTreeMap<NodeId, Var>,
    pub level: BTreeMap<(NodeId, usize), Var>,
    pub pm: BTreeMap<NodeId, Var>,
    pub tm: BTreeMap<NodeId, Var>,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub instance: MilpInstance,
    pub index: VarIndex,
    pub pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CompileError {
    #[error("request cannot be embedded: {}", hints_text(.0))]
    Infeasible(Vec<Hint>),
}

fn hints_text(h: &[Hint]) -> String {
    h.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("; ")
}

fn fam(f: Family) -> Tag {
    Tag::Family(f)
}

/// Pairs `(a, a~r)` of vnode indices whose requirements match and whose virtual links map
/// onto each other when the two are swapped. Swapping their hosts keeps every cost.
fn interchangeable(bp: &BusinessProcess) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, va) in bp.nodes.iter().enumerate() {
        let Some(b) = bp.vnode_index(&replica_id(&va.id)) else { continue };
        let vb = &bp.nodes[b];
        if (&va.function, &va.zone, va.mcu, va.ram, va.kind) != (&vb.function, &vb.zone, vb.mcu, vb.ram, vb.kind) {
            continue;
        }
        let swap = |id: &str| -> String {
            if id == va.id {
                vb.id.clone()
            } else if id == vb.id {
                va.id.clone()
            } else {
                id.to_string()
            }
        };
        let key = |from: &str, to: &str, d: f64| (from.to_string(), to.to_string(), d.to_bits());
        let mut orig: Vec<_> = bp.links.iter().map(|l| key(&l.from, &l.to, l.demand)).collect();
        let mut swapped: Vec<_> = bp.links.iter().map(|l| key(&swap(&l.from), &swap(&l.to), l.demand)).collect();
        orig.sort();
        swapped.sort();
        if orig == swapped {
            out.push((a, b));
        }
    }
    out
}

pub fn compile(problem: &Problem) -> Result<Compiled, CompileError> {
    let hints = super::hints::placement_hints(problem);
    if !hints.is_empty() {
        return Err(CompileError::Infeasible(hints));
    }
    let net = &problem.network;
    let req = &problem.request;
    let mode = problem.scheme.traffic_mode;
    let share = mode.path_share();
    let dual = mode.is_dual();
    let w = problem.weights;
    let mut m = MilpInstance::new();
    let mut ix = VarIndex::default();
    let add = |m: &mut MilpInstance, name: String, kind, upper, prio| {
        m.add_var(name, kind, upper, prio).expect("model variable names are unique")
    };
    let bin = VarKind::Binary;
    let cont = VarKind::Continuous;

    // node embedding
    let mut hosts: BTreeMap<(usize, usize), BTreeSet<NodeId>> = BTreeMap::new();
    for (i, bp) in req.bps.iter().enumerate() {
        for (a, vn) in bp.nodes.iter().enumerate() {
            hosts.insert((i, a), problem.hosts(vn).into_iter().collect());
            for node in net.nodes() {
                let c = node.id;
                let ne = add(&mut m, format!("NE_{i}_{a}_{c}"), bin, None, PRIO_NE);
                ix.ne.insert((i, a, c), ne);
                m.objective.add(ne, w.beta * node.max_cpu_power * vn.mcu / node.mcu_capacity);
                let f = add(&mut m, format!("F_{i}_{a}_{c}"), bin, None, PRIO_AUX);
                m.add_constraint(LinExpr::new().with(ne, 1.0).with(f, -1.0), Relation::Eq, 0.0, fam(Family::FunctionLink));
                let has = if node.provides(&vn.function) { 1.0 } else { 0.0 };
                m.add_constraint(LinExpr::new().with(f, 1.0), Relation::Le, has, fam(Family::FunctionAvailable));
                if let Some(zone) = &vn.zone {
                    let z = add(&mut m, format!("Z_{i}_{a}_{c}"), bin, None, PRIO_AUX);
                    m.add_constraint(LinExpr::new().with(ne, 1.0).with(z, -1.0), Relation::Eq, 0.0, fam(Family::ZoneLink));
                    let inz = if node.zone == *zone { 1.0 } else { 0.0 };
                    m.add_constraint(LinExpr::new().with(z, 1.0), Relation::Le, inz, fam(Family::ZoneAvailable));
                }
            }
            let mut e = LinExpr::new();
            for c in net.node_ids() {
                e.add(ix.ne[&(i, a, c)], 1.0);
            }
            m.add_constraint(e, Relation::Eq, 1.0, fam(Family::Assignment));
        }
        if problem.scheme.coexistence {
            for c in net.node_ids() {
                let mut e = LinExpr::new();
                for a in 0..bp.nodes.len() {
                    e.add(ix.ne[&(i, a, c)], 1.0);
                }
                m.add_constraint(e, Relation::Le, 1.0, fam(Family::Coexistence));
            }
        }
    }
    // Interchangeable replicas: order their hosts by node id.
    for (i, bp) in req.bps.iter().enumerate() {
        for (a, b) in interchangeable(bp) {
            let mut e = LinExpr::new();
            for c in net.node_ids() {
                e.add(ix.ne[&(i, a, c)], c.0 as f64);
                e.add(ix.ne[&(i, b, c)], -(c.0 as f64));
            }
            let rhs = if problem.scheme.coexistence { -1.0 } else { 0.0 };
            m.add_constraint(e, Relation::Le, rhs, Tag::Aux);
        }
    }
    for node in net.nodes() {
        let c = node.id;
        let placed: Vec<(Var, f64, f64)> = req
            .bps
            .iter()
            .enumerate()
            .flat_map(|(i, bp)| bp.nodes.iter().enumerate().map(move |(a, vn)| (i, a, vn)))
            .map(|(i, a, vn)| (ix.ne[&(i, a, c)], vn.mcu, vn.ram))
            .collect();
        if placed.is_empty() {
            continue;
        }
        let pm = add(&mut m, format!("PM_{c}"), bin, None, PRIO_MODULE);
        ix.pm.insert(c, pm);
        m.objective.add(pm, w.beta * node.idle_cpu_power);
        let mut lower = LinExpr::new();
        let mut upper = LinExpr::new();
        let mut mcu = LinExpr::new();
        let mut ram = LinExpr::new();
        for &(ne, vm, vr) in &placed {
            lower.add(ne, 1.0);
            upper.add(ne, 1.0);
            mcu.add(ne, vm);
            ram.add(ne, vr);
        }
        lower.add(pm, -1.0);
        upper.add(pm, -BIG_M);
        m.add_constraint(lower, Relation::Ge, 0.0, fam(Family::ProcessingOnLower));
        m.add_constraint(upper, Relation::Le, 0.0, fam(Family::ProcessingOnUpper));
        // disaggregated form, same integer points
        for &(ne, _, _) in &placed {
            m.add_constraint(LinExpr::new().with(ne, 1.0).with(pm, -1.0), Relation::Le, 0.0, fam(Family::ProcessingOnUpper));
        }
        m.add_constraint(mcu, Relation::Le, node.mcu_capacity, fam(Family::McuCapacity));
        m.add_constraint(ram, Relation::Le, node.ram_capacity, fam(Family::RamCapacity));
    }

    // link embedding and pair demands
    let mut pair_links: BTreeMap<Pair, Vec<(Var, f64)>> = BTreeMap::new();
    // per positive virtual link and host: sum of LE leaving (tail) or entering (head) it
    let mut tail_sums: Vec<(NodeId, LinExpr)> = Vec::new();
    let mut head_sums: Vec<(NodeId, LinExpr)> = Vec::new();
    // (c, d) -> (bp, tail, head) -> demand of the virtual links between those vnodes
    let mut pair_ends: BTreeMap<Pair, BTreeMap<(usize, usize, usize), f64>> = BTreeMap::new();
    let mut min_demand = f64::INFINITY;
    for (i, bp) in req.bps.iter().enumerate() {
        for (k, vl) in bp.links.iter().enumerate() {
            if vl.demand > 0.0 {
                min_demand = min_demand.min(vl.demand);
            }
            let (Some(a), Some(b)) = (bp.vnode_index(&vl.from), bp.vnode_index(&vl.to)) else {
                continue;
            };
            for &c in &hosts[&(i, a)] {
                for &d in &hosts[&(i, b)] {
                    if c == d {
                        continue;
                    }
                    let x = add(&mut m, format!("X_{i}_{k}_{c}_{d}"), bin, None, PRIO_LE);
                    let le = add(&mut m, format!("LE_{i}_{k}_{c}_{d}"), bin, None, PRIO_LE);
                    ix.le.insert((i, k, c, d), le);
                    let e = LinExpr::new()
                        .with(ix.ne[&(i, a, c)], 1.0)
                        .with(ix.ne[&(i, b, d)], 1.0)
                        .with(x, -1.0)
                        .with(le, -2.0);
                    m.add_constraint(e, Relation::Eq, 0.0, fam(Family::LinkEmbedding));
                    pair_links.entry((c, d)).or_default().push((le, vl.demand));
                    *pair_ends.entry((c, d)).or_default().entry((i, a, b)).or_insert(0.0) += vl.demand;
                }
            }
            // Each placed end has exactly one partner host unless both ends share a node:
            // sum_d LE(c, d) lies between NE(a, c) - NE(b, c) and NE(a, c), and likewise
            // from the head side. Coexistence rules out the shared node.
            for (end, other, outgoing) in [(a, b, true), (b, a, false)] {
                for &c in &hosts[&(i, end)] {
                    let mut e = LinExpr::new();
                    for (&(bi, ki, x, y), &le) in ix.le.range((i, k, NodeId(0), NodeId(0))..=(i, k, NodeId(u32::MAX), NodeId(u32::MAX))) {
                        debug_assert!(bi == i && ki == k);
                        if (outgoing && x == c) || (!outgoing && y == c) {
                            e.add(le, 1.0);
                        }
                    }
                    if vl.demand > 0.0 {
                        if outgoing { &mut tail_sums } else { &mut head_sums }.push((c, e.clone()));
                    }
                    let upper = e.clone().with(ix.ne[&(i, end, c)], -1.0);
                    let mut lower = e.with(ix.ne[&(i, end, c)], -1.0);
                    if !problem.scheme.coexistence {
                        lower.add(ix.ne[&(i, other, c)], 1.0);
                    }
                    m.add_constraint(upper, Relation::Le, 0.0, fam(Family::LinkEmbedding));
                    m.add_constraint(lower, Relation::Ge, 0.0, fam(Family::LinkEmbedding));
                }
            }
        }
    }
    let eps = if min_demand.is_finite() { share * min_demand } else { 1.0 };
    let pairs: Vec<Pair> = pair_links.keys().copied().collect();
    let mut pair_bound = BTreeMap::new();
    for (&(c, d), les) in &pair_links {
        // Under coexistence a host pair serves one (tail, head) vnode pair per BP.
        let mut per_bp: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(i, _, _), &dem) in &pair_ends[&(c, d)] {
            let slot = per_bp.entry(i).or_insert(0.0);
            *slot = if problem.scheme.coexistence { slot.max(dem) } else { *slot + dem };
        }
        let bound: f64 = per_bp.values().sum();
        debug_assert!(bound <= les.iter().map(|&(_, dem)| dem).sum::<f64>() + 1e-9);
        pair_bound.insert((c, d), bound);
        let rp = add(&mut m, format!("RP_{c}_{d}"), cont, Some(bound), 9);
        ix.pair_demand.insert((c, d), rp);
        let mut e = LinExpr::new().with(rp, 1.0);
        for &(le, dem) in les {
            e.add(le, -dem);
        }
        m.add_constraint(e, Relation::Eq, 0.0, fam(Family::PairDemand));
    }

    // routing layers
    let arcs: Vec<Edge> = net.edges().collect();
    let mut link_bound: BTreeMap<Edge, f64> = BTreeMap::new();
    let layers: &[u8] = if dual { &[1, 2] } else { &[1] };
    // per (pair, layer): indicator sums leaving and entering each node
    let mut pair_out: Vec<(NodeId, LinExpr)> = Vec::new();
    let mut pair_in: Vec<(NodeId, LinExpr)> = Vec::new();
    for &layer in layers {
        let (conservation, traffic, lower_f, upper_f, nosplit) = match (layer, mode.path_share() < 1.0) {
            (1, false) => (Family::PrimaryConservation, Family::PrimaryLinkTraffic, Family::PrimaryIndicatorLower, Family::PrimaryIndicatorUpper, Family::PrimaryNoSplit),
            (1, true) => (Family::SplitPrimaryConservation, Family::PrimaryLinkTraffic, Family::PrimaryIndicatorLower, Family::PrimaryIndicatorUpper, Family::PrimaryNoSplit),
            (_, false) => (Family::SecondaryConservation, Family::SecondaryLinkTraffic, Family::SecondaryIndicatorLower, Family::SecondaryIndicatorUpper, Family::SecondaryNoSplit),
            (_, true) => (Family::SplitSecondaryConservation, Family::SecondaryLinkTraffic, Family::SecondaryIndicatorLower, Family::SecondaryIndicatorUpper, Family::SecondaryNoSplit),
        };
        let mut per_link: BTreeMap<Edge, LinExpr> = BTreeMap::new();
        for &(c, d) in &pairs {
            let ub = share * pair_bound[&(c, d)];
            let rp = ix.pair_demand[&(c, d)];
            let mut out_of: BTreeMap<NodeId, LinExpr> = BTreeMap::new();
            let mut in_to: BTreeMap<NodeId, LinExpr> = BTreeMap::new();
            let mut flows: BTreeMap<NodeId, LinExpr> = BTreeMap::new();
            for &e in &arcs {
                if e.1 == c || e.0 == d {
                    continue;
                }
                let (f, g) = (e.0, e.1);
                let r = add(&mut m, format!("R{layer}_{c}_{d}_{f}_{g}"), cont, Some(ub), 9);
                let ind = add(&mut m, format!("I{layer}_{c}_{d}_{f}_{g}"), bin, None, PRIO_ROUTE);
                let (fmap, imap) = if layer == 1 { (&mut ix.flow1, &mut ix.ind1) } else { (&mut ix.flow2, &mut ix.ind2) };
                fmap.insert(((c, d), e), r);
                imap.insert(((c, d), e), ind);
                m.add_constraint(LinExpr::new().with(r, 1.0).with(ind, -eps), Relation::Ge, 0.0, fam(lower_f));
                m.add_constraint(LinExpr::new().with(r, 1.0).with(ind, -BIG_M), Relation::Le, 0.0, fam(upper_f));
                flows.entry(f).or_default().add(r, 1.0);
                flows.entry(g).or_default().add(r, -1.0);
                out_of.entry(f).or_default().add(ind, 1.0);
                in_to.entry(g).or_default().add(ind, 1.0);
                per_link.entry(e).or_default().add(r, 1.0);
                *link_bound.entry(e).or_insert(0.0) += ub;
            }
            for node in net.node_ids() {
                let mut e = flows.remove(&node).unwrap_or_default();
                if node == c {
                    e.add(rp, -share);
                } else if node == d {
                    e.add(rp, share);
                }
                if !e.terms.is_empty() {
                    m.add_constraint(e, Relation::Eq, 0.0, fam(conservation));
                }
            }
            for (n, e) in out_of {
                m.add_constraint(e.clone(), Relation::Le, 1.0, fam(nosplit));
                pair_out.push((n, e));
            }
            for (n, e) in in_to {
                pair_in.push((n, e));
            }
        }
        for (e, mut expr) in per_link {
            let v = add(&mut m, format!("TL{layer}_{}_{}", e.0, e.1), cont, None, 9);
            if layer == 1 {
                ix.link1.insert(e, v);
            } else {
                ix.link2.insert(e, v);
            }
            expr.add(v, -1.0);
            m.add_constraint(expr, Relation::Eq, 0.0, fam(traffic));
            let link = net.link(e).expect("arcs come from the network");
            let scale = if layer == 1 { 1.0 } else { problem.scheme.secondary_power_scale() };
            m.objective.add(v, w.gamma * scale * crate::cost_model::link_power_per_kbps(link));
        }
    }
    // upper bounds on link traffic
    for map in [&ix.link1, &ix.link2] {
        for (e, v) in map {
            m.vars[v.0].upper = Some(link_bound[e]);
        }
    }
    if dual {
        for (key, &i1) in &ix.ind1 {
            let i2 = ix.ind2[key];
            m.add_constraint(LinExpr::new().with(i1, 1.0).with(i2, 1.0), Relation::Le, 1.0, fam(Family::Disjointness));
            // flow form of the same rule: one layer's share of the pair demand per link
            let rp = ix.pair_demand[&key.0];
            let e = LinExpr::new().with(ix.flow1[key], 1.0).with(ix.flow2[key], 1.0).with(rp, -share);
            m.add_constraint(e, Relation::Le, 0.0, fam(Family::Disjointness));
        }
    }

    // network modules
    let mut incident: BTreeMap<NodeId, Vec<Var>> = BTreeMap::new();
    for map in [&ix.ind1, &ix.ind2] {
        for (&(_, e), &v) in map {
            incident.entry(e.0).or_default().push(v);
            incident.entry(e.1).or_default().push(v);
        }
    }
    for (n, inds) in incident {
        let node = net.node(n).expect("node of an arc");
        let tm = add(&mut m, format!("TM_{n}"), bin, None, PRIO_MODULE);
        ix.tm.insert(n, tm);
        m.objective.add(tm, w.gamma * node.idle_net_power);
        let mut lower = LinExpr::new();
        let mut upper = LinExpr::new();
        for &v in &inds {
            lower.add(v, 1.0);
            upper.add(v, 1.0);
        }
        lower.add(tm, -1.0);
        upper.add(tm, -BIG_M);
        m.add_constraint(lower, Relation::Ge, 0.0, fam(Family::NetworkOnLower));
        m.add_constraint(upper, Relation::Le, 0.0, fam(Family::NetworkOnUpper));
    }
    // A path leaves and enters a node at most once, so each per-pair sum is bounded by
    // the module indicator. Walks that revisit a node are cut off; they never beat the
    // simple path obtained by removing the loop.
    for (n, e) in pair_out.iter().chain(&pair_in) {
        let tm = ix.tm[n];
        m.add_constraint(e.clone().with(tm, -1.0), Relation::Le, 0.0, fam(Family::NetworkOnUpper));
    }
    // endpoints of embedded traffic have their radios on
    for (n, e) in tail_sums.iter().chain(&head_sums) {
        if let Some(&tm) = ix.tm.get(n) {
            m.add_constraint(e.clone().with(tm, -1.0), Relation::Le, 0.0, fam(Family::NetworkOnUpper));
        }
    }

    // arrivals and latency
    let levels = problem.table.levels();
    for node in net.nodes() {
        let f = node.id;
        let incoming: Vec<(Var, f64)> = [&ix.link1, &ix.link2]
            .into_iter()
            .flat_map(|map| map.iter().filter(|(e, _)| e.1 == f).map(|(e, &v)| (v, link_bound[e])))
            .collect();
        if incoming.is_empty() {
            continue;
        }
        let max_in: f64 = incoming.iter().map(|&(_, b)| b).sum();
        let trfn = add(&mut m, format!("TRFN_{f}"), cont, Some(max_in), 9);
        ix.arrival.insert(f, trfn);
        let mut e = LinExpr::new();
        for &(v, _) in &incoming {
            e.add(v, 1.0);
        }
        e.add(trfn, -1.0);
        m.add_constraint(e, Relation::Eq, 0.0, fam(Family::Arrival));
        m.add_constraint(LinExpr::new().with(trfn, 1.0), Relation::Le, node.traffic_capacity, fam(Family::NodeCapacity));
        let keep = levels
            .iter()
            .position(|l| l.lambda_kbps >= max_in)
            .map_or(levels.len(), |p| p + 1);
        let top_w = levels[..keep].last().map_or(0.0, |l| l.w_ms);
        let wv = add(&mut m, format!("W_{f}"), cont, Some(top_w), 9);
        ix.latency.insert(f, wv);
        m.objective.add(wv, w.alpha);
        let mut cover = LinExpr::new();
        let mut one = LinExpr::new();
        let mut lat = LinExpr::new().with(wv, 1.0);
        for (j, l) in levels[..keep].iter().enumerate() {
            let li = add(&mut m, format!("LI_{f}_{j}"), bin, None, PRIO_MODULE);
            ix.level.insert((f, j), li);
            cover.add(li, l.lambda_kbps);
            one.add(li, 1.0);
            lat.add(li, -l.w_ms);
        }
        cover.add(trfn, -1.0);
        m.add_constraint(cover, Relation::Ge, 0.0, fam(Family::ArrivalLevel));
        m.add_constraint(one.clone(), Relation::Le, 1.0, fam(Family::OneLevel));
        // any entering path or embedded link head makes the arrival positive, which
        // needs some level
        for (_, e) in pair_in.iter().chain(&head_sums).filter(|(n, _)| *n == f) {
            let mut row = e.clone();
            for &(v, c) in &one.terms {
                row.add(v, -c);
            }
            m.add_constraint(row, Relation::Le, 0.0, fam(Family::ArrivalLevel));
        }
        m.add_constraint(lat, Relation::Eq, 0.0, fam(Family::NodeLatency));
    }

    m.objective = m.objective.normalized();
    debug_assert!(m.check_declared().is_ok());
    log::debug!(
        "compiled {} variables ({} binary), {} constraints, {} pairs",
        m.vars.len(),
        m.binary_count(),
        m.constraints.len(),
        pairs.len()
    );
    Ok(Compiled { instance: m, index: ix, pairs })
}
