//! Delivery evaluation of a fixed embedding under each traffic mode, with and without a
//! link failure, and expected energy under packet loss.
//!
//! Energies are network power over effective per-link traffic. A failed attempt is charged
//! in full and the undelivered part is resent: on the same path for single-path routing, on
//! the backup for RDTR and on the surviving half for STR. `failure_fraction` is the share of
//! the transfer completed before the failure, so `f = 1` reproduces the no-failure energy.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::TrafficMode;
use crate::cost_model::{network_power_with, CostError, LatencyTable, LinkTraffic};
use crate::domain::{Edge, NodeId, PhysicalNetwork};
use crate::solution::{EmbeddingSolution, Pair, Route};

/// Inputs shared by all evaluations.
#[derive(Clone, Copy, Debug)]
pub struct SimContext<'a> {
    pub network: &'a PhysicalNetwork,
    pub table: &'a LatencyTable,
    pub keep_alive_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeliveryOutcome {
    /// mW over delivered and resent traffic.
    pub energy: f64,
    /// ms, slowest commodity.
    pub delivery_time: f64,
    pub delivered_fraction: f64,
    /// Set when a failure hit some commodity: the delivery time then excludes detection
    /// and recovery delays.
    pub queuing_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdrRow {
    pub p: f64,
    pub e_rdtr: f64,
    pub e_str: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{mode} needs a secondary path for commodity {}->{}", .pair.0, .pair.1)]
    ModeMismatch { mode: TrafficMode, pair: Pair },
    #[error("failed link {link} lies on both paths of commodity {}->{}", .pair.0, .pair.1)]
    LinkOnBothRoutes { link: Edge, pair: Pair },
    #[error("failure fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("delivery ratio {0} outside (0, 1]")]
    BadPdr(f64),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// One commodity's paths and full demand.
struct Flow<'s> {
    demand: f64,
    a: &'s Route,
    b: Option<&'s Route>,
}

fn flows<'s>(s: &'s EmbeddingSolution, mode: TrafficMode) -> Result<Vec<Flow<'s>>, EvalError> {
    let share = s.scheme.traffic_mode.path_share();
    s.routes1
        .iter()
        .map(|a| {
            let b = s.route2(a.pair());
            if mode.is_dual() && b.is_none() {
                return Err(EvalError::ModeMismatch { mode, pair: a.pair() });
            }
            Ok(Flow { demand: a.flow / share, a, b: if mode.is_dual() { b } else { None } })
        })
        .collect()
}

fn add(m: &mut LinkTraffic, r: &Route, kbps: f64) {
    if kbps > 0.0 {
        for &e in &r.edges {
            *m.entry(e).or_insert(0.0) += kbps;
        }
    }
}

fn routed(fs: &[Flow<'_>]) -> BTreeSet<NodeId> {
    fs.iter()
        .flat_map(|f| std::iter::once(f.a).chain(f.b))
        .flat_map(|r| r.edges.iter().flat_map(|e| [e.0, e.1]))
        .collect()
}

/// Per-path traffic (A, B) of a commodity at rest.
fn rest_load(mode: TrafficMode, d: f64, ka: f64) -> (f64, f64) {
    match mode {
        TrafficMode::Single => (d, 0.0),
        TrafficMode::Rdtr => (d, ka * d),
        TrafficMode::Rptr => (d, d),
        TrafficMode::Str => (0.5 * d, 0.5 * d),
    }
}

fn energy(ctx: &SimContext<'_>, fs: &[Flow<'_>], loads: &[(f64, f64)]) -> Result<f64, CostError> {
    let mut t1 = LinkTraffic::new();
    let mut t2 = LinkTraffic::new();
    for (f, &(la, lb)) in fs.iter().zip(loads) {
        add(&mut t1, f.a, la);
        if let Some(b) = f.b {
            add(&mut t2, b, lb);
        }
    }
    network_power_with(ctx.network, &routed(fs), &t1, &t2, 1.0)
}

/// Queuing latency along a path: every node after the source.
fn path_latency(ctx: &SimContext<'_>, r: &Route, arrivals: &BTreeMap<NodeId, f64>) -> Result<f64, CostError> {
    r.edges
        .iter()
        .map(|e| ctx.table.node_latency(arrivals.get(&e.1).copied().unwrap_or(0.0)))
        .sum()
}

fn rest_arrivals(fs: &[Flow<'_>], loads: &[(f64, f64)]) -> BTreeMap<NodeId, f64> {
    let mut m = BTreeMap::new();
    for (f, &(la, lb)) in fs.iter().zip(loads) {
        for (r, l) in std::iter::once((f.a, la)).chain(f.b.map(|b| (b, lb))) {
            for e in &r.edges {
                *m.entry(e.1).or_insert(0.0) += l;
            }
        }
    }
    m
}

/// Which paths deliver a commodity's data.
#[derive(Clone, Copy)]
enum Delivery {
    A,
    B,
    Both,
}

fn delivery_time(
    ctx: &SimContext<'_>,
    fs: &[Flow<'_>],
    arrivals: &BTreeMap<NodeId, f64>,
    used: &[Delivery],
) -> Result<f64, CostError> {
    let mut worst: f64 = 0.0;
    for (f, u) in fs.iter().zip(used) {
        let la = path_latency(ctx, f.a, arrivals)?;
        let lb = match f.b {
            Some(b) => path_latency(ctx, b, arrivals)?,
            None => la,
        };
        let t = match u {
            Delivery::A => la,
            Delivery::B => lb,
            Delivery::Both => la.max(lb),
        };
        worst = worst.max(t);
    }
    Ok(worst)
}

fn default_delivery(mode: TrafficMode) -> Delivery {
    match mode {
        TrafficMode::Single | TrafficMode::Rdtr => Delivery::A,
        TrafficMode::Rptr | TrafficMode::Str => Delivery::Both,
    }
}

pub fn evaluate_no_failure(
    ctx: &SimContext<'_>,
    solution: &EmbeddingSolution,
    mode: TrafficMode,
) -> Result<DeliveryOutcome, EvalError> {
    let fs = flows(solution, mode)?;
    let loads: Vec<_> = fs.iter().map(|f| rest_load(mode, f.demand, ctx.keep_alive_fraction)).collect();
    let arrivals = rest_arrivals(&fs, &loads);
    let used = vec![default_delivery(mode); fs.len()];
    Ok(DeliveryOutcome {
        energy: energy(ctx, &fs, &loads)?,
        delivery_time: delivery_time(ctx, &fs, &arrivals, &used)?,
        delivered_fraction: 1.0,
        queuing_only: false,
    })
}

/// Delivery when the directed link `failed` breaks after `failure_fraction` of each
/// affected transfer has completed.
pub fn evaluate_failure(
    ctx: &SimContext<'_>,
    solution: &EmbeddingSolution,
    mode: TrafficMode,
    failed: Edge,
    failure_fraction: f64,
) -> Result<DeliveryOutcome, EvalError> {
    if !(0.0..=1.0).contains(&failure_fraction) {
        return Err(EvalError::BadFraction(failure_fraction));
    }
    let f = failure_fraction;
    let ka = ctx.keep_alive_fraction;
    let fs = flows(solution, mode)?;
    let rest: Vec<_> = fs.iter().map(|fl| rest_load(mode, fl.demand, ka)).collect();
    let mut loads = rest.clone();
    let mut used = vec![default_delivery(mode); fs.len()];
    let mut hit = false;
    for (i, fl) in fs.iter().enumerate() {
        let on_a = fl.a.edges.contains(&failed);
        let on_b = fl.b.is_some_and(|b| b.edges.contains(&failed));
        if on_a && on_b {
            return Err(EvalError::LinkOnBothRoutes { link: failed, pair: fl.a.pair() });
        }
        if !(on_a || on_b) {
            continue;
        }
        hit = true;
        let d = fl.demand;
        let undelivered = 1.0 - f;
        match (mode, on_a) {
            (TrafficMode::Single, _) => loads[i].0 = (1.0 + undelivered) * d,
            (TrafficMode::Rdtr, true) => {
                loads[i].1 = (undelivered + ka) * d;
                used[i] = Delivery::B;
            }
            (TrafficMode::Rdtr, false) | (TrafficMode::Rptr, _) => {}
            (TrafficMode::Str, true) => {
                loads[i].1 += undelivered * 0.5 * d;
                used[i] = Delivery::B;
            }
            (TrafficMode::Str, false) => {
                loads[i].0 += undelivered * 0.5 * d;
                used[i] = Delivery::A;
            }
        }
        if mode == TrafficMode::Rptr {
            used[i] = if on_a { Delivery::B } else { Delivery::A };
        }
    }
    let arrivals = rest_arrivals(&fs, &rest);
    Ok(DeliveryOutcome {
        energy: energy(ctx, &fs, &loads)?,
        delivery_time: delivery_time(ctx, &fs, &arrivals, &used)?,
        delivered_fraction: 1.0,
        queuing_only: hit,
    })
}

/// Expected energies (RDTR, STR) when each path independently loses a transfer with
/// probability `1 - p`. RDTR resends the loss on the backup; STR resends each lost half
/// on the other path.
fn pdr_energies(ctx: &SimContext<'_>, fs: &[Flow<'_>], p: f64) -> Result<(f64, f64), CostError> {
    let q = 1.0 - p;
    let ka = ctx.keep_alive_fraction;
    let rdtr: Vec<_> = fs.iter().map(|f| (f.demand, (q + ka) * f.demand)).collect();
    let half = |d: f64| 0.5 * d + q * 0.5 * d;
    let str_: Vec<_> = fs.iter().map(|f| (half(f.demand), half(f.demand))).collect();
    Ok((energy(ctx, fs, &rdtr)?, energy(ctx, fs, &str_)?))
}

pub fn pdr_sweep(ctx: &SimContext<'_>, solution: &EmbeddingSolution, pdrs: &[f64]) -> Result<Vec<PdrRow>, EvalError> {
    let fs = flows(solution, TrafficMode::Rdtr)?;
    pdrs.iter()
        .map(|&p| {
            if !(p > 0.0 && p <= 1.0) {
                return Err(EvalError::BadPdr(p));
            }
            let (e_rdtr, e_str) = pdr_energies(ctx, &fs, p)?;
            Ok(PdrRow { p, e_rdtr, e_str })
        })
        .collect()
}

/// Delivery ratio at which both expected energies are equal, if it lies in (0, 1].
/// Both curves are affine in the loss probability, so two evaluations fix them.
pub fn pdr_crossover(ctx: &SimContext<'_>, solution: &EmbeddingSolution) -> Result<Option<f64>, EvalError> {
    let fs = flows(solution, TrafficMode::Rdtr)?;
    let (r1, s1) = pdr_energies(ctx, &fs, 1.0)?;
    let (r0, s0) = pdr_energies(ctx, &fs, 0.0)?;
    let slope = (r0 - r1) - (s0 - s1);
    if slope.abs() < 1e-12 {
        return Ok(None);
    }
    let q = (s1 - r1) / slope;
    let p = 1.0 - q;
    Ok((p > 0.0 && p <= 1.0).then_some(p))
}
