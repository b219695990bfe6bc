//! Depth-first branch and bound over LP relaxations.
//!
//! The root relaxation is solved once. Each child clones its parent's simplex state and
//! fixes one binary, so re-solves are warm-started. Big-M rows are tightened against
//! variable bounds before the root solve.
//!
//! For parallel runs the tree is first expanded into a fixed frontier of subtrees. The
//! frontier does not depend on the worker count, every subtree is searched with the same
//! rules, and ties between subtrees go to the earliest one, so the result is the same for
//! any number of threads.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, SolveOutcome, Solution, Variable};
use rayon::prelude::*;

use super::instance::{MilpInstance, Relation, VarKind};

const INT_TOL: f64 = 1e-6;
const FRONTIER_TARGET: usize = 32;

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
    pub threads: usize,
    /// Known attainable objective; subtrees whose bound exceeds it are skipped.
    pub cutoff: Option<f64>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { time: None, nodes: None, threads: 1, cutoff: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpResult {
    pub values: Vec<f64>,
    pub objective: f64,
    pub optimal: bool,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BnbError {
    #[error("the instance is infeasible")]
    Infeasible,
    #[error("limits reached before any feasible solution was found")]
    LimitNoIncumbent,
    #[error("the relaxation is unbounded")]
    Unbounded,
    #[error("LP solver failure: {0}")]
    Solver(String),
}

fn prune_tol(best: f64) -> f64 {
    1e-7 * (1.0 + best.abs())
}

struct Relaxation {
    handles: Vec<Variable>,
    binaries: Vec<usize>,
    priority: Vec<u8>,
}

fn upper_bound(inst: &MilpInstance, j: usize) -> f64 {
    let d = &inst.vars[j];
    match d.kind {
        VarKind::Binary => 1.0,
        VarKind::Continuous => d.upper.unwrap_or(f64::INFINITY),
    }
}

/// Rewrites `sum a_j x_j <= b` so that a binary with a huge negative coefficient gets the
/// smallest coefficient that still relaxes the row completely when the binary is 1.
fn tighten(inst: &MilpInstance, terms: &mut [(usize, f64)], b: f64) {
    let max_of = |&(j, a): &(usize, f64)| if a >= 0.0 { a * upper_bound(inst, j) } else { 0.0 };
    let total: f64 = terms.iter().map(max_of).sum();
    if !total.is_finite() {
        return;
    }
    for k in 0..terms.len() {
        let (j, a) = terms[k];
        if a >= 0.0 || inst.vars[j].kind != VarKind::Binary {
            continue;
        }
        let rest = total - max_of(&terms[k]);
        let needed = (rest - b).max(0.0);
        if needed < -a {
            terms[k].1 = -needed;
        }
    }
}

fn build(inst: &MilpInstance) -> (microlp::Problem, Relaxation) {
    let mut p = microlp::Problem::new(OptimizationDirection::Minimize);
    let mut obj = vec![0.0; inst.vars.len()];
    for &(v, c) in &inst.objective.terms {
        obj[v.0] += c;
    }
    let handles: Vec<Variable> = (0..inst.vars.len()).map(|j| p.add_var(obj[j], (0.0, upper_bound(inst, j)))).collect();
    for c in &inst.constraints {
        let mut terms: Vec<(usize, f64)> = c.expr.terms.iter().map(|&(v, a)| (v.0, a)).collect();
        match c.relation {
            Relation::Le => tighten(inst, &mut terms, c.rhs),
            Relation::Ge => {
                for t in terms.iter_mut() {
                    t.1 = -t.1;
                }
                tighten(inst, &mut terms, -c.rhs);
                for t in terms.iter_mut() {
                    t.1 = -t.1;
                }
            }
            Relation::Eq => {}
        }
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Eq => ComparisonOp::Eq,
            Relation::Ge => ComparisonOp::Ge,
        };
        let expr: Vec<(Variable, f64)> = terms.into_iter().filter(|t| t.1 != 0.0).map(|(j, a)| (handles[j], a)).collect();
        if expr.is_empty() {
            continue;
        }
        p.add_constraint(expr.as_slice(), op, c.rhs);
    }
    let binaries = (0..inst.vars.len()).filter(|&j| inst.vars[j].kind == VarKind::Binary).collect();
    let priority = inst.vars.iter().map(|v| v.priority).collect();
    (p, Relaxation { handles, binaries, priority })
}

enum Step {
    /// Fractional: branch on this variable, first child value first.
    Branch(usize, f64),
    Integral(Vec<f64>),
}

fn classify(inst: &MilpInstance, rel: &Relaxation, sol: &Solution) -> Step {
    let mut pick: Option<(u8, usize, f64)> = None;
    for &j in &rel.binaries {
        let v = sol.var_value_raw(rel.handles[j]);
        if (v - v.round()).abs() > INT_TOL {
            let key = (rel.priority[j], j);
            if pick.is_none_or(|(p, k, _)| key < (p, k)) {
                pick = Some((key.0, j, v));
            }
        }
    }
    match pick {
        Some((_, j, v)) => Step::Branch(j, if v >= 0.5 { 1.0 } else { 0.0 }),
        None => {
            let values = (0..inst.vars.len())
                .map(|j| {
                    let v = sol.var_value_raw(rel.handles[j]);
                    if inst.vars[j].kind == VarKind::Binary { v.round() } else { v.max(0.0) }
                })
                .collect();
            Step::Integral(values)
        }
    }
}

fn child(parent: Solution, var: Variable, val: f64) -> Result<Option<Solution>, BnbError> {
    match parent.fix_var(var, val) {
        Ok(SolveOutcome::Solution(s)) => Ok(Some(s)),
        Ok(SolveOutcome::Interrupted(_)) => Ok(None),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(e) => Err(BnbError::Solver(e.to_string())),
    }
}

struct Shared<'a> {
    inst: &'a MilpInstance,
    rel: &'a Relaxation,
    /// Best objective seen by any subtree (f64 bits).
    global: AtomicU64,
    nodes: AtomicU64,
    stopped: AtomicBool,
    deadline: Option<Instant>,
    node_limit: Option<u64>,
}

impl Shared<'_> {
    fn global(&self) -> f64 {
        f64::from_bits(self.global.load(Ordering::Acquire))
    }

    fn offer(&self, v: f64) {
        let _ = self.global.fetch_update(Ordering::AcqRel, Ordering::Acquire, |bits| {
            (v < f64::from_bits(bits)).then_some(v.to_bits())
        });
    }

    fn tick(&self) -> bool {
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        let over = self.node_limit.is_some_and(|l| n > l) || self.deadline.is_some_and(|d| Instant::now() >= d);
        if over {
            self.stopped.store(true, Ordering::Release);
        }
        !over && !self.stopped.load(Ordering::Acquire)
    }
}

type Incumbent = Option<(f64, Vec<f64>)>;

enum Pending {
    Node(Solution),
    Fix(Solution, usize, f64),
}

/// Searches one subtree. Nodes are pruned against the local incumbent, and against the
/// global one only when strictly worse, so ties are resolved inside each subtree alone.
fn search(shared: &Shared<'_>, root: Solution) -> Result<Incumbent, BnbError> {
    let mut best: Incumbent = None;
    let mut stack = vec![Pending::Node(root)];
    while let Some(item) = stack.pop() {
        if !shared.tick() {
            break;
        }
        let dominated = |bound: f64, best: &Incumbent| {
            let g = shared.global();
            (g.is_finite() && bound > g + prune_tol(g)) || best.as_ref().is_some_and(|(b, _)| bound >= b - prune_tol(*b))
        };
        let sol = match item {
            Pending::Node(s) => s,
            // the parent bound may have been overtaken since this child was queued
            Pending::Fix(parent, _, _) if dominated(parent.objective(), &best) => continue,
            Pending::Fix(parent, j, val) => match child(parent, shared.rel.handles[j], val)? {
                Some(s) => s,
                None => continue,
            },
        };
        if dominated(sol.objective(), &best) {
            continue;
        }
        match classify(shared.inst, shared.rel, &sol) {
            Step::Integral(values) => {
                let obj = shared.inst.objective_value(&values);
                if best.as_ref().is_none_or(|(b, _)| obj < b - prune_tol(*b)) {
                    shared.offer(obj);
                    best = Some((obj, values));
                }
            }
            Step::Branch(j, first) => {
                stack.push(Pending::Fix(sol.clone(), j, 1.0 - first));
                stack.push(Pending::Fix(sol, j, first));
            }
        }
    }
    Ok(best)
}

enum FrontierItem {
    Open(Solution),
    Leaf(f64, Vec<f64>),
}

/// Expands the tree level by level, keeping depth-first order, until it has enough
/// subtrees or nothing is left to expand.
fn frontier(shared: &Shared<'_>, root: Solution) -> Result<Vec<FrontierItem>, BnbError> {
    let mut items = vec![FrontierItem::Open(root)];
    loop {
        let open = items.iter().filter(|i| matches!(i, FrontierItem::Open(_))).count();
        if open == 0 || items.len() >= FRONTIER_TARGET {
            return Ok(items);
        }
        let mut next = Vec::with_capacity(items.len() * 2);
        for item in items {
            let FrontierItem::Open(sol) = item else {
                next.push(item);
                continue;
            };
            shared.tick();
            match classify(shared.inst, shared.rel, &sol) {
                Step::Integral(values) => {
                    let obj = shared.inst.objective_value(&values);
                    shared.offer(obj);
                    next.push(FrontierItem::Leaf(obj, values));
                }
                Step::Branch(j, first) => {
                    for val in [first, 1.0 - first] {
                        if let Some(s) = child(sol.clone(), shared.rel.handles[j], val)? {
                            next.push(FrontierItem::Open(s));
                        }
                    }
                }
            }
        }
        items = next;
    }
}

/// Objective and values of the tightened root relaxation.
pub fn root_relaxation(inst: &MilpInstance) -> Result<(f64, Vec<f64>), BnbError> {
    let (problem, rel) = build(inst);
    match problem.solve() {
        Ok(SolveOutcome::Solution(s)) => {
            Ok((s.objective(), rel.handles.iter().map(|&h| s.var_value_raw(h)).collect()))
        }
        Ok(SolveOutcome::Interrupted(_)) => Err(BnbError::LimitNoIncumbent),
        Err(microlp::Error::Infeasible) => Err(BnbError::Infeasible),
        Err(microlp::Error::Unbounded) => Err(BnbError::Unbounded),
        Err(e) => Err(BnbError::Solver(e.to_string())),
    }
}

pub fn solve_instance(inst: &MilpInstance, limits: &Limits) -> Result<MilpResult, BnbError> {
    let result = run(inst, limits, limits.cutoff);
    match (&result, limits.cutoff) {
        // a cutoff that no solution reaches must not turn into a false infeasibility
        (Err(BnbError::Infeasible), Some(_)) => run(inst, limits, None),
        _ => result,
    }
}

fn run(inst: &MilpInstance, limits: &Limits, cutoff: Option<f64>) -> Result<MilpResult, BnbError> {
    let started = Instant::now();
    let (problem, rel) = build(inst);
    let root = match problem.solve() {
        Ok(SolveOutcome::Solution(s)) => s,
        Ok(SolveOutcome::Interrupted(_)) => return Err(BnbError::LimitNoIncumbent),
        Err(microlp::Error::Infeasible) => return Err(BnbError::Infeasible),
        Err(microlp::Error::Unbounded) => return Err(BnbError::Unbounded),
        Err(e) => return Err(BnbError::Solver(e.to_string())),
    };
    let initial = cutoff.map_or(f64::INFINITY, |c| c + prune_tol(c));
    let shared = Shared {
        inst,
        rel: &rel,
        global: AtomicU64::new(initial.to_bits()),
        nodes: AtomicU64::new(0),
        stopped: AtomicBool::new(false),
        deadline: limits.time.map(|t| started + t),
        node_limit: limits.nodes,
    };
    let items = frontier(&shared, root)?;
    let solve_item = |item: FrontierItem| -> Result<Incumbent, BnbError> {
        match item {
            FrontierItem::Leaf(obj, values) => Ok(Some((obj, values))),
            FrontierItem::Open(sol) => search(&shared, sol),
        }
    };
    let results: Vec<Result<Incumbent, BnbError>> = if limits.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(limits.threads)
            .build()
            .map_err(|e| BnbError::Solver(e.to_string()))?;
        pool.install(|| items.into_par_iter().map(solve_item).collect())
    } else {
        items.into_iter().map(solve_item).collect()
    };
    let mut best: Incumbent = None;
    for r in results {
        if let Some((obj, values)) = r? {
            if best.as_ref().is_none_or(|(b, _)| obj < b - prune_tol(*b)) {
                best = Some((obj, values));
            }
        }
    }
    let nodes = shared.nodes.load(Ordering::Relaxed);
    let stopped = shared.stopped.load(Ordering::Acquire);
    log::debug!("branch and bound: {nodes} nodes, stopped={stopped}");
    match best {
        Some((objective, values)) => Ok(MilpResult { values, objective, optimal: !stopped, nodes }),
        None if stopped => Err(BnbError::LimitNoIncumbent),
        None => Err(BnbError::Infeasible),
    }
}
