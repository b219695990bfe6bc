//! Exact embedding through a mixed-integer linear program.
//!
//! [`compile`] produces a solver-agnostic [`MilpInstance`], [`emit_lp`] writes it as LP
//! text, [`solve_instance`] runs branch and bound on it and [`solve_exact`] decodes the
//! optimum back into an [`EmbeddingSolution`]. [`check_solution`] verifies any solution
//! without looking at the model.

mod bnb;
mod check;
mod compile;
mod hints;
mod instance;

use std::collections::BTreeMap;

pub use bnb::{root_relaxation, solve_instance, BnbError, Limits, MilpResult};
pub use check::{check_solution, CheckReport, FamilyCheck, Status};
pub use compile::{compile, CompileError, Compiled, VarIndex, BIG_M};
pub use hints::{infeasibility_hints, placement_hints, Hint};
pub use instance::{
    emit_lp, Constraint, Family, InstanceError, LinExpr, MilpInstance, Relation, Tag, Var, VarDecl, VarKind,
};

use crate::domain::{Edge, NodeId, VnodeKey};
use crate::solution::{assemble, AssembleError, EmbeddingSolution, Pair, Problem, SolutionStatus};

const FLOW_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("infeasible{}", hint_suffix(.0))]
    Infeasible(Vec<Hint>),
    #[error("limits reached before any feasible solution was found")]
    LimitNoIncumbent,
    #[error("cannot decode the optimum: {0}")]
    Decode(String),
    #[error("{0}")]
    Solver(String),
}

fn hint_suffix(h: &[Hint]) -> String {
    if h.is_empty() {
        String::new()
    } else {
        format!(": {}", h.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("; "))
    }
}

/// Follows positive flow from the pair's source to its destination.
fn trace(flows: &BTreeMap<(Pair, Edge), f64>, pair: Pair) -> Option<Vec<Edge>> {
    let mut path = Vec::new();
    let mut cur = pair.0;
    while cur != pair.1 {
        let next = flows
            .range(((pair, Edge(cur, NodeId(0))))..=((pair, Edge(cur, NodeId(u32::MAX)))))
            .filter(|(_, &f)| f > FLOW_TOL)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(&(_, e), _)| e)?;
        path.push(next);
        cur = next.1;
        if path.len() > flows.len() {
            return None;
        }
    }
    Some(path)
}

/// Turns variable values into a solution and checks that its recomputed objective equals
/// the model objective.
pub fn decode(problem: &Problem, compiled: &Compiled, result: &MilpResult) -> Result<EmbeddingSolution, SolveError> {
    let x = &result.values;
    let ix = &compiled.index;
    let mut assignment = BTreeMap::new();
    for (&(i, a, c), v) in &ix.ne {
        if x[v.0] > 0.5 {
            let bp = &problem.request.bps[i];
            assignment.insert(VnodeKey::new(&bp.id, &bp.nodes[a].id), c);
        }
    }
    let mut paths = [BTreeMap::new(), BTreeMap::new()];
    for (layer, map) in [&ix.flow1, &ix.flow2].into_iter().enumerate() {
        let values: BTreeMap<(Pair, Edge), f64> = map.iter().map(|(&k, v)| (k, x[v.0])).collect();
        for (&pair, v) in &ix.pair_demand {
            if x[v.0] > FLOW_TOL && !map.is_empty() {
                let p = trace(&values, pair).ok_or_else(|| SolveError::Decode(format!("no path for {}->{}", pair.0, pair.1)))?;
                paths[layer].insert(pair, p);
            }
        }
    }
    let mut s = assemble(problem, assignment, &paths[0], &paths[1])
        .map_err(|e: AssembleError| SolveError::Decode(e.to_string()))?;
    let gap = (s.costs.objective - result.objective).abs();
    if gap > 1e-6 * (1.0 + result.objective.abs()) {
        return Err(SolveError::Decode(format!(
            "recomputed objective {} differs from model objective {}",
            s.costs.objective, result.objective
        )));
    }
    s.status = if result.optimal { SolutionStatus::Optimal } else { SolutionStatus::LimitReached };
    Ok(s)
}

/// Compiles, solves and decodes. A solution hitting a limit comes back with status
/// [`SolutionStatus::LimitReached`].
///
/// Without an explicit cutoff the heuristic's objective is used as one, so branch and bound
/// only explores nodes that can match or beat it.
pub fn solve_exact(problem: &Problem, limits: &Limits) -> Result<EmbeddingSolution, SolveError> {
    let compiled = compile(problem).map_err(|CompileError::Infeasible(h)| SolveError::Infeasible(h))?;
    let mut limits = *limits;
    if limits.cutoff.is_none() {
        if let Ok(h) = crate::heuristic::solve_heuristic(problem, &crate::heuristic::HeuristicConfig::default()) {
            log::debug!("heuristic cutoff {}", h.costs.objective);
            limits.cutoff = Some(h.costs.objective);
        }
    }
    match solve_instance(&compiled.instance, &limits) {
        Ok(r) => decode(problem, &compiled, &r),
        Err(BnbError::Infeasible) => Err(SolveError::Infeasible(infeasibility_hints(problem))),
        Err(BnbError::LimitNoIncumbent) => Err(SolveError::LimitNoIncumbent),
        Err(e) => Err(SolveError::Solver(e.to_string())),
    }
}
