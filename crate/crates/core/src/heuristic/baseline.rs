use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{open_hosts, HeuristicError, RouteError};
use crate::domain::{Edge, VnodeKey};
use crate::graph::{dijkstra, disjoint_pair};
use crate::solution::{assemble, EmbeddingSolution, Problem};

const ATTEMPTS: usize = 100;

/// Energy-, latency- and resilience-unaware reference: a random feasible placement with
/// fewest-hop routing (a fewest-hop disjoint pair for dual-path modes).
pub fn elru_baseline(problem: &Problem, seed: u64) -> Result<EmbeddingSolution, HeuristicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hop = |_: Edge| Some(1.0);
    let keys = problem.vnode_keys();
    let mut last_err = None;
    for _ in 0..ATTEMPTS {
        let mut asg: BTreeMap<VnodeKey, _> = BTreeMap::new();
        let mut stuck = None;
        for key in &keys {
            match open_hosts(problem, &asg, key).choose(&mut rng) {
                Some(&n) => {
                    asg.insert(key.clone(), n);
                }
                None => {
                    stuck = Some(key.clone());
                    break;
                }
            }
        }
        if let Some(k) = stuck {
            last_err = Some(HeuristicError::NoFeasibleNode(k));
            continue;
        }
        let mut p1 = BTreeMap::new();
        let mut p2 = BTreeMap::new();
        let mut failed = None;
        for (&pair, &d) in &problem.commodity_demands(&asg) {
            if d <= 0.0 {
                continue;
            }
            if problem.scheme.traffic_mode.is_dual() {
                match disjoint_pair(&problem.network, pair.0, pair.1, &hop) {
                    Some((a, b)) => {
                        let (a, b) = if b.len() < a.len() { (b, a) } else { (a, b) };
                        p1.insert(pair, a);
                        p2.insert(pair, b);
                    }
                    None => failed = Some(HeuristicError::Routing { pair, error: RouteError::NoDisjointPair }),
                }
            } else {
                match dijkstra(&problem.network, pair.0, pair.1, &hop) {
                    Some((_, p)) => {
                        p1.insert(pair, p);
                    }
                    None => failed = Some(HeuristicError::Routing { pair, error: RouteError::Disconnected }),
                }
            }
        }
        if let Some(e) = failed {
            last_err = Some(e);
            continue;
        }
        match assemble(problem, asg, &p1, &p2) {
            Ok(s) => return Ok(s),
            Err(e) => last_err = Some(HeuristicError::Assemble(e.to_string())),
        }
    }
    Err(last_err.unwrap_or_else(|| HeuristicError::Assemble("no attempt made".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::check_solution;
    use crate::testkit::{bp, problem, triangle};

    #[test]
    fn baseline_is_feasible_and_seeded() {
        for scheme in ["CCNR", "CCNR+RPTR", "CCNR+STR"] {
            let p = problem(triangle(), vec![bp("bp0", &["s", "c", "a"], &[("s", "c", 9.0), ("c", "a", 3.0)])], scheme);
            let a = elru_baseline(&p, 11).unwrap();
            assert!(check_solution(&p, &a).all_pass(), "{scheme}");
            assert_eq!(a, elru_baseline(&p, 11).unwrap());
        }
    }

    #[test]
    fn baseline_routes_fewest_hops() {
        let p = problem(triangle(), vec![bp("bp0", &["s", "a"], &[("s", "a", 9.0)])], "CCNR");
        for seed in 0..10 {
            let s = elru_baseline(&p, seed).unwrap();
            assert!(s.routes1.iter().all(|r| r.edges.len() == 1));
        }
    }
}
