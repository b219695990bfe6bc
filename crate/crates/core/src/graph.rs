//! Path algorithms over the directed links of a [`PhysicalNetwork`].
//!
//! Edge costs are supplied by the caller; `None` marks an unusable link. Costs must be
//! non-negative. Ties are broken by node id so results are reproducible.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use crate::domain::{Edge, NodeId, PhysicalNetwork};

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, NodeId);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // reversed for a min-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

pub fn path_cost(path: &[Edge], cost: &impl Fn(Edge) -> Option<f64>) -> Option<f64> {
    path.iter().map(|&e| cost(e)).sum()
}

/// Cheapest path from `source` to `dest`, avoiding `banned_nodes` and `banned_edges`.
pub fn dijkstra_restricted(
    net: &PhysicalNetwork,
    source: NodeId,
    dest: NodeId,
    cost: &impl Fn(Edge) -> Option<f64>,
    banned_nodes: &BTreeSet<NodeId>,
    banned_edges: &BTreeSet<Edge>,
) -> Option<(f64, Vec<Edge>)> {
    let n = net.node_count();
    if source.index() >= n || dest.index() >= n || source == dest {
        return None;
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<NodeId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0.0;
    heap.push(Key(0.0, source));
    while let Some(Key(d, u)) = heap.pop() {
        if done[u.index()] {
            continue;
        }
        done[u.index()] = true;
        if u == dest {
            break;
        }
        for &v in net.neighbors(u).ok()? {
            let e = Edge(u, v);
            if banned_nodes.contains(&v) || banned_edges.contains(&e) || done[v.index()] {
                continue;
            }
            let Some(c) = cost(e) else { continue };
            let nd = d + c;
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                prev[v.index()] = Some(u);
                heap.push(Key(nd, v));
            }
        }
    }
    if !done[dest.index()] {
        return None;
    }
    let mut path = Vec::new();
    let mut cur = dest;
    while cur != source {
        let p = prev[cur.index()]?;
        path.push(Edge(p, cur));
        cur = p;
    }
    path.reverse();
    Some((dist[dest.index()], path))
}

pub fn dijkstra(
    net: &PhysicalNetwork,
    source: NodeId,
    dest: NodeId,
    cost: &impl Fn(Edge) -> Option<f64>,
) -> Option<(f64, Vec<Edge>)> {
    dijkstra_restricted(net, source, dest, cost, &BTreeSet::new(), &BTreeSet::new())
}

/// Up to `k` cheapest simple paths in non-decreasing cost order.
pub fn k_shortest_paths(
    net: &PhysicalNetwork,
    source: NodeId,
    dest: NodeId,
    k: usize,
    cost: &impl Fn(Edge) -> Option<f64>,
) -> Vec<(f64, Vec<Edge>)> {
    let mut found: Vec<(f64, Vec<Edge>)> = Vec::new();
    let Some(first) = dijkstra(net, source, dest, cost) else {
        return found;
    };
    found.push(first);
    let mut candidates: Vec<(f64, Vec<Edge>)> = Vec::new();
    while found.len() < k {
        let last = found.last().expect("non-empty").1.clone();
        for i in 0..last.len() {
            let spur = last[i].0;
            let root = &last[..i];
            let mut banned_edges = BTreeSet::new();
            for (_, p) in &found {
                if p.len() > i && p[..i] == *root {
                    banned_edges.insert(p[i]);
                }
            }
            let banned_nodes: BTreeSet<NodeId> = root.iter().map(|e| e.0).collect();
            if let Some((_, tail)) = dijkstra_restricted(net, spur, dest, cost, &banned_nodes, &banned_edges) {
                let mut path = root.to_vec();
                path.extend(tail);
                if let Some(c) = path_cost(&path, cost) {
                    if !candidates.iter().any(|(_, p)| *p == path) && !found.iter().any(|(_, p)| *p == path) {
                        candidates.push((c, path));
                    }
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        found.push(candidates.remove(0));
    }
    found
}

/// Number of pairwise link-disjoint paths from `s` to `t`, counted up to `limit`.
pub fn disjoint_path_count(net: &PhysicalNetwork, s: NodeId, t: NodeId, limit: usize) -> usize {
    if s == t {
        return 0;
    }
    let arcs: Vec<Edge> = net.edges().collect();
    let mut used = vec![false; arcs.len()];
    let mut count = 0;
    while count < limit {
        match augment(net, &arcs, &used, s, t, &|_| Some(1.0)) {
            Some(flips) => {
                for (idx, on) in flips {
                    used[idx] = on;
                }
                count += 1;
            }
            None => break,
        }
    }
    count
}

/// Cheapest augmenting path in the residual graph (Bellman-Ford, since residual arcs carry
/// negated costs). Returns the arc flow changes.
fn augment(
    net: &PhysicalNetwork,
    arcs: &[Edge],
    used: &[bool],
    s: NodeId,
    t: NodeId,
    cost: &impl Fn(Edge) -> Option<f64>,
) -> Option<Vec<(usize, bool)>> {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<(usize, bool)>> = vec![None; n];
    dist[s.index()] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for (idx, &e) in arcs.iter().enumerate() {
            let Some(c) = cost(e) else { continue };
            let (from, to, w, on) = if used[idx] { (e.1, e.0, -c, false) } else { (e.0, e.1, c, true) };
            let df = dist[from.index()];
            if df.is_finite() && df + w < dist[to.index()] - 1e-12 {
                dist[to.index()] = df + w;
                pred[to.index()] = Some((idx, on));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if !dist[t.index()].is_finite() {
        return None;
    }
    let mut flips = Vec::new();
    let mut cur = t;
    let mut guard = 0;
    while cur != s {
        let (idx, on) = pred[cur.index()]?;
        flips.push((idx, on));
        cur = if on { arcs[idx].0 } else { arcs[idx].1 };
        guard += 1;
        if guard > arcs.len() {
            return None;
        }
    }
    Some(flips)
}

/// Min-sum pair of link-disjoint paths (successive shortest augmenting paths).
pub fn disjoint_pair(
    net: &PhysicalNetwork,
    s: NodeId,
    t: NodeId,
    cost: &impl Fn(Edge) -> Option<f64>,
) -> Option<(Vec<Edge>, Vec<Edge>)> {
    if s == t {
        return None;
    }
    let arcs: Vec<Edge> = net.edges().collect();
    let mut used = vec![false; arcs.len()];
    for _ in 0..2 {
        for (idx, on) in augment(net, &arcs, &used, s, t, cost)? {
            used[idx] = on;
        }
    }
    // opposite arcs both carrying flow cancel
    for (idx, &e) in arcs.iter().enumerate() {
        if used[idx] {
            if let Some(j) = arcs.iter().position(|&a| a == e.reversed()) {
                if used[j] {
                    used[idx] = false;
                    used[j] = false;
                }
            }
        }
    }
    let mut remaining: BTreeSet<Edge> = arcs.iter().zip(&used).filter(|(_, &u)| u).map(|(&e, _)| e).collect();
    let a = take_path(&mut remaining, s, t)?;
    let b = take_path(&mut remaining, s, t)?;
    Some((a, b))
}

/// Follows flow-carrying arcs from `s` to `t`, removing them and cutting loops.
fn take_path(remaining: &mut BTreeSet<Edge>, s: NodeId, t: NodeId) -> Option<Vec<Edge>> {
    let mut path: Vec<Edge> = Vec::new();
    let mut cur = s;
    while cur != t {
        let e = *remaining.iter().find(|e| e.0 == cur)?;
        remaining.remove(&e);
        if let Some(pos) = path.iter().position(|p| p.0 == e.1) {
            path.truncate(pos);
        } else {
            path.push(e);
        }
        cur = e.1;
        if e.1 == s {
            path.clear();
        }
    }
    Some(path)
}

/// Hop distances from `s`; `None` for unreachable nodes.
pub fn hop_distances(net: &PhysicalNetwork, s: NodeId) -> Vec<Option<usize>> {
    let mut dist = vec![None; net.node_count()];
    if s.index() >= dist.len() {
        return dist;
    }
    dist[s.index()] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        let du = dist[u.index()].expect("queued nodes are reached");
        for &v in net.neighbors(u).unwrap_or(&[]) {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(du + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

pub fn path_nodes(path: &[Edge]) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = path.first().map(|e| vec![e.0]).unwrap_or_default();
    out.extend(path.iter().map(|e| e.1));
    out
}

pub fn edge_disjoint(a: &[Edge], b: &[Edge]) -> bool {
    let sa: BTreeSet<_> = a.iter().collect();
    !b.iter().any(|e| sa.contains(e))
}

/// Paths share no node other than their endpoints.
pub fn node_disjoint(a: &[Edge], b: &[Edge]) -> bool {
    let inner = |p: &[Edge]| -> BTreeSet<NodeId> { p.iter().skip(1).map(|e| e.0).collect() };
    inner(a).is_disjoint(&inner(b))
}
