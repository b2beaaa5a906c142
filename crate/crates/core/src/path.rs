//! Shortest and node-disjoint second-shortest paths on DAG views.
//!
//! Nodes are indexed in topological order: every edge goes from a lower to a
//! higher index, so a single forward sweep settles all distances. The cost of
//! a path is the sum of its edge weights plus, for every node on it, the node's
//! inner cost and, for every node but the source, the per-query hook value.

use crate::error::{Error, Result};

/// Absolute tolerance for cost comparisons.
pub const COST_EPS: f64 = 1e-12;

/// A DAG whose node indices form a topological order.
pub trait Dag {
    fn node_count(&self) -> usize;
    fn inner_cost(&self, u: usize) -> f64;
    /// Calls `f(v, w)` for every edge `u -> v` of weight `w`. Every `v` must
    /// be greater than `u`.
    fn for_each_successor<F: FnMut(usize, f64)>(&self, u: usize, f: F);
}

/// Explicit adjacency-list DAG.
#[derive(Debug, Clone, Default)]
pub struct AdjacencyDag {
    succ: Vec<Vec<(usize, f64)>>,
    inner: Vec<f64>,
}

impl AdjacencyDag {
    pub fn new(inner: Vec<f64>) -> Self {
        AdjacencyDag {
            succ: vec![Vec::new(); inner.len()],
            inner,
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        if u >= v || v >= self.inner.len() {
            return Err(Error::Invariant(format!(
                "edge {u} -> {v} does not respect the topological numbering"
            )));
        }
        if !(w >= 0.0) {
            return Err(Error::Invariant(format!("edge {u} -> {v} has weight {w}")));
        }
        self.succ[u].push((v, w));
        Ok(())
    }
}

impl Dag for AdjacencyDag {
    fn node_count(&self) -> usize {
        self.inner.len()
    }

    fn inner_cost(&self, u: usize) -> f64 {
        self.inner[u]
    }

    fn for_each_successor<F: FnMut(usize, f64)>(&self, u: usize, mut f: F) {
        for &(v, w) in &self.succ[u] {
            f(v, w);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub cost: f64,
}

impl Path {
    pub fn last(&self) -> usize {
        self.nodes[self.nodes.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathResult {
    pub best: Option<Path>,
    pub second_best: Option<Path>,
}

/// One shortest-path request. `hook` is either empty or holds one extra cost
/// per node; it is never charged on the source.
#[derive(Debug, Clone, Copy)]
pub struct PathQuery<'a> {
    pub source: usize,
    pub sinks: &'a [bool],
    pub hook: &'a [f64],
}

impl PathQuery<'_> {
    fn node_cost<D: Dag>(&self, dag: &D, v: usize) -> f64 {
        let hook = if self.hook.is_empty() { 0.0 } else { self.hook[v] };
        dag.inner_cost(v) + hook
    }
}

/// Cheapest path with at least one edge from the source to a sink, skipping
/// nodes flagged in `excluded` and abandoning prefixes costlier than `bound`.
///
/// Ties keep the earliest predecessor in topological order and the smallest
/// sink index.
pub fn shortest_path<D: Dag>(
    dag: &D,
    q: &PathQuery,
    excluded: Option<&[bool]>,
    bound: f64,
) -> Option<Path> {
    let n = dag.node_count();
    let s = q.source;
    let mut dist = vec![f64::INFINITY; n - s];
    let mut pred = vec![usize::MAX; n - s];
    dist[0] = dag.inner_cost(s);
    let is_excluded = |v: usize| excluded.is_some_and(|e| e[v]);

    for u in s..n {
        let du = dist[u - s];
        if !(du <= bound) {
            continue;
        }
        dag.for_each_successor(u, |v, w| {
            if is_excluded(v) {
                return;
            }
            let cand = du + w + q.node_cost(dag, v);
            if cand < dist[v - s] - COST_EPS {
                dist[v - s] = cand;
                pred[v - s] = u;
            }
        });
    }

    let mut end = None;
    let mut end_cost = f64::INFINITY;
    for v in s + 1..n {
        if q.sinks[v] && dist[v - s] <= bound && dist[v - s] < end_cost - COST_EPS {
            end = Some(v);
            end_cost = dist[v - s];
        }
    }
    let end = end?;
    let mut nodes = vec![end];
    let mut v = end;
    while v != s {
        v = pred[v - s];
        nodes.push(v);
    }
    nodes.reverse();
    Some(Path {
        nodes,
        cost: end_cost,
    })
}

/// Best path, and the best path sharing no node with it except the source.
pub fn shortest_paths<D: Dag>(dag: &D, q: &PathQuery) -> PathResult {
    let best = shortest_path(dag, q, None, f64::INFINITY);
    let second_best = best
        .as_ref()
        .and_then(|b| second_shortest_path(dag, q, b, f64::INFINITY));
    PathResult { best, second_best }
}

/// Best path sharing no node with `best` except the source.
pub fn second_shortest_path<D: Dag>(
    dag: &D,
    q: &PathQuery,
    best: &Path,
    bound: f64,
) -> Option<Path> {
    let mut excluded = vec![false; dag.node_count()];
    for &v in &best.nodes[1..] {
        excluded[v] = true;
    }
    shortest_path(dag, q, Some(&excluded), bound)
}

/// Cost of following `nodes` in `dag` (cheapest of any parallel edges), or
/// an error if an edge is missing.
pub fn path_cost<D: Dag>(dag: &D, q: &PathQuery, nodes: &[usize]) -> Result<f64> {
    let Some(&first) = nodes.first() else {
        return Err(Error::InvalidPath("empty path".into()));
    };
    let mut cost = dag.inner_cost(first);
    for pair in nodes.windows(2) {
        let mut weight: Option<f64> = None;
        dag.for_each_successor(pair[0], |v, w| {
            if v == pair[1] && weight.is_none_or(|x| w < x) {
                weight = Some(w);
            }
        });
        let w = weight.ok_or_else(|| {
            Error::InvalidPath(format!("no edge {} -> {}", pair[0], pair[1]))
        })?;
        cost += w + q.node_cost(dag, pair[1]);
    }
    Ok(cost)
}

/// Minimum cost from each node to any sink, excluding the node's own cost.
/// Nodes before `from` are left at infinity.
pub fn cost_to_go<D: Dag>(dag: &D, q: &PathQuery, from: usize) -> Vec<f64> {
    cost_to_go_avoiding(dag, q, from, None)
}

/// As [`cost_to_go`], never entering nodes flagged in `excluded`; those stay
/// at infinity.
fn cost_to_go_avoiding<D: Dag>(dag: &D, q: &PathQuery, from: usize, excluded: Option<&[bool]>) -> Vec<f64> {
    let n = dag.node_count();
    let mut h = vec![f64::INFINITY; n];
    for u in (from..n).rev() {
        if excluded.is_some_and(|e| e[u]) {
            continue;
        }
        let mut best = if q.sinks[u] && u != q.source {
            0.0
        } else {
            f64::INFINITY
        };
        dag.for_each_successor(u, |v, w| {
            let cand = w + q.node_cost(dag, v) + h[v];
            if cand < best - COST_EPS {
                best = cand;
            }
        });
        h[u] = best;
    }
    h
}

/// For each node along `best`, the cheapest source-to-sink path that follows
/// `best` up to that node, then leaves it for good. Only paths costing at
/// most `threshold` are returned. Paths that merely skip some nodes of `best`,
/// or that leave it and come back, are not deviations.
pub fn deviations<D: Dag>(dag: &D, q: &PathQuery, best: &Path, threshold: f64) -> Vec<Path> {
    let mut on_best = vec![false; dag.node_count()];
    for &v in &best.nodes {
        on_best[v] = true;
    }
    let h = cost_to_go_avoiding(dag, q, q.source, Some(&on_best));
    let mut out = Vec::new();
    let mut prefix = dag.inner_cost(best.nodes[0]);
    for i in 0..best.nodes.len() - 1 {
        let u = best.nodes[i];
        let next = best.nodes[i + 1];
        let mut choice: Option<(usize, f64)> = None;
        let mut next_weight = 0.0;
        dag.for_each_successor(u, |v, w| {
            if v == next {
                next_weight = w;
            }
            if on_best[v] {
                return;
            }
            let cand = prefix + w + q.node_cost(dag, v) + h[v];
            if cand.is_finite() && choice.is_none_or(|(_, c)| cand < c - COST_EPS) {
                choice = Some((v, cand));
            }
        });
        if let Some((v, cost)) = choice {
            if cost <= threshold {
                let mut nodes = best.nodes[..=i].to_vec();
                nodes.push(v);
                follow_cost_to_go(dag, q, &h, &mut nodes);
                out.push(Path { nodes, cost });
            }
        }
        prefix += next_weight + q.node_cost(dag, next);
    }
    out
}

fn follow_cost_to_go<D: Dag>(dag: &D, q: &PathQuery, h: &[f64], nodes: &mut Vec<usize>) {
    loop {
        let u = *nodes.last().expect("nonempty");
        if q.sinks[u] && h[u] == 0.0 {
            return;
        }
        let mut step: Option<(usize, f64)> = None;
        dag.for_each_successor(u, |v, w| {
            let cand = w + q.node_cost(dag, v) + h[v];
            if step.is_none_or(|(_, c)| cand < c - COST_EPS) {
                step = Some((v, cand));
            }
        });
        match step {
            Some((v, _)) => nodes.push(v),
            None => return,
        }
    }
}

/// Longest source-anchored prefix of `best` shared by every alternative.
/// Without alternatives the whole path is returned.
pub fn shared_prefix(best: &[usize], alternatives: &[Vec<usize>]) -> Vec<usize> {
    let mut len = best.len();
    for alt in alternatives {
        let common = best
            .iter()
            .zip(alt)
            .take_while(|(a, b)| a == b)
            .count();
        len = len.min(common);
    }
    best[..len].to_vec()
}
