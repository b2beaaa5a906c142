//! The tracklet graph.
//!
//! Edges are implicit: `u -> v` exists exactly when
//! `0 < t_start(v) - t_end(u) <= tau_max`, so they never need to be stored and
//! merging nodes automatically keeps only the links at the extremities of the
//! merged chain.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::detection::{check_consistent, Detection};
use crate::error::{Error, Result};
use crate::path::Dag;
use crate::track::Track;
use crate::tracklet::Tracklet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub tau_max: u32,
    pub gamma: f64,
    /// Extrapolate the end velocity of the source tracklet when measuring
    /// the displacement. Without it the cost is the plain distance between
    /// the facing extremities.
    pub predict_motion: bool,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            tau_max: 120,
            gamma: 3.0,
            predict_motion: true,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau_max < 1 {
            return Err(Error::Config("tau_max must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Fixed-size copy of the data edge weights need, kept contiguous for the
/// path sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Summary {
    pub t_start: u32,
    pub t_end: u32,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub end_velocity: [f64; 2],
    pub inner_cost: f64,
}

fn pad(v: &[f64]) -> [f64; 2] {
    [v[0], v.get(1).copied().unwrap_or(0.0)]
}

impl Summary {
    fn of(t: &Tracklet) -> Self {
        Summary {
            t_start: t.t_start(),
            t_end: t.t_end(),
            start: pad(t.start_position()),
            end: pad(t.end_position()),
            end_velocity: pad(t.end_velocity()),
            inner_cost: t.inner_cost(),
        }
    }
}

#[inline]
fn summary_weight(u: &Summary, v: &Summary, p: &GraphParams) -> Option<f64> {
    if v.t_start <= u.t_end || v.t_start - u.t_end > p.tau_max {
        return None;
    }
    Some(link_cost(u, v, p))
}

/// Weight of a link already known to satisfy the gap rule.
#[inline]
fn link_cost(u: &Summary, v: &Summary, p: &GraphParams) -> f64 {
    let dt = (v.t_start - u.t_end) as f64;
    let (vx, vy) = if p.predict_motion {
        (u.end_velocity[0] * dt, u.end_velocity[1] * dt)
    } else {
        (0.0, 0.0)
    };
    let dx = v.start[0] - u.end[0] - vx;
    let dy = v.start[1] - u.end[1] - vy;
    (1.0 + p.gamma * (dt - 1.0)) * (dx * dx + dy * dy).sqrt()
}

/// Weight of the link `u -> v`, or `None` when the two tracklets cannot be
/// linked.
pub fn edge_weight(u: &Tracklet, v: &Tracklet, params: &GraphParams) -> Option<f64> {
    summary_weight(&Summary::of(u), &Summary::of(v), params)
}

#[derive(Debug, Clone)]
pub struct TrackletGraph {
    params: GraphParams,
    nodes: Vec<Option<Tracklet>>,
    summaries: Vec<Summary>,
    by_start: BTreeSet<(u32, NodeId)>,
    by_end: BTreeSet<(u32, NodeId)>,
    latest_frame: Option<u32>,
    live: usize,
}

impl TrackletGraph {
    pub fn new(params: GraphParams) -> Self {
        TrackletGraph {
            params,
            nodes: Vec::new(),
            summaries: Vec::new(),
            by_start: BTreeSet::new(),
            by_end: BTreeSet::new(),
            latest_frame: None,
            live: 0,
        }
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// One past the largest id ever assigned.
    pub fn id_bound(&self) -> usize {
        self.nodes.len()
    }

    pub fn latest_frame(&self) -> Option<u32> {
        self.latest_frame
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.by_start.first().map(|(t, _)| *t)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.get(id.0).is_some_and(|n| n.is_some())
    }

    pub fn node(&self, id: NodeId) -> Result<&Tracklet> {
        self.nodes
            .get(id.0)
            .and_then(|n| n.as_ref())
            .ok_or(Error::UnknownNode(id))
    }

    pub(crate) fn summary(&self, id: NodeId) -> &Summary {
        &self.summaries[id.0]
    }

    /// Live node ids in increasing order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_some())
            .map(|(i, _)| NodeId(i))
    }

    pub fn tracklets(&self) -> impl Iterator<Item = (NodeId, &Tracklet)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|t| (NodeId(i), t)))
    }

    fn insert(&mut self, t: Tracklet) -> NodeId {
        let id = NodeId(self.nodes.len());
        let s = Summary::of(&t);
        self.by_start.insert((s.t_start, id));
        self.by_end.insert((s.t_end, id));
        self.latest_frame = Some(self.latest_frame.map_or(s.t_end, |l| l.max(s.t_end)));
        self.nodes.push(Some(t));
        self.summaries.push(s);
        self.live += 1;
        id
    }

    fn remove(&mut self, id: NodeId) -> Tracklet {
        let t = self.nodes[id.0].take().expect("caller checked existence");
        let s = self.summaries[id.0];
        self.by_start.remove(&(s.t_start, id));
        self.by_end.remove(&(s.t_end, id));
        self.live -= 1;
        t
    }

    /// Weight of `u -> v` between two live nodes.
    pub fn weight(&self, u: NodeId, v: NodeId) -> Result<Option<f64>> {
        self.node(u)?;
        self.node(v)?;
        Ok(summary_weight(
            &self.summaries[u.0],
            &self.summaries[v.0],
            &self.params,
        ))
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, u: NodeId, v: NodeId) -> Option<f64> {
        summary_weight(&self.summaries[u.0], &self.summaries[v.0], &self.params)
    }

    /// Live nodes `v` with an edge `u -> v`, ordered by start frame then id.
    pub fn successors(&self, u: NodeId) -> Result<Vec<(NodeId, f64)>> {
        let t_end = self.node(u)?.t_end();
        let lo = t_end.saturating_add(1);
        let hi = t_end.saturating_add(self.params.tau_max);
        Ok(self
            .by_start
            .range((lo, NodeId(0))..=(hi, NodeId(usize::MAX)))
            .map(|&(_, v)| (v, self.weight_unchecked(u, v).expect("in range")))
            .collect())
    }

    /// Every edge `(u, v, w)` of the graph.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut out = Vec::new();
        for u in self.node_ids() {
            for (v, w) in self.successors(u).expect("live node") {
                out.push((u, v, w));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let tau = self.params.tau_max;
        self.by_end
            .iter()
            .map(|&(t, _)| {
                self.by_start
                    .range((t + 1, NodeId(0))..=(t.saturating_add(tau), NodeId(usize::MAX)))
                    .count()
            })
            .sum()
    }

    /// Kahn's algorithm over the explicit edge set. Fails if a cycle exists.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let mut indegree = vec![0usize; self.nodes.len()];
        let edges = self.edges();
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); self.nodes.len()];
        for &(u, v, _) in &edges {
            indegree[v.0] += 1;
            adj[u.0].push(v);
        }
        let mut queue: Vec<NodeId> = self.node_ids().filter(|v| indegree[v.0] == 0).collect();
        let mut order = Vec::with_capacity(self.live);
        while let Some(u) = queue.pop() {
            order.push(u);
            for &v in &adj[u.0] {
                indegree[v.0] -= 1;
                if indegree[v.0] == 0 {
                    queue.push(v);
                }
            }
        }
        if order.len() != self.live {
            return Err(Error::Invariant("tracklet graph contains a cycle".into()));
        }
        Ok(order)
    }

    /// Adds one single-detection node per detection of frame `frame`. Every
    /// node ending within `tau_max` frames before `frame` links to them.
    pub fn increment(&mut self, frame: u32, detections: Vec<Detection>) -> Result<Vec<NodeId>> {
        if let Some(latest) = self.latest_frame {
            if frame <= latest {
                return Err(Error::StaleFrame { frame, latest });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(Error::Detection(format!(
                "detection at frame {} supplied with increment for frame {frame}",
                d.frame
            )));
        }
        check_consistent(&detections)?;
        if let (Some(new), Some((_, existing))) = (detections.first(), self.tracklets().next()) {
            let old = &existing.detections()[0];
            if new.feature_count() != old.feature_count() || new.position.len() != old.position.len() {
                return Err(Error::Detection(
                    "new detections do not match the shape of the graph's detections".into(),
                ));
            }
        }
        let ids = detections
            .into_iter()
            .map(|d| self.insert(Tracklet::single(Arc::new(d))))
            .collect();
        if self.latest_frame.is_none_or(|l| l < frame) {
            self.latest_frame = Some(frame);
        }
        Ok(ids)
    }

    /// Replaces a time-ordered chain of linked nodes by one merged tracklet.
    /// The merged inner cost is the sum of the member inner costs and the
    /// link weights along the chain.
    pub fn simplify(&mut self, path: &[NodeId]) -> Result<NodeId> {
        if path.is_empty() {
            return Err(Error::InvalidPath("empty path".into()));
        }
        let mut link_cost = 0.0;
        for &id in path {
            self.node(id)?;
        }
        for pair in path.windows(2) {
            link_cost += self.weight_unchecked(pair[0], pair[1]).ok_or_else(|| {
                Error::InvalidPath(format!("nodes {} and {} are not linked", pair[0], pair[1]))
            })?;
        }
        if path.len() == 1 {
            return Ok(path[0]);
        }
        let merged = {
            let parts: Vec<&Tracklet> = path.iter().map(|&id| self.node(id).expect("checked")).collect();
            Tracklet::chain(&parts, link_cost)?
        };
        for &id in path {
            self.remove(id);
        }
        Ok(self.insert(merged))
    }

    /// Nodes sorted by start frame then id, each emitted as one track with ids
    /// assigned in that order.
    pub fn tracks(&self) -> Vec<Track> {
        self.by_start
            .iter()
            .enumerate()
            .map(|(i, &(_, id))| {
                let t = self.node(id).expect("indexed node is live");
                Track::from_detections(i as u64, t.detections().iter().map(|d| &**d))
            })
            .collect()
    }

    /// Nodes with at least one extremity inside `[lo, hi]`.
    pub fn nodes_in_window(&self, lo: i64, hi: i64) -> Vec<NodeId> {
        if hi < lo || hi < 0 {
            return Vec::new();
        }
        let lo = lo.max(0).min(u32::MAX as i64) as u32;
        let hi = hi.min(u32::MAX as i64) as u32;
        let range = (lo, NodeId(0))..=(hi, NodeId(usize::MAX));
        let mut ids: Vec<NodeId> = self
            .by_start
            .range(range.clone())
            .chain(self.by_end.range(range))
            .map(|&(_, id)| id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn window(&self, lo: i64, hi: i64, direction: Direction) -> WindowView<'_> {
        WindowView::new(self, lo, hi, self.nodes_in_window(lo, hi), direction)
    }

    /// View over every node.
    pub fn full_view(&self, direction: Direction) -> WindowView<'_> {
        let lo = self.first_frame().map_or(0, |t| t as i64);
        let hi = self.latest_frame.map_or(0, |t| t as i64);
        WindowView::new(self, lo, hi, self.node_ids().collect(), direction)
    }
}

/// Builds the graph with one node per detection.
pub fn build_graph(detections: &[Detection], params: GraphParams) -> Result<TrackletGraph> {
    params.validate()?;
    check_consistent(detections)?;
    let mut sorted: Vec<&Detection> = detections.iter().collect();
    sorted.sort_by_key(|d| d.frame);
    let mut g = TrackletGraph::new(params);
    for d in sorted {
        g.insert(Tracklet::single(Arc::new(d.clone())));
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// A windowed view of the graph, optionally with every edge reversed.
///
/// Nodes are indexed in topological order of the view's orientation: by
/// start frame for a forward view, by decreasing end frame for a reversed
/// one. Inner costs are scaled by the fraction of the tracklet's span that
/// falls inside the window.
#[derive(Debug, Clone)]
pub struct WindowView<'g> {
    graph: &'g TrackletGraph,
    lo: i64,
    hi: i64,
    direction: Direction,
    ids: Vec<NodeId>,
    // Oriented times: forward uses (t_start, t_end), reversed (-t_end, -t_start).
    trail: Vec<i64>,
    lead: Vec<i64>,
    succ: Vec<(u32, u32)>,
    inner: Vec<f64>,
    sums: Vec<Summary>,
}

impl<'g> WindowView<'g> {
    fn new(graph: &'g TrackletGraph, lo: i64, hi: i64, mut ids: Vec<NodeId>, direction: Direction) -> Self {
        let oriented = |id: NodeId| {
            let s = graph.summary(id);
            match direction {
                Direction::Forward => (s.t_start as i64, s.t_end as i64),
                Direction::Backward => (-(s.t_end as i64), -(s.t_start as i64)),
            }
        };
        ids.sort_unstable_by_key(|&id| (oriented(id).0, id));
        let (trail, lead): (Vec<i64>, Vec<i64>) = ids.iter().map(|&id| oriented(id)).unzip();
        let tau = graph.params.tau_max as i64;
        let succ = lead
            .iter()
            .map(|&l| {
                let a = trail.partition_point(|&t| t <= l);
                let b = trail.partition_point(|&t| t <= l + tau);
                (a as u32, b as u32)
            })
            .collect();
        let inner = ids
            .iter()
            .map(|&id| {
                let s = graph.summary(id);
                if s.inner_cost == 0.0 {
                    return 0.0;
                }
                let (ts, te) = (s.t_start as i64, s.t_end as i64);
                let overlap = (te.min(hi) - ts.max(lo) + 1).max(0) as f64;
                s.inner_cost * overlap / (te - ts + 1) as f64
            })
            .collect();
        let sums = ids.iter().map(|&id| *graph.summary(id)).collect();
        WindowView {
            graph,
            lo,
            hi,
            direction,
            ids,
            trail,
            lead,
            succ,
            inner,
            sums,
        }
    }

    pub fn graph(&self) -> &'g TrackletGraph {
        self.graph
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn bounds(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Graph ids in view order.
    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        let s = self.graph.summary(id);
        let t = match self.direction {
            Direction::Forward => s.t_start as i64,
            Direction::Backward => -(s.t_end as i64),
        };
        let start = self.trail.partition_point(|&x| x < t);
        (start..self.ids.len())
            .take_while(|&i| self.trail[i] == t)
            .find(|&i| self.ids[i] == id)
    }

    /// Same node set with every edge flipped.
    pub fn reverse(&self) -> WindowView<'g> {
        WindowView::new(self.graph, self.lo, self.hi, self.ids.clone(), self.direction.flip())
    }

    /// Weight of the view edge `i -> j`, if any.
    pub fn edge(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = self.succ[i];
        if (a as usize..b as usize).contains(&j) {
            Some(self.weight(i, j))
        } else {
            None
        }
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        let (u, v) = match self.direction {
            Direction::Forward => (i, j),
            Direction::Backward => (j, i),
        };
        link_cost(&self.sums[u], &self.sums[v], &self.graph.params)
    }

    /// Nodes where a path from `source` may end: those whose leading
    /// extremity reaches the far window boundary, and those without
    /// successors in the view.
    pub fn frontier_sinks(&self, source: usize) -> Vec<bool> {
        let frontier = match self.direction {
            Direction::Forward => self.hi,
            Direction::Backward => -self.lo,
        };
        (0..self.ids.len())
            .map(|i| i != source && (self.lead[i] >= frontier || self.succ[i].0 == self.succ[i].1))
            .collect()
    }
}

impl Dag for WindowView<'_> {
    fn node_count(&self) -> usize {
        self.ids.len()
    }

    fn inner_cost(&self, u: usize) -> f64 {
        self.inner[u]
    }

    #[inline]
    fn for_each_successor<F: FnMut(usize, f64)>(&self, u: usize, mut f: F) {
        let (a, b) = self.succ[u];
        for j in a as usize..b as usize {
            f(j, self.weight(u, j));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{generate_toy, ToyConfig};
    use crate::path::{shortest_path, PathQuery};

    fn det(frame: u32, pos: &[f64]) -> Detection {
        Detection::new(frame, pos.to_vec(), vec![0.0], vec![1.0]).unwrap()
    }

    fn chain_of(dets: &[Detection]) -> Tracklet {
        let singles: Vec<_> = dets.iter().map(|d| Tracklet::single(Arc::new(d.clone()))).collect();
        let refs: Vec<_> = singles.iter().collect();
        Tracklet::chain(&refs, 0.0).unwrap()
    }

    fn params(tau_max: u32) -> GraphParams {
        GraphParams {
            tau_max,
            gamma: 3.0,
            predict_motion: true,
        }
    }

    #[test]
    fn weight_with_perfect_prediction_is_zero() {
        let u = chain_of(&[det(4, &[-1.0, 0.0]), det(5, &[0.0, 0.0])]);
        let v = Tracklet::single(Arc::new(det(6, &[1.0, 0.0])));
        assert_eq!(edge_weight(&u, &v, &params(120)), Some(0.0));
    }

    #[test]
    fn weight_penalizes_gaps() {
        let u = chain_of(&[det(4, &[-1.0, 0.0]), det(5, &[0.0, 0.0])]);
        let v = Tracklet::single(Arc::new(det(8, &[3.0, 0.0])));
        assert_eq!(edge_weight(&u, &v, &params(120)), Some(0.0));
        let v = Tracklet::single(Arc::new(det(8, &[4.0, 0.0])));
        assert_eq!(edge_weight(&u, &v, &params(120)), Some(7.0));
    }

    #[test]
    fn weight_outside_horizon_is_absent() {
        let u = Tracklet::single(Arc::new(det(0, &[0.0, 0.0])));
        let v = Tracklet::single(Arc::new(det(4, &[0.0, 0.0])));
        assert_eq!(edge_weight(&u, &v, &params(3)), None);
        assert!(edge_weight(&u, &v, &params(4)).is_some());
        assert_eq!(edge_weight(&v, &u, &params(10)), None);
    }

    #[test]
    fn build_graph_edge_counts() {
        let two_frames: Vec<_> = (0..2)
            .flat_map(|t| (0..3).map(move |k| det(t, &[k as f64, 0.0])))
            .collect();
        assert_eq!(build_graph(&two_frames, params(1)).unwrap().edge_count(), 9);

        let toy = generate_toy(&ToyConfig::default());
        let g = build_graph(&toy.data.detections, params(1)).unwrap();
        assert_eq!(g.node_count(), 33);
        assert_eq!(g.edge_count(), 90);
        assert_eq!(g.edges().len(), 90);

        let one_frame: Vec<_> = (0..3).map(|k| det(0, &[k as f64, 0.0])).collect();
        assert_eq!(build_graph(&one_frame, params(5)).unwrap().edge_count(), 0);
        assert!(build_graph(&[], params(5)).unwrap().is_empty());
    }

    #[test]
    fn window_membership() {
        let toy = generate_toy(&ToyConfig::default());
        let g = build_graph(&toy.data.detections, params(1)).unwrap();
        assert_eq!(g.window(0, 10, Direction::Forward).len(), 33);
        let w = g.window(0, 4, Direction::Forward);
        assert_eq!(w.len(), 15);
        for &id in w.ids() {
            assert!(g.node(id).unwrap().t_start() <= 4);
        }

        let long = chain_of(&(1..=9).map(|t| det(t, &[0.0, 0.0])).collect::<Vec<_>>());
        let mut g = TrackletGraph::new(params(1));
        g.insert(long);
        assert!(g.window(3, 5, Direction::Forward).is_empty());
        assert_eq!(g.window(9, 12, Direction::Forward).len(), 1);
    }

    #[test]
    fn reverse_is_an_involution() {
        let toy = generate_toy(&ToyConfig::default());
        let g = build_graph(&toy.data.detections, params(2)).unwrap();
        let w = g.window(2, 7, Direction::Forward);
        let rr = w.reverse().reverse();
        assert_eq!(w.ids(), rr.ids());
        let r = w.reverse();
        for i in 0..w.len() {
            for j in 0..w.len() {
                let ri = r.index_of(w.ids()[i]).unwrap();
                let rj = r.index_of(w.ids()[j]).unwrap();
                assert_eq!(w.edge(i, j), r.edge(rj, ri));
                assert_eq!(w.edge(i, j), rr.edge(i, j));
            }
        }
    }

    #[test]
    fn reversed_shortest_path_costs_agree() {
        let toy = generate_toy(&ToyConfig::with_p(0.5, 9));
        let g = build_graph(&toy.data.detections, params(2)).unwrap();
        let w = g.full_view(Direction::Forward);
        let r = w.reverse();
        for a in 0..w.len() {
            for b in 0..w.len() {
                let mut sinks = vec![false; w.len()];
                sinks[b] = true;
                let fwd = shortest_path(&w, &PathQuery { source: a, sinks: &sinks, hook: &[] }, None, f64::INFINITY);
                let (ra, rb) = (r.index_of(w.ids()[a]).unwrap(), r.index_of(w.ids()[b]).unwrap());
                let mut rsinks = vec![false; r.len()];
                rsinks[ra] = true;
                let bwd = shortest_path(&r, &PathQuery { source: rb, sinks: &rsinks, hook: &[] }, None, f64::INFINITY);
                match (fwd, bwd) {
                    (None, None) => {}
                    (Some(f), Some(b)) => assert!((f.cost - b.cost).abs() < 1e-9),
                    (f, b) => panic!("{f:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn simplify_merges_and_keeps_extremity_links() {
        let dets = vec![
            det(0, &[0.0, 0.0]),
            det(1, &[1.0, 0.0]),
            det(2, &[2.0, 0.0]),
            det(1, &[5.0, 5.0]),
            det(3, &[3.0, 0.0]),
        ];
        let mut g = build_graph(&dets, params(1)).unwrap();
        let ids: Vec<_> = g.node_ids().collect();
        // Sorted by frame: 0 -> (0,0), 1 -> (1,0), 2 -> (5,5), 3 -> (2,0), 4 -> (3,0)
        let merged = g.simplify(&[ids[0], ids[1], ids[3]]).unwrap();
        let m = g.node(merged).unwrap();
        assert_eq!((m.len(), m.t_start(), m.t_end()), (3, 0, 2));
        assert_eq!(m.inner_cost(), 2.0);
        assert_eq!(m.end_velocity(), &[1.0, 0.0]);
        assert_eq!(g.node_count(), 3);
        // The stray node at frame 1 loses its link into the chain interior.
        assert!(g.successors(ids[2]).unwrap().is_empty());
        assert_eq!(g.successors(merged).unwrap(), vec![(ids[4], 0.0)]);
        assert!(g.topological_order().is_ok());

        assert!(matches!(g.simplify(&[ids[0]]), Err(Error::UnknownNode(_))));
        assert!(matches!(g.simplify(&[merged, ids[2]]), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn increment_rules() {
        let mut g = TrackletGraph::new(params(2));
        g.increment(0, vec![det(0, &[0.0, 0.0])]).unwrap();
        assert_eq!(g.edge_count(), 0);
        g.increment(1, vec![det(1, &[0.0, 0.0])]).unwrap();
        g.increment(3, vec![det(3, &[0.0, 0.0])]).unwrap();
        // Frame 0 is three frames back, beyond tau_max = 2; frame 1 is exactly
        // tau_max back and links.
        assert_eq!(g.edge_count(), 2);
        assert!(matches!(
            g.increment(3, vec![det(3, &[0.0, 0.0])]),
            Err(Error::StaleFrame { frame: 3, latest: 3 })
        ));
        assert!(g.increment(5, vec![det(4, &[0.0, 0.0])]).is_err());
    }

    #[test]
    fn increments_replay_full_build() {
        let toy = generate_toy(&ToyConfig::with_p(0.5, 2));
        let full = build_graph(&toy.data.detections, params(1)).unwrap();
        let mut inc = TrackletGraph::new(params(1));
        for k in 0..11 {
            let batch = toy.data.detections.iter().filter(|d| d.frame == k).cloned().collect();
            inc.increment(k, batch).unwrap();
        }
        assert_eq!(full.edges(), inc.edges());
        assert_eq!(full.node_count(), inc.node_count());
    }

    #[test]
    fn frontier_sinks() {
        let toy = generate_toy(&ToyConfig::default());
        let g = build_graph(&toy.data.detections, params(1)).unwrap();
        let w = g.window(0, 3, Direction::Forward);
        let sinks = w.frontier_sinks(0);
        for (i, &id) in w.ids().iter().enumerate() {
            assert_eq!(sinks[i], g.node(id).unwrap().t_end() == 3, "node {id}");
        }
        let r = w.reverse();
        let src = r.len() - 1;
        let sinks = r.frontier_sinks(src);
        for (i, &id) in r.ids().iter().enumerate() {
            assert_eq!(sinks[i], i != src && g.node(id).unwrap().t_start() == 0);
        }
    }
}
