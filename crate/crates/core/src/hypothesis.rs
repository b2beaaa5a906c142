//! Key-node hypothesis testing.
//!
//! The key-node's appearance is taken as the reference appearance of one
//! target. Every other node in the observation window has its inner cost
//! raised by its dissimilarity to that reference, and the cheapest path from
//! the key-node to the window frontier is accepted only if it is cheap in
//! absolute terms, clearly cheaper than any rival, and leads back to the
//! key-node when traced in the opposite direction.

use serde::{Deserialize, Serialize};

use crate::detection::FeatureMetric;
use crate::error::{Error, Result};
use crate::graph::{Direction, NodeId, TrackletGraph, WindowView};
use crate::path::{deviations, second_shortest_path, shared_prefix, shortest_path, Dag, Path, PathQuery};
use crate::tracklet::{Extremity, Tracklet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceParams {
    /// Per-feature weight. A shorter list is extended with its last value.
    pub lambda: Vec<f64>,
    /// Per-feature cost charged when a feature is unreliable. Broadcast like
    /// `lambda`.
    pub w_fix: Vec<f64>,
    pub c_min: f64,
    pub c_max: f64,
    pub metric: FeatureMetric,
    /// Compare facing extremities built from this many detections instead of
    /// whole-tracklet averages.
    pub extremity: Option<usize>,
}

impl Default for AppearanceParams {
    fn default() -> Self {
        AppearanceParams {
            lambda: vec![1.0],
            w_fix: vec![5.0],
            c_min: 20.0,
            c_max: 100.0,
            metric: FeatureMetric::L1,
            extremity: None,
        }
    }
}

fn broadcast(v: &[f64], i: usize) -> f64 {
    v.get(i).or(v.last()).copied().unwrap_or(0.0)
}

impl AppearanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_min < self.c_max) {
            return Err(Error::Config(format!(
                "c_min ({}) must be below c_max ({})",
                self.c_min, self.c_max
            )));
        }
        if self.lambda.is_empty() || self.w_fix.is_empty() {
            return Err(Error::Config("lambda and w_fix need at least one value".into()));
        }
        if self
            .lambda
            .iter()
            .chain(&self.w_fix)
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::Config("lambda and w_fix must be nonnegative".into()));
        }
        if self.extremity == Some(0) {
            return Err(Error::Config("extremity detection count must be positive".into()));
        }
        Ok(())
    }

    pub fn lambda(&self, i: usize) -> f64 {
        broadcast(&self.lambda, i)
    }

    pub fn w_fix(&self, i: usize) -> f64 {
        broadcast(&self.w_fix, i)
    }

    pub fn reliability(&self, conf_mass: f64) -> f64 {
        reliability(conf_mass, self.c_min, self.c_max)
    }
}

/// Clamped linear ramp from zero at `c_min` to one at `c_max`.
pub fn reliability(conf_mass: f64, c_min: f64, c_max: f64) -> f64 {
    if conf_mass <= c_min {
        0.0
    } else if conf_mass >= c_max {
        1.0
    } else {
        (conf_mass - c_min) / (c_max - c_min)
    }
}

/// Per-feature (mean, confidence mass) pairs describing one side of a
/// comparison.
pub type FeatureSummary = Vec<(f64, f64)>;

pub fn feature_summary(t: &Tracklet, end: Option<(Extremity, usize)>) -> FeatureSummary {
    (0..t.feature_count()).map(|i| t.feature_stat(i, end)).collect()
}

/// Cost added to a node whose features are `v` when the hypothesis
/// appearance is `key`.
pub fn dissimilarity_increment(key: &[(f64, f64)], v: &[(f64, f64)], params: &AppearanceParams) -> f64 {
    key.iter()
        .zip(v)
        .enumerate()
        .map(|(i, (&(fk, ck), &(fv, cv)))| {
            let a = params.reliability(ck) * params.reliability(cv);
            let mut d = (1.0 - a) * params.w_fix(i);
            if a > 0.0 {
                d += a * params.lambda(i) * params.metric.distance(fk, fv);
            }
            d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationParams {
    /// Path cost allowed per window frame.
    pub k1: f64,
    /// Upper bound on cost(best) / cost(rival).
    pub k2: f64,
    /// Window length per key-node detection.
    pub kappa: f64,
    /// Use this window length for every key-node instead of `kappa * |v|`.
    pub fixed_window: Option<u32>,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            k1: 5.0,
            k2: 1.0 / 3.0,
            kappa: 5.0,
            fixed_window: None,
        }
    }
}

impl ValidationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) {
            return Err(Error::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(self.k2 > 0.0 && self.k2 <= 1.0) {
            return Err(Error::Config(format!("k2 must lie in (0, 1], got {}", self.k2)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.fixed_window == Some(0) {
            return Err(Error::Config("fixed window must span at least one frame".into()));
        }
        Ok(())
    }

    pub fn window_length(&self, key_len: usize) -> u32 {
        match self.fixed_window {
            Some(w) => w,
            None => ((self.kappa * key_len as f64).floor() as u32).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationMode {
    /// Two-stage ambiguity test.
    Conservative,
    /// Accept the shortest path whenever one exists.
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    /// No path reaches the window frontier within the absolute cost bound.
    NoPath,
    AbsoluteCost,
    Ratio,
    /// Traced backwards, the best path ends at another node.
    ReverseMismatch,
    ReverseAbsoluteCost,
    ReverseRatio,
    /// Partially overlapping rivals leave nothing to aggregate.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Validated,
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisResult {
    pub verdict: Verdict,
    /// Time-ordered nodes to aggregate; `[key]` on rejection.
    pub path: Vec<NodeId>,
    pub best_cost: Option<f64>,
    pub second_cost: Option<f64>,
    pub window: (i64, i64),
    pub direction: Direction,
}

impl HypothesisResult {
    pub fn is_validated(&self) -> bool {
        self.verdict == Verdict::Validated
    }
}

/// Observation window of `key` in `direction`, clipped to the frames present
/// in the graph.
pub fn observation_window(
    graph: &TrackletGraph,
    key: NodeId,
    direction: Direction,
    vparams: &ValidationParams,
) -> Result<(i64, i64)> {
    let t = graph.node(key)?;
    let w = vparams.window_length(t.len()) as i64;
    let (lo, hi) = match direction {
        Direction::Forward => (t.t_end() as i64, t.t_end() as i64 + w),
        Direction::Backward => (t.t_start() as i64 - w, t.t_start() as i64),
    };
    let first = graph.first_frame().unwrap_or(0) as i64;
    let last = graph.latest_frame().unwrap_or(0) as i64;
    Ok((lo.max(first), hi.min(last)))
}

/// Dissimilarity overlay for every node of `view` except `skip`.
fn overlay(view: &WindowView, key: &FeatureSummary, skip: usize, params: &AppearanceParams) -> Vec<f64> {
    let graph = view.graph();
    let facing = params.extremity.map(|k| match view.direction() {
        Direction::Forward => (Extremity::Head, k),
        Direction::Backward => (Extremity::Tail, k),
    });
    let mut stats = Vec::with_capacity(key.len());
    view.ids()
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            if i == skip {
                return 0.0;
            }
            let t = graph.node(id).expect("view nodes are live");
            stats.clear();
            stats.extend((0..t.feature_count()).map(|f| t.feature_stat(f, facing)));
            dissimilarity_increment(key, &stats, params)
        })
        .collect()
}

struct Stage {
    best: Option<Path>,
    second: Option<Path>,
    verdict: std::result::Result<(), Rejection>,
}

/// Runs the absolute and ratio tests on one view. `offset` is added to every
/// path cost.
fn stage(
    view: &WindowView,
    q: &PathQuery,
    offset: f64,
    budget: f64,
    k2: f64,
    reasons: [Rejection; 2],
) -> Stage {
    let best = shortest_path(view, q, None, budget - offset);
    let Some(b) = &best else {
        return Stage {
            best,
            second: None,
            verdict: Err(Rejection::NoPath),
        };
    };
    let cost = b.cost + offset;
    if !(cost < budget) {
        return Stage {
            best,
            second: None,
            verdict: Err(reasons[0]),
        };
    }
    // Rivals costing more than cost / k2 cannot fail the ratio test.
    let second = second_shortest_path(view, q, b, cost / k2 - offset);
    let verdict = match &second {
        Some(s) if !(cost < k2 * (s.cost + offset)) => Err(reasons[1]),
        _ => Ok(()),
    };
    Stage {
        best,
        second,
        verdict,
    }
}

/// Tests the hypothesis that `key`'s appearance identifies one target over
/// its observation window in `direction`.
pub fn hypothesis_test(
    graph: &TrackletGraph,
    key: NodeId,
    direction: Direction,
    vparams: &ValidationParams,
    aparams: &AppearanceParams,
    mode: ValidationMode,
) -> Result<HypothesisResult> {
    let key_node = graph.node(key)?;
    let window = observation_window(graph, key, direction, vparams)?;
    let rejected = |reason, best: Option<f64>, second: Option<f64>| HypothesisResult {
        verdict: Verdict::Rejected(reason),
        path: vec![key],
        best_cost: best,
        second_cost: second,
        window,
        direction,
    };
    let size = window.1 - window.0;
    if size <= 0 {
        return Ok(rejected(Rejection::NoPath, None, None));
    }

    let view = graph.window(window.0, window.1, direction);
    let src = view
        .index_of(key)
        .ok_or_else(|| Error::Invariant(format!("key {key} missing from its own window")))?;
    let key_end = aparams.extremity.map(|k| match direction {
        Direction::Forward => (Extremity::Tail, k),
        Direction::Backward => (Extremity::Head, k),
    });
    let key_features = feature_summary(key_node, key_end);
    let hook = overlay(&view, &key_features, src, aparams);
    let sinks = view.frontier_sinks(src);
    let q = PathQuery {
        source: src,
        sinks: &sinks,
        hook: &hook,
    };
    let to_ids = |view: &WindowView, nodes: &[usize]| -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = nodes.iter().map(|&i| view.ids()[i]).collect();
        if view.direction() == Direction::Backward {
            ids.reverse();
        }
        ids
    };

    if mode == ValidationMode::Always {
        return Ok(match shortest_path(&view, &q, None, f64::INFINITY) {
            Some(best) => HypothesisResult {
                verdict: Verdict::Validated,
                path: to_ids(&view, &best.nodes),
                best_cost: Some(best.cost),
                second_cost: None,
                window,
                direction,
            },
            None => rejected(Rejection::NoPath, None, None),
        });
    }

    let budget = vparams.k1 * size as f64;
    let first = stage(
        &view,
        &q,
        0.0,
        budget,
        vparams.k2,
        [Rejection::AbsoluteCost, Rejection::Ratio],
    );
    let best_cost = first.best.as_ref().map(|p| p.cost);
    let second_cost = first.second.as_ref().map(|p| p.cost);
    if let Err(reason) = first.verdict {
        return Ok(rejected(reason, best_cost, second_cost));
    }
    let best = first.best.expect("passed stage has a path");

    // Second stage: from the far end of the best path back towards the key.
    let far = view.ids()[best.last()];
    let reversed = view.reverse();
    let far_idx = reversed.index_of(far).expect("same node set");
    let key_idx = reversed.index_of(key).expect("same node set");
    let mut back_hook = overlay(&reversed, &key_features, key_idx, aparams);
    let far_offset = back_hook[far_idx];
    back_hook[far_idx] = 0.0;
    let back_sinks = reversed.frontier_sinks(far_idx);
    let back_q = PathQuery {
        source: far_idx,
        sinks: &back_sinks,
        hook: &back_hook,
    };
    let second = stage(
        &reversed,
        &back_q,
        far_offset,
        budget,
        vparams.k2,
        [Rejection::ReverseAbsoluteCost, Rejection::ReverseRatio],
    );
    match (&second.best, second.verdict) {
        (Some(b), _) if b.last() != key_idx => {
            return Ok(rejected(Rejection::ReverseMismatch, best_cost, second_cost))
        }
        (_, Err(reason)) => return Ok(rejected(reason, best_cost, second_cost)),
        _ => {}
    }

    // Rivals that follow the best path for a while and then branch off make
    // the part beyond the branch point ambiguous.
    let contested = deviations(&view, &q, &best, best.cost / vparams.k2);
    let alternatives: Vec<Vec<usize>> = contested.into_iter().map(|p| p.nodes).collect();
    let kept = shared_prefix(&best.nodes, &alternatives);
    if kept.len() < 2 {
        return Ok(rejected(Rejection::Truncated, best_cost, second_cost));
    }
    Ok(HypothesisResult {
        verdict: Verdict::Validated,
        path: to_ids(&view, &kept),
        best_cost,
        second_cost,
        window,
        direction,
    })
}

/// Checks that `nodes` are consecutive links of `view`; used by tests and
/// debug assertions.
pub fn is_view_path(view: &WindowView, nodes: &[usize]) -> bool {
    nodes.windows(2).all(|p| {
        let mut found = false;
        view.for_each_successor(p[0], |v, _| found |= v == p[1]);
        found
    })
}
