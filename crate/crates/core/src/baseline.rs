//! Conventional shortest-paths baseline and an exhaustive partition oracle
//! for small instances.

use serde::{Deserialize, Serialize};

use crate::detection::{check_consistent, euclidean, Detection, FeatureMetric};
use crate::error::{Error, Result};
use crate::path::{shortest_path, AdjacencyDag, PathQuery};
use crate::track::Track;

/// Largest instance [`brute_force_partition`] accepts.
pub const ENUMERATION_LIMIT: usize = 18;

/// Pairwise link cost between two detections: Euclidean distance plus a
/// confidence-weighted appearance term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineCosts {
    pub w_fix: f64,
    pub lambda: f64,
    pub metric: FeatureMetric,
}

impl BaselineCosts {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_fix >= 0.0 && self.lambda >= 0.0) || !self.w_fix.is_finite() || !self.lambda.is_finite() {
            return Err(Error::Config("baseline costs must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn spatial(&self, a: &Detection, b: &Detection) -> f64 {
        euclidean(&a.position, &b.position)
    }

    /// `sum_i c_a c_b lambda d(f_a, f_b) + (1 - c_a c_b) w_fix`
    pub fn appearance(&self, a: &Detection, b: &Detection) -> f64 {
        (0..a.feature_count())
            .map(|i| {
                let cc = a.confidences[i] * b.confidences[i];
                cc * self.lambda * self.metric.distance(a.features[i], b.features[i])
                    + (1.0 - cc) * self.w_fix
            })
            .sum()
    }

    pub fn total(&self, a: &Detection, b: &Detection) -> f64 {
        self.spatial(a, b) + self.appearance(a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KspOutput {
    pub tracks: Vec<Track>,
    /// Detection indices of each extracted path, in time order.
    pub paths: Vec<Vec<usize>>,
    /// Sum of link costs over all extracted paths.
    pub cost: f64,
    /// How many of the requested paths could not be found.
    pub shortfall: usize,
}

/// Indices of `detections` sorted by (frame, input order).
fn frame_order(detections: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by_key(|&i| (detections[i].frame, i));
    order
}

/// Extracts `k` trajectories by successive shortest paths with node removal.
///
/// Paths run from a detection of the first frame to one of the last frame and
/// link detections of consecutive frames only. Detections left on no path are
/// not reported.
pub fn ksp_track(detections: &[Detection], k: usize, costs: &BaselineCosts) -> Result<KspOutput> {
    if k == 0 {
        return Err(Error::Config("track count must be at least 1".into()));
    }
    check_consistent(detections)?;
    costs.validate()?;
    let order = frame_order(detections);
    let n = order.len();
    let mut out = KspOutput {
        tracks: Vec::new(),
        paths: Vec::new(),
        cost: 0.0,
        shortfall: k,
    };
    if n == 0 {
        return Ok(out);
    }
    let first = detections[order[0]].frame;
    let last = detections[order[n - 1]].frame;

    // Node 0 is the source, node n + 1 the sink, node r + 1 is order[r].
    let mut dag = AdjacencyDag::new(vec![0.0; n + 2]);
    let mut start = 0;
    while start < n {
        let frame = detections[order[start]].frame;
        let mut end = start;
        while end < n && detections[order[end]].frame == frame {
            end += 1;
        }
        let mut next_end = end;
        while next_end < n && detections[order[next_end]].frame == frame + 1 {
            next_end += 1;
        }
        for r in start..end {
            let a = &detections[order[r]];
            if frame == first {
                dag.add_edge(0, r + 1, 0.0)?;
            }
            if frame == last {
                dag.add_edge(r + 1, n + 1, 0.0)?;
            }
            for s in end..next_end {
                dag.add_edge(r + 1, s + 1, costs.total(a, &detections[order[s]]))?;
            }
        }
        start = end;
    }

    let mut sinks = vec![false; n + 2];
    sinks[n + 1] = true;
    let q = PathQuery {
        source: 0,
        sinks: &sinks,
        hook: &[],
    };
    let mut excluded = vec![false; n + 2];
    for id in 0..k {
        let Some(path) = shortest_path(&dag, &q, Some(&excluded), f64::INFINITY) else {
            break;
        };
        let inner = &path.nodes[1..path.nodes.len() - 1];
        for &v in inner {
            excluded[v] = true;
        }
        let dets: Vec<usize> = inner.iter().map(|&v| order[v - 1]).collect();
        out.tracks.push(Track::from_detections(
            id as u64,
            dets.iter().map(|&i| &detections[i]),
        ));
        out.paths.push(dets);
        out.cost += path.cost;
        out.shortfall -= 1;
    }
    Ok(out)
}

/// Track cost used by [`brute_force_partition`] and [`partition_cost`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModel {
    /// Links between temporally consecutive members only.
    Consecutive,
    /// Spatial cost between consecutive members, appearance cost between
    /// every pair of members.
    AllPairs,
}

/// Cost of one track given as time-ordered detection indices.
pub fn track_cost(detections: &[Detection], track: &[usize], model: CostModel, costs: &BaselineCosts) -> f64 {
    let mut total = 0.0;
    for (j, &b) in track.iter().enumerate().skip(1) {
        let prev = &detections[track[j - 1]];
        let cur = &detections[b];
        match model {
            CostModel::Consecutive => total += costs.total(prev, cur),
            CostModel::AllPairs => {
                total += costs.spatial(prev, cur);
                for &a in &track[..j] {
                    total += costs.appearance(&detections[a], cur);
                }
            }
        }
    }
    total
}

pub fn partition_cost(
    detections: &[Detection],
    tracks: &[Vec<usize>],
    model: CostModel,
    costs: &BaselineCosts,
) -> f64 {
    tracks.iter().map(|t| track_cost(detections, t, model, costs)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Non-empty tracks as time-ordered detection indices, ordered by their
    /// first detection.
    pub tracks: Vec<Vec<usize>>,
    pub cost: f64,
}

struct Search<'a> {
    dets: &'a [Detection],
    order: Vec<usize>,
    k: usize,
    model: CostModel,
    costs: &'a BaselineCosts,
    labels: Vec<Vec<usize>>,
    best: Option<(f64, Vec<Vec<usize>>)>,
}

impl Search<'_> {
    /// Cost of appending detection `d` to track `label`.
    fn step(&self, label: usize, d: usize) -> f64 {
        let track = &self.labels[label];
        let Some(&prev) = track.last() else {
            return 0.0;
        };
        let cur = &self.dets[d];
        match self.model {
            CostModel::Consecutive => self.costs.total(&self.dets[prev], cur),
            CostModel::AllPairs => {
                self.costs.spatial(&self.dets[prev], cur)
                    + track.iter().map(|&a| self.costs.appearance(&self.dets[a], cur)).sum::<f64>()
            }
        }
    }

    fn visit(&mut self, r: usize, cost: f64) {
        if self.best.as_ref().is_some_and(|(b, _)| cost >= *b) {
            return;
        }
        if r == self.order.len() {
            self.best = Some((cost, self.labels.clone()));
            return;
        }
        let d = self.order[r];
        let frame = self.dets[d].frame;
        let mut opened = false;
        for label in 0..self.k {
            let empty = self.labels[label].is_empty();
            // Empty labels are interchangeable: only try the first one.
            if empty && opened {
                break;
            }
            opened |= empty;
            if self.labels[label].last().is_some_and(|&l| self.dets[l].frame == frame) {
                continue;
            }
            let c = self.step(label, d);
            self.labels[label].push(d);
            self.visit(r + 1, cost + c);
            self.labels[label].pop();
        }
    }
}

/// Minimum-cost split of `detections` into at most `k` tracks holding at most
/// one detection per frame each, by exhaustive search.
pub fn brute_force_partition(
    detections: &[Detection],
    k: usize,
    model: CostModel,
    costs: &BaselineCosts,
) -> Result<Partition> {
    if detections.len() > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            detections: detections.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    if k == 0 {
        return Err(Error::Config("track count must be at least 1".into()));
    }
    check_consistent(detections)?;
    costs.validate()?;
    let order = frame_order(detections);
    let mut search = Search {
        dets: detections,
        order,
        k,
        model,
        costs,
        labels: vec![Vec::new(); k],
        best: None,
    };
    search.visit(0, 0.0);
    let (cost, labels) = search.best.ok_or_else(|| {
        Error::Config(format!("some frame holds more than {k} detections"))
    })?;
    let mut tracks: Vec<Vec<usize>> = labels.into_iter().filter(|t| !t.is_empty()).collect();
    tracks.sort_by_key(|t| (detections[t[0]].frame, t[0]));
    Ok(Partition { tracks, cost })
}
