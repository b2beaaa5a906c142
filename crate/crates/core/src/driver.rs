//! The outer tracking loop: repeated scans of the graph in which every node
//! is tested once as key-node, validated paths are merged, and the
//! validation thresholds are relaxed between scans.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::detection::{check_consistent, substream, Detection, FeatureMetric};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Direction, GraphParams, NodeId, TrackletGraph};
use crate::hypothesis::{
    hypothesis_test, observation_window, AppearanceParams, ValidationMode, ValidationParams,
};
use crate::track::Track;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulePolicy {
    LongestFirst,
    Random,
    ConfidenceFirst,
    Recency,
}

/// Linear ramp from `start` to `end` over `iters` steps, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub end: f64,
    pub iters: u32,
}

impl Ramp {
    pub fn constant(v: f64) -> Self {
        Ramp {
            start: v,
            end: v,
            iters: 1,
        }
    }

    /// Value after `steps` relaxation steps.
    pub fn after(&self, steps: u32) -> f64 {
        if steps >= self.iters {
            return self.end;
        }
        self.start + (self.end - self.start) * steps as f64 / self.iters as f64
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.start <= self.end) || self.iters < 1 {
            return Err(Error::Config(format!(
                "{name} ramp needs start <= end and at least one step"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxSchedule {
    pub k1: Ramp,
    pub k2: Ramp,
}

impl RelaxSchedule {
    pub fn constant(k1: f64, k2: f64) -> Self {
        RelaxSchedule {
            k1: Ramp::constant(k1),
            k2: Ramp::constant(k2),
        }
    }

    pub fn initial(&self) -> (f64, f64) {
        (self.k1.start, self.k2.start)
    }

    pub fn relaxed(&self) -> (f64, f64) {
        (self.k1.end, self.k2.end)
    }
}

/// Thresholds for the scan following scan `scan_index` (1-based).
pub fn relax(schedule: &RelaxSchedule, scan_index: u32) -> (f64, f64) {
    (schedule.k1.after(scan_index), schedule.k2.after(scan_index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    pub graph: GraphParams,
    pub appearance: AppearanceParams,
    /// `k1` and `k2` here are ignored in favour of `relax`.
    pub validation: ValidationParams,
    pub relax: RelaxSchedule,
    pub mode: ValidationMode,
    pub max_iter: u32,
    pub schedule: SchedulePolicy,
    pub delta_slide: u32,
    pub seed: u64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        DriverConfig::reference()
    }
}

impl DriverConfig {
    /// Working point for real-scale data.
    pub fn reference() -> Self {
        DriverConfig {
            graph: GraphParams::default(),
            appearance: AppearanceParams::default(),
            validation: ValidationParams::default(),
            relax: RelaxSchedule {
                k1: Ramp {
                    start: 5.0,
                    end: 30.0,
                    iters: 50,
                },
                k2: Ramp {
                    start: 1.0 / 3.0,
                    end: 1.0 / 1.1,
                    iters: 20,
                },
            },
            mode: ValidationMode::Conservative,
            max_iter: 60,
            schedule: SchedulePolicy::LongestFirst,
            delta_slide: 200,
            seed: 0,
        }
    }

    /// Working point for the synthetic crowd scenes: the reference setting with
    /// the absolute budget and reliability limits scaled to the scenes'
    /// cost units and confidence rate.
    pub fn scene() -> Self {
        let mut cfg = DriverConfig::reference();
        cfg.appearance.lambda = vec![3.0];
        cfg.appearance.c_min = 2.0;
        cfg.appearance.c_max = 10.0;
        cfg.relax.k1 = Ramp {
            start: 15.0,
            end: 60.0,
            iters: 50,
        };
        cfg
    }

    /// Setting for the three-target toy benchmark: links only between
    /// consecutive frames, plain distances, raw confidences as reliability.
    pub fn toy() -> Self {
        DriverConfig {
            graph: GraphParams {
                tau_max: 1,
                gamma: 3.0,
                predict_motion: false,
            },
            appearance: AppearanceParams {
                lambda: vec![300.0],
                w_fix: vec![10.0],
                c_min: 0.0,
                c_max: 1.0,
                metric: FeatureMetric::Angular,
                extremity: None,
            },
            validation: ValidationParams {
                kappa: 2.5,
                ..ValidationParams::default()
            },
            relax: RelaxSchedule {
                k1: Ramp {
                    start: 20.0,
                    end: 120.0,
                    iters: 20,
                },
                k2: Ramp {
                    start: 0.1,
                    end: 1.0 / 1.1,
                    iters: 20,
                },
            },
            mode: ValidationMode::Conservative,
            max_iter: 40,
            schedule: SchedulePolicy::LongestFirst,
            delta_slide: 3,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.appearance.validate()?;
        self.relax.k1.validate("k1")?;
        self.relax.k2.validate("k2")?;
        let (k1, k2) = self.relax.initial();
        let (r1, r2) = self.relax.relaxed();
        for (a, b) in [(k1, k2), (r1, r2)] {
            ValidationParams {
                k1: a,
                k2: b,
                ..self.validation
            }
            .validate()?;
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.delta_slide < 1 {
            return Err(Error::Config("delta_slide must be at least 1".into()));
        }
        Ok(())
    }

    fn thresholds(&self, (k1, k2): (f64, f64)) -> ValidationParams {
        ValidationParams {
            k1,
            k2,
            ..self.validation
        }
    }
}

/// Direction of scan `scan` (1-based): forward on odd scans.
pub fn scan_direction(scan: u32) -> Direction {
    if scan % 2 == 1 {
        Direction::Forward
    } else {
        Direction::Backward
    }
}

fn recency_score(len: usize, t_end: u32, now: u32) -> f64 {
    len as f64 / (now.saturating_sub(t_end).max(1)) as f64
}

/// Order in which pending nodes are tested during one scan. The first
/// element is what [`schedule`] would pick.
pub fn scan_order(
    graph: &TrackletGraph,
    pending: &[NodeId],
    policy: SchedulePolicy,
    now: Option<u32>,
    seed: u64,
    scan: u32,
) -> Vec<NodeId> {
    let mut ids = pending.to_vec();
    if policy == SchedulePolicy::Random {
        ids.sort_unstable();
        ids.shuffle(&mut substream(seed, scan as u64));
        return ids;
    }
    let now = now.or(graph.latest_frame()).unwrap_or(0);
    let key = |id: &NodeId| {
        let t = graph.node(*id).expect("pending nodes are live");
        let score = match policy {
            SchedulePolicy::LongestFirst => t.len() as f64,
            SchedulePolicy::ConfidenceFirst => t.total_conf_mass(),
            SchedulePolicy::Recency => recency_score(t.len(), t.t_end(), now),
            SchedulePolicy::Random => unreachable!(),
        };
        (score, t.t_start(), *id)
    };
    ids.sort_by(|a, b| {
        let (sa, ta, ia) = key(a);
        let (sb, tb, ib) = key(b);
        sb.partial_cmp(&sa)
            .unwrap_or(Ordering::Equal)
            .then(ta.cmp(&tb))
            .then(ia.cmp(&ib))
    });
    ids
}

/// Next key-node among `pending`.
pub fn schedule(
    graph: &TrackletGraph,
    pending: &[NodeId],
    policy: SchedulePolicy,
    now: Option<u32>,
    seed: u64,
) -> Option<NodeId> {
    scan_order(graph, pending, policy, now, seed, 0).first().copied()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScanStats {
    pub tested: usize,
    pub validated: usize,
    pub nodes_after: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tracks: Vec<Track>,
    pub scans: Vec<ScanStats>,
    /// The tracklet graph at the end of the run, one node per track.
    pub graph: TrackletGraph,
}

/// Offline tracking over the whole sequence.
pub fn run_offline(detections: &[Detection], cfg: &DriverConfig) -> Result<RunOutput> {
    run_offline_observed(detections, cfg, |_| Ok(()))
}

/// As [`run_offline`], calling `observe` on the graph after construction and
/// after every merge.
pub fn run_offline_observed<F>(detections: &[Detection], cfg: &DriverConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(&TrackletGraph) -> Result<()>,
{
    cfg.validate()?;
    let mut graph = build_graph(detections, cfg.graph)?;
    observe(&graph)?;
    let mut scans = Vec::with_capacity(cfg.max_iter as usize);
    let mut thresholds = cfg.relax.initial();
    let final_thresholds = cfg.relax.relaxed();
    let mut idle = 0;
    for scan in 1..=cfg.max_iter {
        let direction = scan_direction(scan);
        let pending: Vec<NodeId> = graph.node_ids().collect();
        let order = scan_order(&graph, &pending, cfg.schedule, None, cfg.seed, scan);
        let vparams = cfg.thresholds(thresholds);
        let mut stats = ScanStats::default();
        for key in order {
            // Nodes consumed by an earlier merge in this scan are gone.
            if !graph.contains(key) {
                continue;
            }
            stats.tested += 1;
            let res = hypothesis_test(&graph, key, direction, &vparams, &cfg.appearance, cfg.mode)?;
            if res.is_validated() {
                graph.simplify(&res.path)?;
                stats.validated += 1;
                observe(&graph)?;
            }
        }
        stats.nodes_after = graph.node_count();
        scans.push(stats);
        // Once relaxation is complete, a forward and a backward scan that
        // both change nothing mean every later scan repeats them.
        idle = if stats.validated == 0 && thresholds == final_thresholds {
            idle + 1
        } else {
            0
        };
        if idle == 2 {
            // Remaining scans alternate between the last two, unchanged.
            while scans.len() < cfg.max_iter as usize {
                scans.push(scans[scans.len() - 2]);
            }
            break;
        }
        thresholds = relax(&cfg.relax, scan);
    }
    Ok(RunOutput {
        tracks: graph.tracks(),
        scans,
        graph,
    })
}

/// Online tracker fed one frame at a time.
#[derive(Debug, Clone)]
pub struct IncrementalTracker {
    cfg: DriverConfig,
    graph: TrackletGraph,
    frames: u32,
}

impl IncrementalTracker {
    pub fn new(cfg: DriverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(IncrementalTracker {
            graph: TrackletGraph::new(cfg.graph),
            cfg,
            frames: 0,
        })
    }

    pub fn graph(&self) -> &TrackletGraph {
        &self.graph
    }

    /// Adds the detections of `frame` and runs one scan over the graph.
    pub fn push_frame(&mut self, frame: u32, detections: Vec<Detection>) -> Result<ScanStats> {
        self.graph.increment(frame, detections)?;
        self.frames += 1;
        self.scan(frame, scan_direction(self.frames), false)
    }

    /// Closes the stream: every node is treated as older than the sliding
    /// window, and scans with relaxed thresholds run until a forward and a
    /// backward scan both change nothing, or `max_iter` scans have run.
    pub fn finish(&mut self) -> Result<Vec<ScanStats>> {
        let Some(now) = self.graph.latest_frame() else {
            return Ok(Vec::new());
        };
        let mut scans = Vec::new();
        let mut idle = 0;
        while idle < 2 && scans.len() < self.cfg.max_iter as usize {
            self.frames += 1;
            let stats = self.scan(now, scan_direction(self.frames), true)?;
            idle = if stats.validated == 0 { idle + 1 } else { 0 };
            scans.push(stats);
        }
        Ok(scans)
    }

    fn scan(&mut self, now: u32, direction: Direction, closed: bool) -> Result<ScanStats> {
        let pending: Vec<NodeId> = self.graph.node_ids().collect();
        let order = scan_order(
            &self.graph,
            &pending,
            SchedulePolicy::Recency,
            Some(now),
            self.cfg.seed,
            self.frames,
        );
        let conservative = self.cfg.thresholds(self.cfg.relax.initial());
        let relaxed = self.cfg.thresholds(self.cfg.relax.relaxed());
        let slide_start = now as i64 - self.cfg.delta_slide as i64;
        let mut stats = ScanStats::default();
        for key in order {
            if !self.graph.contains(key) {
                continue;
            }
            stats.tested += 1;
            let vparams = if closed
                || observation_window(&self.graph, key, direction, &conservative)?.1 < slide_start
            {
                &relaxed
            } else {
                &conservative
            };
            let res = hypothesis_test(&self.graph, key, direction, vparams, &self.cfg.appearance, self.cfg.mode)?;
            if res.is_validated() {
                self.graph.simplify(&res.path)?;
                stats.validated += 1;
            }
        }
        stats.nodes_after = self.graph.node_count();
        Ok(stats)
    }

    pub fn tracks(&self) -> Vec<Track> {
        self.graph.tracks()
    }
}

/// Feeds `detections` frame by frame to an [`IncrementalTracker`], then
/// closes the stream.
pub fn run_incremental(detections: &[Detection], cfg: &DriverConfig) -> Result<RunOutput> {
    check_consistent(detections)?;
    let mut tracker = IncrementalTracker::new(cfg.clone())?;
    let mut sorted: Vec<&Detection> = detections.iter().collect();
    sorted.sort_by_key(|d| d.frame);
    let mut scans = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let frame = sorted[i].frame;
        let mut batch = Vec::new();
        while i < sorted.len() && sorted[i].frame == frame {
            batch.push(sorted[i].clone());
            i += 1;
        }
        scans.push(tracker.push_frame(frame, batch)?);
    }
    scans.extend(tracker.finish()?);
    Ok(RunOutput {
        tracks: tracker.tracks(),
        scans,
        graph: tracker.graph,
    })
}
