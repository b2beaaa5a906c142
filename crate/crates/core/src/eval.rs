//! CLEAR MOT scoring of hypothesis tracks against ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::detection::euclidean;
use crate::error::{Error, Result};
use crate::track::Track;

/// Default match radius for the toy benchmark, in world units.
pub const TOY_MATCH_RADIUS: f64 = 10.0;

const SCALE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub gt_count: u64,
    pub misses: u64,
    pub false_positives: u64,
    pub switches: u64,
    pub reinitializations: u64,
    /// `1 - (misses + false positives + switches + reinitializations) / gt_count`.
    /// With no ground truth it is 1 when there are no errors and minus
    /// infinity otherwise.
    pub mota: f64,
    /// Mean distance over matched pairs, 0 when nothing matched.
    pub motp: f64,
    pub matches: u64,
}

impl MotReport {
    pub fn errors(&self) -> u64 {
        self.misses + self.false_positives + self.switches + self.reinitializations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum MotEvent {
    Match { frame: u32, gt: u64, hyp: u64, distance: f64 },
    Miss { frame: u32, gt: u64 },
    FalsePositive { frame: u32, hyp: u64 },
    /// `gt` moved from `from` to a hypothesis already bound to another target.
    Switch { frame: u32, gt: u64, from: u64, to: u64 },
    /// `gt` moved from `from` to a hypothesis never bound to another target.
    Reinitialization { frame: u32, gt: u64, from: u64, to: u64 },
}

pub fn evaluate(gt: &[Track], hyp: &[Track], match_radius: f64) -> Result<MotReport> {
    evaluate_with_events(gt, hyp, match_radius).map(|(r, _)| r)
}

type FramePoints<'a> = Vec<(u64, &'a [f64])>;

fn by_frame(tracks: &[Track]) -> BTreeMap<u32, FramePoints<'_>> {
    let mut frames: BTreeMap<u32, FramePoints<'_>> = BTreeMap::new();
    for t in tracks {
        for p in &t.points {
            frames.entry(p.frame).or_default().push((t.id, &p.position));
        }
    }
    frames
}

/// Minimum-total-distance matching of `rows` to `cols` restricted to pairs
/// within `radius`, maximising the number of pairs first.
fn assign(rows: &[&[f64]], cols: &[&[f64]], radius: f64) -> Vec<(usize, usize)> {
    if rows.is_empty() || cols.is_empty() {
        return Vec::new();
    }
    let transpose = rows.len() > cols.len();
    let (r, c) = if transpose { (cols, rows) } else { (rows, cols) };
    let unit = |d: f64| (d * SCALE).round() as i64;
    let big = (unit(radius) + 1).saturating_mul(r.len() as i64 + 1);
    let mut weights = Matrix::new(r.len(), c.len(), 0i64);
    for i in 0..r.len() {
        for j in 0..c.len() {
            let d = euclidean(r[i], c[j]);
            weights[(i, j)] = if d <= radius { unit(d) } else { big };
        }
    }
    let (_, cols_of_rows) = kuhn_munkres_min(&weights);
    cols_of_rows
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| euclidean(r[i], c[j]) <= radius)
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .collect()
}

/// Like [`evaluate`], also returning the per-frame event log.
pub fn evaluate_with_events(
    gt: &[Track],
    hyp: &[Track],
    match_radius: f64,
) -> Result<(MotReport, Vec<MotEvent>)> {
    if !(match_radius >= 0.0) || !match_radius.is_finite() {
        return Err(Error::Config(format!(
            "match radius must be finite and non-negative, got {match_radius}"
        )));
    }
    let gt_frames = by_frame(gt);
    let hyp_frames = by_frame(hyp);
    let frames: BTreeSet<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();

    let mut mapping: HashMap<u64, u64> = HashMap::new();
    let mut bound_to: HashMap<u64, HashSet<u64>> = HashMap::new();
    let mut events = Vec::new();
    let mut report = MotReport {
        gt_count: 0,
        misses: 0,
        false_positives: 0,
        switches: 0,
        reinitializations: 0,
        mota: 1.0,
        motp: 0.0,
        matches: 0,
    };
    let mut distance_sum = 0.0;
    let empty = Vec::new();

    for frame in frames {
        let g = gt_frames.get(&frame).unwrap_or(&empty);
        let h = hyp_frames.get(&frame).unwrap_or(&empty);
        report.gt_count += g.len() as u64;
        let mut g_matched = vec![None; g.len()];
        let mut h_used = vec![false; h.len()];

        // Correspondences from earlier frames that are still valid.
        for (gi, (gid, gpos)) in g.iter().enumerate() {
            let Some(&hid) = mapping.get(gid) else { continue };
            if let Some(hi) = h.iter().position(|(id, _)| *id == hid) {
                if !h_used[hi] && euclidean(gpos, h[hi].1) <= match_radius {
                    g_matched[gi] = Some(hi);
                    h_used[hi] = true;
                }
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| g_matched[i].is_none()).collect();
        let free_h: Vec<usize> = (0..h.len()).filter(|&i| !h_used[i]).collect();
        let rows: Vec<&[f64]> = free_g.iter().map(|&i| g[i].1).collect();
        let cols: Vec<&[f64]> = free_h.iter().map(|&i| h[i].1).collect();
        for (r, c) in assign(&rows, &cols, match_radius) {
            let (gi, hi) = (free_g[r], free_h[c]);
            let (gid, hid) = (g[gi].0, h[hi].0);
            if let Some(&prev) = mapping.get(&gid) {
                if prev != hid {
                    let foreign = bound_to.get(&hid).is_some_and(|s| s.iter().any(|&o| o != gid));
                    if foreign {
                        report.switches += 1;
                        events.push(MotEvent::Switch { frame, gt: gid, from: prev, to: hid });
                    } else {
                        report.reinitializations += 1;
                        events.push(MotEvent::Reinitialization { frame, gt: gid, from: prev, to: hid });
                    }
                }
            }
            g_matched[gi] = Some(hi);
            h_used[hi] = true;
        }

        for (gi, m) in g_matched.iter().enumerate() {
            let gid = g[gi].0;
            match *m {
                Some(hi) => {
                    let hid = h[hi].0;
                    let d = euclidean(g[gi].1, h[hi].1);
                    distance_sum += d;
                    report.matches += 1;
                    mapping.insert(gid, hid);
                    bound_to.entry(hid).or_default().insert(gid);
                    events.push(MotEvent::Match { frame, gt: gid, hyp: hid, distance: d });
                }
                None => {
                    report.misses += 1;
                    events.push(MotEvent::Miss { frame, gt: gid });
                }
            }
        }
        for (hi, used) in h_used.iter().enumerate() {
            if !used {
                report.false_positives += 1;
                events.push(MotEvent::FalsePositive { frame, hyp: h[hi].0 });
            }
        }
    }

    let errors = report.errors();
    report.mota = if report.gt_count > 0 {
        1.0 - errors as f64 / report.gt_count as f64
    } else if errors == 0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    if report.matches > 0 {
        report.motp = distance_sum / report.matches as f64;
    }
    Ok((report, events))
}
