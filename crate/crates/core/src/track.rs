use std::collections::HashSet;

use crate::detection::Detection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub frame: u32,
    pub position: Vec<f64>,
}

/// One trajectory: a time-ordered sequence of positions under a single id.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn from_detections<'a>(id: u64, dets: impl IntoIterator<Item = &'a Detection>) -> Self {
        Track {
            id,
            points: dets
                .into_iter()
                .map(|d| TrackPoint {
                    frame: d.frame,
                    position: d.position.clone(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Key identifying a detection by value, used for conservation checks.
fn point_key(frame: u32, position: &[f64]) -> (u32, Vec<u64>) {
    (frame, position.iter().map(|v| v.to_bits()).collect())
}

/// Checks that `tracks` partition `detections`: every detection appears in
/// exactly one track, ids are unique and frames strictly increase within each
/// track.
pub fn check_partition(tracks: &[Track], detections: &[Detection]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut seen: Vec<(u32, Vec<u64>)> = Vec::new();
    for track in tracks {
        if !ids.insert(track.id) {
            return Err(Error::Invariant(format!("duplicate track id {}", track.id)));
        }
        for pair in track.points.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(Error::Invariant(format!(
                    "track {} is not strictly time-ordered at frame {}",
                    track.id, pair[1].frame
                )));
            }
        }
        seen.extend(track.points.iter().map(|p| point_key(p.frame, &p.position)));
    }
    let mut expected: Vec<_> = detections
        .iter()
        .map(|d| point_key(d.frame, &d.position))
        .collect();
    seen.sort();
    expected.sort();
    if seen != expected {
        return Err(Error::Invariant(format!(
            "tracks cover {} detections, input has {} (or contents differ)",
            seen.len(),
            expected.len()
        )));
    }
    Ok(())
}
