//! Random small instances and the run invariants shared by the property and
//! acceptance suites.

#![allow(dead_code)]

use std::collections::BTreeMap;

use iht::detection::{substream, Detection};
use iht::driver::{run_offline_observed, DriverConfig, IncrementalTracker, SchedulePolicy};
use iht::hypothesis::ValidationMode;
use iht::track::check_partition;
use rand::Rng;

/// Up to 4 targets over up to 12 frames in 1 or 2 dimensions with 1 or 2
/// features; some detections are missed and some features unobserved.
pub fn instance(seed: u64) -> Vec<Detection> {
    let mut rng = substream(seed, 7);
    let targets = rng.random_range(1..=4usize);
    let frames = rng.random_range(1..=12u32);
    let dims = rng.random_range(1..=2usize);
    let features = rng.random_range(1..=2usize);
    let mut pos: Vec<Vec<f64>> = (0..targets)
        .map(|_| (0..dims).map(|_| rng.random_range(-100.0..100.0)).collect())
        .collect();
    let colors: Vec<Vec<f64>> = (0..targets)
        .map(|_| (0..features).map(|_| rng.random_range(0.0..180.0)).collect())
        .collect();
    let mut out = Vec::new();
    for frame in 0..frames {
        for t in 0..targets {
            for x in pos[t].iter_mut() {
                *x += rng.random_range(-15.0..15.0);
            }
            if rng.random::<f64>() < 0.15 {
                continue;
            }
            let mut f = Vec::with_capacity(features);
            let mut c = Vec::with_capacity(features);
            for color in &colors[t] {
                if rng.random::<f64>() < 0.3 {
                    f.push(0.0);
                    c.push(0.0);
                } else {
                    f.push(color + rng.random_range(-20.0..20.0));
                    c.push(rng.random_range(0.05..1.0));
                }
            }
            out.push(Detection::new(frame, pos[t].clone(), f, c).expect("valid detection"));
        }
    }
    out
}

/// A small-instance tracker setting that varies with `seed`.
pub fn config(seed: u64) -> DriverConfig {
    let mut rng = substream(seed, 8);
    let mut cfg = DriverConfig::toy();
    cfg.graph.tau_max = rng.random_range(1..=3);
    cfg.graph.predict_motion = rng.random();
    cfg.appearance.lambda = vec![rng.random_range(1.0..300.0)];
    cfg.validation.kappa = rng.random_range(1.0..5.0);
    cfg.max_iter = rng.random_range(1..=8);
    cfg.schedule = if rng.random() {
        SchedulePolicy::Random
    } else {
        SchedulePolicy::LongestFirst
    };
    cfg.mode = if rng.random_bool(0.3) {
        ValidationMode::Always
    } else {
        ValidationMode::Conservative
    };
    cfg.seed = seed;
    cfg
}

/// Runs offline and incremental tracking on `dets` and checks acyclicity
/// after every graph mutation, detection conservation, partition validity and
/// determinism.
pub fn check_run(dets: &[Detection], cfg: &DriverConfig) -> Result<(), String> {
    let mut mutations = 0usize;
    let first = run_offline_observed(dets, cfg, |g| {
        mutations += 1;
        g.topological_order().map(|_| ())
    })
    .map_err(|e| format!("offline run: {e}"))?;
    let covered: usize = first.tracks.iter().map(|t| t.len()).sum();
    if covered != dets.len() {
        return Err(format!("{covered} detections tracked out of {}", dets.len()));
    }
    check_partition(&first.tracks, dets).map_err(|e| e.to_string())?;
    let again = run_offline_observed(dets, cfg, |_| Ok(())).map_err(|e| e.to_string())?;
    if again.tracks != first.tracks || again.scans != first.scans {
        return Err("offline run is not deterministic".into());
    }
    if mutations == 0 {
        return Err("observer never called".into());
    }

    let mut by_frame: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_frame.entry(d.frame).or_default().push(d.clone());
    }
    let mut inc = IncrementalTracker::new(cfg.clone()).map_err(|e| e.to_string())?;
    for (frame, frame_dets) in by_frame {
        inc.push_frame(frame, frame_dets).map_err(|e| format!("frame {frame}: {e}"))?;
        inc.graph().topological_order().map_err(|e| e.to_string())?;
    }
    inc.finish().map_err(|e| e.to_string())?;
    inc.graph().topological_order().map_err(|e| e.to_string())?;
    check_partition(&inc.tracks(), dets).map_err(|e| format!("incremental: {e}"))?;
    Ok(())
}
