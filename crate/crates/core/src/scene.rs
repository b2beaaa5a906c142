//! Synthetic 2-D crowd scenes with occlusion-driven appearance dropouts.
//!
//! Targets wander in a rectangular arena with smoothly varying velocity and
//! bounce off its walls. Each target carries one color per feature. A target
//! closer than `occlusion_radius` to another one is occluded: its detection is
//! missed with probability `occluded_miss`, and when detected its features are
//! unobserved (confidence 0). Unoccluded detections observe every feature with
//! a confidence drawn uniformly in `[conf_low, conf_high]` and noise that
//! shrinks as the confidence grows.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detection::{substream, Detection, LabeledDetections};
use crate::error::{Error, Result};
use crate::track::{Track, TrackPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub frames: u32,
    pub targets: usize,
    pub width: f64,
    pub height: f64,
    /// Mean speed in world units per frame.
    pub speed: f64,
    /// Standard deviation of the per-frame heading change, in radians.
    pub turn: f64,
    pub position_noise: f64,
    pub miss_rate: f64,
    pub occlusion_radius: f64,
    pub occluded_miss: f64,
    /// Number of appearance features per detection.
    pub features: usize,
    /// Spread of the per-target colors; targets get evenly spaced colors in
    /// `[0, color_range)`.
    pub color_range: f64,
    /// Feature noise at confidence 1; scaled by `1 / c` below that.
    pub feature_noise: f64,
    pub conf_low: f64,
    pub conf_high: f64,
    /// Probability that an unoccluded detection still loses its features.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            frames: 500,
            targets: 8,
            width: 2800.0,
            height: 1500.0,
            speed: 6.0,
            turn: 0.08,
            position_noise: 2.0,
            miss_rate: 0.03,
            occlusion_radius: 60.0,
            occluded_miss: 0.3,
            features: 1,
            color_range: 200.0,
            feature_noise: 4.0,
            conf_low: 0.3,
            conf_high: 1.0,
            dropout: 0.1,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.frames == 0 || self.targets == 0 || self.features == 0 {
            return bad("frames, targets and features must be positive".into());
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad(format!("arena {}x{} must have positive size", self.width, self.height));
        }
        for (name, v) in [
            ("speed", self.speed),
            ("turn", self.turn),
            ("position_noise", self.position_noise),
            ("occlusion_radius", self.occlusion_radius),
            ("color_range", self.color_range),
            ("feature_noise", self.feature_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        for (name, v) in [
            ("miss_rate", self.miss_rate),
            ("occluded_miss", self.occluded_miss),
            ("dropout", self.dropout),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0 < self.conf_low && self.conf_low <= self.conf_high && self.conf_high <= 1.0) {
            return bad(format!(
                "need 0 < conf_low <= conf_high <= 1, got {} and {}",
                self.conf_low, self.conf_high
            ));
        }
        Ok(())
    }
}

/// Reflects `x` into `[0, size]`, flipping `v` when a wall is hit.
fn bounce(x: &mut f64, v: &mut f64, size: f64) {
    if *x < 0.0 {
        *x = -*x;
        *v = -*v;
    }
    if *x > size {
        *x = 2.0 * size - *x;
        *v = -*v;
    }
    *x = x.clamp(0.0, size);
}

/// Ground-truth target positions, `positions[frame][target]`.
pub fn simulate_motion(cfg: &SceneConfig) -> Vec<Vec<[f64; 2]>> {
    let mut rng = substream(cfg.seed, 0);
    let turn = Normal::new(0.0, cfg.turn).expect("validated turn");
    let mut pos: Vec<[f64; 2]> = (0..cfg.targets)
        .map(|_| [rng.random::<f64>() * cfg.width, rng.random::<f64>() * cfg.height])
        .collect();
    let mut heading: Vec<f64> = (0..cfg.targets)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    let speed: Vec<f64> = (0..cfg.targets)
        .map(|_| cfg.speed * (0.5 + rng.random::<f64>()))
        .collect();
    let mut out = Vec::with_capacity(cfg.frames as usize);
    for frame in 0..cfg.frames {
        if frame > 0 {
            for t in 0..cfg.targets {
                heading[t] += turn.sample(&mut rng);
                let mut v = [speed[t] * heading[t].cos(), speed[t] * heading[t].sin()];
                pos[t][0] += v[0];
                pos[t][1] += v[1];
                bounce(&mut pos[t][0], &mut v[0], cfg.width);
                bounce(&mut pos[t][1], &mut v[1], cfg.height);
                heading[t] = v[1].atan2(v[0]);
            }
        }
        out.push(pos.clone());
    }
    out
}

/// Color of `target` for feature `i`.
pub fn target_color(cfg: &SceneConfig, target: usize, i: usize) -> f64 {
    // Successive features permute the palette so two targets rarely share
    // every color.
    let slot = (target * (2 * i + 1)) % cfg.targets;
    cfg.color_range * slot as f64 / cfg.targets as f64
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<LabeledDetections> {
    cfg.validate()?;
    let truth = simulate_motion(cfg);
    let mut rng = substream(cfg.seed, 1);
    let pos_noise = Normal::new(0.0, cfg.position_noise).expect("validated noise");
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut detections = Vec::new();
    let mut labels = Vec::new();
    let mut ground_truth: Vec<Track> = (0..cfg.targets)
        .map(|id| Track {
            id: id as u64,
            points: Vec::with_capacity(cfg.frames as usize),
        })
        .collect();
    let r2 = cfg.occlusion_radius * cfg.occlusion_radius;
    for (frame, pos) in truth.iter().enumerate() {
        let frame = frame as u32;
        for (t, p) in pos.iter().enumerate() {
            ground_truth[t].points.push(TrackPoint {
                frame,
                position: p.to_vec(),
            });
            let occluded = pos.iter().enumerate().any(|(o, q)| {
                let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                o != t && dx * dx + dy * dy < r2
            });
            let miss = if occluded { cfg.occluded_miss } else { cfg.miss_rate };
            if rng.random::<f64>() < miss {
                continue;
            }
            let position = vec![p[0] + pos_noise.sample(&mut rng), p[1] + pos_noise.sample(&mut rng)];
            let seen = !occluded && rng.random::<f64>() >= cfg.dropout;
            let mut features = Vec::with_capacity(cfg.features);
            let mut confidences = Vec::with_capacity(cfg.features);
            for i in 0..cfg.features {
                if seen {
                    let c = cfg.conf_low + (cfg.conf_high - cfg.conf_low) * rng.random::<f64>();
                    let f = target_color(cfg, t, i) + unit.sample(&mut rng) * cfg.feature_noise / c;
                    features.push(f);
                    confidences.push(c);
                } else {
                    features.push(0.0);
                    confidences.push(0.0);
                }
            }
            detections.push(Detection {
                frame,
                position,
                features,
                confidences,
            });
            labels.push(t);
        }
    }
    Ok(LabeledDetections {
        detections,
        labels,
        ground_truth,
    })
}
