//! Detections, feature semantics and the three-target toy benchmark.
//!
//! A detection carries its frame index, a 1-D or 2-D position and `N` scalar
//! appearance features, each paired with a confidence in `[0, 1]`. A
//! confidence of zero marks the feature as missing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track::{Track, TrackPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub position: Vec<f64>,
    pub features: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl Detection {
    /// Builds a detection, checking feature/confidence arity and ranges.
    pub fn new(
        frame: u32,
        position: Vec<f64>,
        features: Vec<f64>,
        confidences: Vec<f64>,
    ) -> Result<Self> {
        let det = Detection {
            frame,
            position,
            features,
            confidences,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        if self.position.is_empty() || self.position.len() > 2 {
            return Err(Error::Detection(format!(
                "position must be 1-D or 2-D, got {} components",
                self.position.len()
            )));
        }
        if self.features.len() != self.confidences.len() {
            return Err(Error::Detection(format!(
                "{} features but {} confidences",
                self.features.len(),
                self.confidences.len()
            )));
        }
        if let Some(c) = self
            .confidences
            .iter()
            .find(|c| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::Detection(format!("confidence {c} outside [0, 1]")));
        }
        if self
            .position
            .iter()
            .chain(&self.features)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Detection("non-finite position or feature".into()));
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    /// Same detection with every confidence replaced by one, i.e. a tracker
    /// that has no knowledge of measurement reliability.
    pub fn confidence_blind(&self) -> Self {
        Detection {
            confidences: vec![1.0; self.confidences.len()],
            ..self.clone()
        }
    }
}

/// Checks that every detection in a run shares the same feature count and
/// position dimensionality.
pub fn check_consistent(detections: &[Detection]) -> Result<()> {
    let Some(first) = detections.first() else {
        return Ok(());
    };
    for d in detections {
        d.validate()?;
        if d.feature_count() != first.feature_count() || d.position.len() != first.position.len()
        {
            return Err(Error::Detection(format!(
                "detection at frame {} has shape ({}-D, {} features), expected ({}-D, {} features)",
                d.frame,
                d.position.len(),
                d.feature_count(),
                first.position.len(),
                first.feature_count()
            )));
        }
    }
    Ok(())
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance between two scalar feature values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMetric {
    /// Absolute difference.
    L1,
    /// Features are angles in degrees; see [`toy_appearance_dissimilarity`].
    Angular,
}

impl FeatureMetric {
    pub fn distance(self, a: f64, b: f64) -> f64 {
        match self {
            FeatureMetric::L1 => (a - b).abs(),
            FeatureMetric::Angular => toy_appearance_dissimilarity(a, b),
        }
    }
}

/// `1 - |cos(pi (f_j - f_i) / 180)|`, in `[0, 1]`.
pub fn toy_appearance_dissimilarity(f_i: f64, f_j: f64) -> f64 {
    (1.0 - (PI * (f_j - f_i) / 180.0).cos().abs()).clamp(0.0, 1.0)
}

/// Deterministic generator for one named stream of a seeded run.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Probability of moving from the reliable to the unreliable state.
    pub p: f64,
    /// Probability of returning to the reliable state.
    pub q: f64,
    pub means: [f64; 3],
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub conf_reliable: f64,
    pub conf_unreliable: f64,
    pub horizon: u32,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            p: 0.5,
            q: 0.5,
            means: [0.0, 120.0, 240.0],
            sigma_low: 10.0,
            sigma_high: 100.0,
            conf_reliable: 0.8,
            conf_unreliable: 0.1,
            horizon: 11,
            seed: 0,
        }
    }
}

impl ToyConfig {
    pub fn with_p(p: f64, seed: u64) -> Self {
        ToyConfig {
            p,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p) {
            return Err(Error::Config(format!("p must lie in [0, 1), got {}", self.p)));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1], got {}", self.q)));
        }
        if !(self.sigma_low >= 0.0 && self.sigma_high >= 0.0) {
            return Err(Error::Config("noise deviations must be nonnegative".into()));
        }
        for c in [self.conf_reliable, self.conf_unreliable] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!("confidence {c} outside [0, 1]")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least one frame".into()));
        }
        Ok(())
    }

    /// Ground-truth positions of the three targets at frame `k`.
    pub fn positions(k: u32) -> [f64; 3] {
        let k = k as f64;
        [
            50.0 * (2.0 * PI * k / 10.0).sin(),
            50.0 * (2.0 * PI * k / 10.0).cos(),
            -20.0 - 50.0 * (2.0 * PI * k / 8.0).sin(),
        ]
    }
}

/// Appearance state of one toy target at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyState {
    Reliable,
    Unreliable,
}

/// Output of [`generate_toy`]; `labels[i]` is the target of `detections[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDetections {
    pub detections: Vec<Detection>,
    pub labels: Vec<usize>,
    pub ground_truth: Vec<Track>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyInstance {
    pub data: LabeledDetections,
    /// `states[target][frame]`
    pub states: Vec<Vec<ToyState>>,
}

pub fn generate_toy(cfg: &ToyConfig) -> ToyInstance {
    let low = Normal::new(0.0, cfg.sigma_low).expect("validated deviation");
    let high = Normal::new(0.0, cfg.sigma_high).expect("validated deviation");

    let mut states = Vec::with_capacity(3);
    let mut features = Vec::with_capacity(3);
    for (target, &mu) in cfg.means.iter().enumerate() {
        let mut rng = substream(cfg.seed, target as u64);
        let mut state = ToyState::Reliable;
        let mut trace = Vec::with_capacity(cfg.horizon as usize);
        let mut values = Vec::with_capacity(cfg.horizon as usize);
        for k in 0..cfg.horizon {
            if k > 0 {
                let u: f64 = rng.random();
                state = match state {
                    ToyState::Reliable if u < cfg.p => ToyState::Unreliable,
                    ToyState::Unreliable if u < cfg.q => ToyState::Reliable,
                    s => s,
                };
            }
            let noise = match state {
                ToyState::Reliable => low.sample(&mut rng),
                ToyState::Unreliable => high.sample(&mut rng),
            };
            trace.push(state);
            values.push(mu + noise);
        }
        states.push(trace);
        features.push(values);
    }

    let mut detections = Vec::with_capacity(3 * cfg.horizon as usize);
    let mut labels = Vec::with_capacity(detections.capacity());
    let mut ground_truth: Vec<Track> = (0..3)
        .map(|id| Track {
            id: id as u64,
            points: Vec::new(),
        })
        .collect();
    for k in 0..cfg.horizon {
        let positions = ToyConfig::positions(k);
        for target in 0..3 {
            let conf = match states[target][k as usize] {
                ToyState::Reliable => cfg.conf_reliable,
                ToyState::Unreliable => cfg.conf_unreliable,
            };
            detections.push(Detection {
                frame: k,
                position: vec![positions[target]],
                features: vec![features[target][k as usize]],
                confidences: vec![conf],
            });
            labels.push(target);
            ground_truth[target].points.push(TrackPoint {
                frame: k,
                position: vec![positions[target]],
            });
        }
    }

    ToyInstance {
        data: LabeledDetections {
            detections,
            labels,
            ground_truth,
        },
        states,
    }
}
