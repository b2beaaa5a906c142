//! Flat key-value tracker configuration.
//!
//! A configuration file is TOML with top-level keys only, for example
//!
//! ```toml
//! preset = "reference"
//! tau_max = 60
//! lambda = [1.0, 0.5]
//! k1_start = 5.0
//! schedule = "random"
//! ```
//!
//! `preset` picks the starting point (`reference`, `toy` or `scene`); every
//! other key overrides one parameter. The same keys are accepted one at a
//! time by [`set`], which is how environment overrides and parameter sweeps
//! are applied.

use serde::{Deserialize, Serialize};

use crate::detection::FeatureMetric;
use crate::driver::{DriverConfig, SchedulePolicy};
use crate::error::{Error, Result};
use crate::hypothesis::ValidationMode;

/// Every recognised key, in documentation order.
pub const KEYS: &[&str] = &[
    "preset",
    "tau_max",
    "gamma",
    "predict_motion",
    "lambda",
    "w_fix",
    "c_min",
    "c_max",
    "metric",
    "extremity",
    "kappa",
    "fixed_window",
    "k1_start",
    "k1_end",
    "k1_iters",
    "k2_start",
    "k2_end",
    "k2_iters",
    "mode",
    "max_iter",
    "schedule",
    "delta_slide",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Reference,
    Toy,
    Scene,
}

impl Preset {
    pub fn config(self) -> DriverConfig {
        match self {
            Preset::Reference => DriverConfig::reference(),
            Preset::Toy => DriverConfig::toy(),
            Preset::Scene => DriverConfig::scene(),
        }
    }
}

/// Parsed configuration file; absent keys keep the preset's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    pub tau_max: Option<u32>,
    pub gamma: Option<f64>,
    pub predict_motion: Option<bool>,
    pub lambda: Option<Vec<f64>>,
    pub w_fix: Option<Vec<f64>>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub metric: Option<FeatureMetric>,
    /// Detections per extremity; 0 disables per-extremity appearance.
    pub extremity: Option<usize>,
    pub kappa: Option<f64>,
    /// Window length in frames; 0 restores the adaptive window.
    pub fixed_window: Option<u32>,
    pub k1_start: Option<f64>,
    pub k1_end: Option<f64>,
    pub k1_iters: Option<u32>,
    pub k2_start: Option<f64>,
    pub k2_end: Option<f64>,
    pub k2_iters: Option<u32>,
    pub mode: Option<ValidationMode>,
    pub max_iter: Option<u32>,
    pub schedule: Option<SchedulePolicy>,
    pub delta_slide: Option<u32>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Applies every present key except `preset` to `cfg`.
    pub fn apply(&self, cfg: &mut DriverConfig) {
        macro_rules! put {
            ($field:ident => $target:expr) => {
                if let Some(v) = self.$field.clone() {
                    $target = v;
                }
            };
        }
        put!(tau_max => cfg.graph.tau_max);
        put!(gamma => cfg.graph.gamma);
        put!(predict_motion => cfg.graph.predict_motion);
        put!(lambda => cfg.appearance.lambda);
        put!(w_fix => cfg.appearance.w_fix);
        put!(c_min => cfg.appearance.c_min);
        put!(c_max => cfg.appearance.c_max);
        put!(metric => cfg.appearance.metric);
        if let Some(k) = self.extremity {
            cfg.appearance.extremity = (k > 0).then_some(k);
        }
        put!(kappa => cfg.validation.kappa);
        if let Some(w) = self.fixed_window {
            cfg.validation.fixed_window = (w > 0).then_some(w);
        }
        put!(k1_start => cfg.relax.k1.start);
        put!(k1_end => cfg.relax.k1.end);
        put!(k1_iters => cfg.relax.k1.iters);
        put!(k2_start => cfg.relax.k2.start);
        put!(k2_end => cfg.relax.k2.end);
        put!(k2_iters => cfg.relax.k2.iters);
        put!(mode => cfg.mode);
        put!(max_iter => cfg.max_iter);
        put!(schedule => cfg.schedule);
        put!(delta_slide => cfg.delta_slide);
        put!(seed => cfg.seed);
    }

    /// The preset's configuration with this file's overrides, validated.
    pub fn resolve(&self) -> Result<DriverConfig> {
        let mut cfg = self.preset.unwrap_or(Preset::Reference).config();
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key, with the values of `cfg`.
    pub fn snapshot(cfg: &DriverConfig) -> Self {
        ConfigFile {
            preset: None,
            tau_max: Some(cfg.graph.tau_max),
            gamma: Some(cfg.graph.gamma),
            predict_motion: Some(cfg.graph.predict_motion),
            lambda: Some(cfg.appearance.lambda.clone()),
            w_fix: Some(cfg.appearance.w_fix.clone()),
            c_min: Some(cfg.appearance.c_min),
            c_max: Some(cfg.appearance.c_max),
            metric: Some(cfg.appearance.metric),
            extremity: Some(cfg.appearance.extremity.unwrap_or(0)),
            kappa: Some(cfg.validation.kappa),
            fixed_window: Some(cfg.validation.fixed_window.unwrap_or(0)),
            k1_start: Some(cfg.relax.k1.start),
            k1_end: Some(cfg.relax.k1.end),
            k1_iters: Some(cfg.relax.k1.iters),
            k2_start: Some(cfg.relax.k2.start),
            k2_end: Some(cfg.relax.k2.end),
            k2_iters: Some(cfg.relax.k2.iters),
            mode: Some(cfg.mode),
            max_iter: Some(cfg.max_iter),
            schedule: Some(cfg.schedule),
            delta_slide: Some(cfg.delta_slide),
            seed: Some(cfg.seed),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// Parses one `key = value` override. Bare words are read as strings, and a
/// comma-separated list as an array, so `schedule=random` and `lambda=1,2`
/// work without TOML quoting.
pub fn parse_override(key: &str, value: &str) -> Result<ConfigFile> {
    if !KEYS.contains(&key) {
        return Err(Error::Config(format!("unknown parameter '{key}'")));
    }
    let value = value.trim();
    let attempt = |v: &str| toml::from_str::<ConfigFile>(&format!("{key} = {v}"));
    let parsed = attempt(value)
        .or_else(|_| attempt(&format!("[{value}]")))
        .or_else(|_| attempt(&format!("{value:?}")));
    parsed.map_err(|e| Error::Config(format!("bad value '{value}' for {key}: {}", e.message())))
}

/// Applies one override to `cfg`.
pub fn set(cfg: &mut DriverConfig, key: &str, value: &str) -> Result<()> {
    let file = parse_override(key, value)?;
    if let Some(p) = file.preset {
        *cfg = p.config();
    }
    file.apply(cfg);
    Ok(())
}

/// Applies `PREFIX<KEY>` environment variables (key upper-cased), in
/// [`KEYS`] order so a preset is applied before the overrides.
pub fn apply_env(cfg: &mut DriverConfig, prefix: &str, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let vars: Vec<(String, String)> = vars.into_iter().collect();
    for key in KEYS {
        let name = format!("{prefix}{}", key.to_uppercase());
        if let Some((_, v)) = vars.iter().find(|(k, _)| *k == name) {
            set(cfg, key, v)?;
        }
    }
    Ok(())
}
