//! Monte Carlo experiment harness over the toy benchmark and synthetic scenes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{ksp_track, BaselineCosts};
use crate::config;
use crate::detection::{generate_toy, Detection, LabeledDetections, ToyConfig};
use crate::driver::{run_incremental, run_offline, DriverConfig, SchedulePolicy};
use crate::error::{Error, Result};
use crate::eval::{evaluate, MotReport, TOY_MATCH_RADIUS};
use crate::hypothesis::ValidationMode;
use crate::scene::{generate_scene, SceneConfig};
use crate::track::Track;

/// Tracker variants compared on the toy benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    IhtAware,
    IhtBlind,
    KspAware,
    KspBlind,
    AlwaysValidate,
    RandomSchedule,
    Incremental,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::IhtAware,
        Variant::IhtBlind,
        Variant::KspAware,
        Variant::KspBlind,
        Variant::AlwaysValidate,
        Variant::RandomSchedule,
        Variant::Incremental,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::IhtAware => "iht-aware",
            Variant::IhtBlind => "iht-blind",
            Variant::KspAware => "ksp-aware",
            Variant::KspBlind => "ksp-blind",
            Variant::AlwaysValidate => "always-validate",
            Variant::RandomSchedule => "random-schedule",
            Variant::Incremental => "incremental",
        }
    }

    fn blind(self) -> bool {
        matches!(self, Variant::IhtBlind | Variant::KspBlind)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

/// Costs of the baseline matching the tracker's toy appearance settings.
pub fn toy_baseline_costs(cfg: &DriverConfig) -> BaselineCosts {
    BaselineCosts {
        w_fix: cfg.appearance.w_fix(0),
        lambda: cfg.appearance.lambda(0),
        metric: cfg.appearance.metric,
    }
}

/// Tracks produced by `variant` on `detections`. `k` is the track count given
/// to the baseline.
pub fn run_variant(variant: Variant, detections: &[Detection], k: usize, cfg: &DriverConfig) -> Result<Vec<Track>> {
    let blind: Vec<Detection>;
    let dets = if variant.blind() {
        blind = detections.iter().map(Detection::confidence_blind).collect();
        &blind[..]
    } else {
        detections
    };
    let mut cfg = cfg.clone();
    match variant {
        Variant::KspAware | Variant::KspBlind => {
            return Ok(ksp_track(dets, k, &toy_baseline_costs(&cfg))?.tracks);
        }
        Variant::Incremental => return Ok(run_incremental(dets, &cfg)?.tracks),
        Variant::AlwaysValidate => cfg.mode = ValidationMode::Always,
        Variant::RandomSchedule => cfg.schedule = SchedulePolicy::Random,
        Variant::IhtAware | Variant::IhtBlind => {}
    }
    Ok(run_offline(dets, &cfg)?.tracks)
}

/// Scores `variant` on one toy realisation.
pub fn toy_trial(variant: Variant, toy: &ToyConfig, cfg: &DriverConfig) -> Result<MotReport> {
    let inst = generate_toy(toy);
    let mut cfg = cfg.clone();
    cfg.seed = toy.seed;
    let tracks = run_variant(variant, &inst.data.detections, 3, &cfg)?;
    evaluate(&inst.data.ground_truth, &tracks, TOY_MATCH_RADIUS)
}

/// Mean and sample standard deviation of each report component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub mota_mean: f64,
    pub mota_std: f64,
    pub motp_mean: f64,
    pub misses_mean: f64,
    pub false_positives_mean: f64,
    pub switches_mean: f64,
    pub switches_std: f64,
    pub reinitializations_mean: f64,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 {
        xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn summarize(reports: &[MotReport]) -> Summary {
    let (mota_mean, mota_std) = mean_std(reports.iter().map(|r| r.mota));
    let (switches_mean, switches_std) = mean_std(reports.iter().map(|r| r.switches as f64));
    Summary {
        runs: reports.len(),
        mota_mean,
        mota_std,
        motp_mean: mean_std(reports.iter().map(|r| r.motp)).0,
        misses_mean: mean_std(reports.iter().map(|r| r.misses as f64)).0,
        false_positives_mean: mean_std(reports.iter().map(|r| r.false_positives as f64)).0,
        switches_mean,
        switches_std,
        reinitializations_mean: mean_std(reports.iter().map(|r| r.reinitializations as f64)).0,
    }
}

/// Runs `trial(rep)` for every replication on at most `workers` threads and
/// returns the results in replication order.
pub fn replicate<T, F>(reps: u64, workers: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if workers <= 1 {
        return (0..reps).map(&trial).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..reps).into_par_iter().map(&trial).collect())
}

/// One row of a toy sweep: `variant` at transition probability `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub p: f64,
    pub variant: Variant,
    pub summary: Summary,
    /// Per-seed MOTA, seeds `0..reps`, for paired comparisons.
    pub mota: Vec<f64>,
}

/// Every variant at every `p` on seeds `0..reps`.
pub fn toy_sweep(
    ps: &[f64],
    variants: &[Variant],
    reps: u64,
    cfg: &DriverConfig,
    workers: usize,
) -> Result<Vec<ToyRow>> {
    let mut rows = Vec::new();
    for &p in ps {
        for &variant in variants {
            let reports = replicate(reps, workers, |seed| {
                toy_trial(variant, &ToyConfig::with_p(p, seed), cfg)
            })?;
            rows.push(ToyRow {
                p,
                variant,
                summary: summarize(&reports),
                mota: reports.iter().map(|r| r.mota).collect(),
            });
        }
    }
    Ok(rows)
}

/// One copy of `base` per value of `key`, labelled by the value.
pub fn sweep_configs(base: &DriverConfig, key: &str, values: &[String]) -> Result<Vec<(String, DriverConfig)>> {
    values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            config::set(&mut cfg, key, v)?;
            cfg.validate()?;
            Ok((v.clone(), cfg))
        })
        .collect()
}

/// Data a sweep runs on; replication `r` uses seed `r`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Toy(ToyConfig),
    Scene(SceneConfig),
}

/// One sweep row: `variant` at `param = value`, summarised over the
/// replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub variant: Variant,
    pub runs: usize,
    pub mota_mean: f64,
    pub mota_std: f64,
    pub motp_mean: f64,
    pub misses_mean: f64,
    pub false_positives_mean: f64,
    pub switches_mean: f64,
    pub switches_std: f64,
    pub reinitializations_mean: f64,
}

impl SweepRow {
    fn new(param: &str, value: &str, variant: Variant, s: Summary) -> Self {
        SweepRow {
            param: param.to_string(),
            value: value.to_string(),
            variant,
            runs: s.runs,
            mota_mean: s.mota_mean,
            mota_std: s.mota_std,
            motp_mean: s.motp_mean,
            misses_mean: s.misses_mean,
            false_positives_mean: s.false_positives_mean,
            switches_mean: s.switches_mean,
            switches_std: s.switches_std,
            reinitializations_mean: s.reinitializations_mean,
        }
    }
}

/// Scores `variant` on replication `seed` of `dataset`.
pub fn dataset_trial(variant: Variant, dataset: &Dataset, seed: u64, cfg: &DriverConfig) -> Result<MotReport> {
    match dataset {
        Dataset::Toy(toy) => toy_trial(variant, &ToyConfig { seed, ..toy.clone() }, cfg),
        Dataset::Scene(scene) => {
            let scene = SceneConfig { seed, ..scene.clone() };
            let data = generate_scene(&scene)?;
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            let tracks = run_variant(variant, &data.detections, scene.targets, &cfg)?;
            evaluate(&data.ground_truth, &tracks, SCENE_MATCH_RADIUS)
        }
    }
}

/// Runs every variant for every value of `param` on seeds `0..reps`.
///
/// `param` is a tracker key from [`config::KEYS`] or `p`, the toy transition
/// probability.
pub fn sweep(
    dataset: &Dataset,
    base: &DriverConfig,
    param: &str,
    values: &[String],
    variants: &[Variant],
    reps: u64,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if reps == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    let points: Vec<(String, Dataset, DriverConfig)> = if param == "p" {
        let Dataset::Toy(toy) = dataset else {
            return Err(Error::Config("p can only be swept on the toy dataset".into()));
        };
        values
            .iter()
            .map(|v| {
                let p = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad value '{v}' for p")))?;
                let toy = ToyConfig { p, ..toy.clone() };
                toy.validate()?;
                Ok((v.clone(), Dataset::Toy(toy), base.clone()))
            })
            .collect::<Result<_>>()?
    } else {
        sweep_configs(base, param, values)?
            .into_iter()
            .map(|(v, cfg)| (v, dataset.clone(), cfg))
            .collect()
    };
    let mut rows = Vec::new();
    for (value, data, cfg) in &points {
        for &variant in variants {
            let reports = replicate(reps, workers, |seed| dataset_trial(variant, data, seed, cfg))?;
            rows.push(SweepRow::new(param, value, variant, summarize(&reports)));
        }
    }
    Ok(rows)
}

/// Match radius for the synthetic scenes, in world units.
pub const SCENE_MATCH_RADIUS: f64 = 50.0;

/// `cfg` with the relaxation frozen at its initial thresholds.
pub fn most_conservative(cfg: &DriverConfig) -> DriverConfig {
    let (k1, k2) = cfg.relax.initial();
    DriverConfig {
        relax: crate::driver::RelaxSchedule::constant(k1, k2),
        ..cfg.clone()
    }
}

/// `cfg` with the relaxation frozen at its final thresholds.
pub fn least_conservative(cfg: &DriverConfig) -> DriverConfig {
    let (k1, k2) = cfg.relax.relaxed();
    DriverConfig {
        relax: crate::driver::RelaxSchedule::constant(k1, k2),
        ..cfg.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRun {
    pub report: MotReport,
    /// Tracking time, excluding scene generation and scoring.
    pub seconds: f64,
}

/// Generates `scene` and tracks it offline (or incrementally).
pub fn scene_trial(scene: &SceneConfig, cfg: &DriverConfig, incremental: bool) -> Result<SceneRun> {
    let data = generate_scene(scene)?;
    let start = Instant::now();
    let out = if incremental {
        run_incremental(&data.detections, cfg)?
    } else {
        run_offline(&data.detections, cfg)?
    };
    let seconds = start.elapsed().as_secs_f64();
    let report = evaluate(&data.ground_truth, &out.tracks, SCENE_MATCH_RADIUS)?;
    Ok(SceneRun { report, seconds })
}

/// Error counts summed over `reports`, with MOTA and MOTP recomputed on the
/// pooled counts.
pub fn pool(reports: &[MotReport]) -> MotReport {
    let mut total = MotReport {
        gt_count: 0,
        misses: 0,
        false_positives: 0,
        switches: 0,
        reinitializations: 0,
        mota: 1.0,
        motp: 0.0,
        matches: 0,
    };
    let mut distance = 0.0;
    for r in reports {
        total.gt_count += r.gt_count;
        total.misses += r.misses;
        total.false_positives += r.false_positives;
        total.switches += r.switches;
        total.reinitializations += r.reinitializations;
        total.matches += r.matches;
        distance += r.motp * r.matches as f64;
    }
    if total.matches > 0 {
        total.motp = distance / total.matches as f64;
    }
    total.mota = if total.gt_count > 0 {
        1.0 - total.errors() as f64 / total.gt_count as f64
    } else if total.errors() == 0 {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    total
}

/// Two targets over five frames whose paths cross in the middle. Their color
/// feature is observed at the first and last frame only. Target 0 is colored 0
/// and target 1 is colored 100.
pub fn crossing_instance() -> LabeledDetections {
    let xs = [[0.0, 2.0, 4.0, 6.0, 8.0], [8.0, 6.0, 4.2, 2.0, 0.0]];
    let colors = [0.0, 100.0];
    let mut detections = Vec::new();
    let mut labels = Vec::new();
    for frame in 0..5u32 {
        for target in 0..2 {
            let seen = frame == 0 || frame == 4;
            detections.push(Detection {
                frame,
                position: vec![xs[target][frame as usize]],
                features: vec![if seen { colors[target] } else { 0.0 }],
                confidences: vec![if seen { 1.0 } else { 0.0 }],
            });
            labels.push(target);
        }
    }
    let ground_truth = (0..2)
        .map(|target| {
            Track::from_detections(
                target as u64,
                detections.iter().zip(&labels).filter(|(_, &l)| l == target).map(|(d, _)| d),
            )
        })
        .collect();
    LabeledDetections {
        detections,
        labels,
        ground_truth,
    }
}

/// Tracker setting for [`crossing_instance`].
pub fn crossing_config() -> DriverConfig {
    let mut cfg = DriverConfig::toy();
    cfg.appearance.metric = crate::detection::FeatureMetric::L1;
    cfg.appearance.lambda = vec![1.0];
    cfg.appearance.w_fix = vec![5.0];
    cfg.validation.kappa = 5.0;
    cfg
}
