//! `iht`: generate data, track, evaluate and sweep from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or format error, 3 internal
//! invariant violation.

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod manifest;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iht::baseline::ksp_track;
use iht::bench::{self, Dataset, Variant};
use iht::config::{self, ConfigFile, Preset};
use iht::detection::{generate_toy, ToyConfig};
use iht::driver::{run_incremental, run_offline, DriverConfig};
use iht::eval::evaluate_with_events;
use iht::scene::{generate_scene, SceneConfig};
use iht::{formats, Error};
use serde_json::json;

use manifest::RunManifest;

/// Environment variables `IHT_<KEY>` override tracker parameters.
const ENV_PREFIX: &str = "IHT_";

#[derive(Parser)]
#[command(name = "iht", version, about = "Multi-object tracking by iterative hypothesis testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three targets with Markov-switching appearance reliability.
    GenerateToy(GenerateToyArgs),
    /// 2-D crowd scene with occlusion-driven feature dropouts.
    GenerateScene(GenerateSceneArgs),
    /// Track a detection file.
    Track(TrackArgs),
    /// Score trajectories against ground truth (CLEAR MOT).
    Evaluate(EvaluateArgs),
    /// Track and evaluate over a parameter sweep and replications.
    Sweep(SweepArgs),
    /// Print the resolved tracker configuration as TOML.
    Config(ConfigArgs),
    /// Re-run a command from its manifest and check its outputs are unchanged.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TrackerConfigArgs {
    /// TOML file of tracker parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one tracker parameter; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenerateToyArgs {
    /// Probability of leaving the reliable appearance state.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 11)]
    frames: u32,
    /// Detection CSV; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Ground-truth CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateSceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    frames: u32,
    #[arg(long, default_value_t = 8)]
    targets: usize,
    /// Probability that an unoccluded detection loses its features.
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    #[arg(long, default_value_t = 60.0)]
    occlusion_radius: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Iht,
    Ksp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Offline,
    Incremental,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    input: PathBuf,
    /// Trajectory CSV; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Algo::Iht)]
    algo: Algo,
    #[arg(long, value_enum, default_value_t = Mode::Offline)]
    mode: Mode,
    /// Number of tracks extracted by the KSP baseline.
    #[arg(long)]
    k: Option<usize>,
    /// Seed of the random scheduling policy.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    tracker: TrackerConfigArgs,
    /// Also write the final tracklet graph to PREFIX.nodes.csv and
    /// PREFIX.edges.csv (IHT only).
    #[arg(long, value_name = "PREFIX")]
    graph: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Ground-truth CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Trajectory CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    /// Report CSV; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-frame event log CSV.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Toy,
    Scene,
}

#[derive(Args)]
struct SweepArgs {
    /// Parameter and values, e.g. `kappa=1,3,5,7`; `p` is the toy transition
    /// probability.
    #[arg(long, value_name = "PARAM=V1,V2,...")]
    sweep: String,
    #[arg(long, value_enum, default_value_t = DatasetKind::Toy)]
    dataset: DatasetKind,
    /// Comma-separated variants: iht-aware, iht-blind, ksp-aware, ksp-blind,
    /// always-validate, random-schedule, incremental.
    #[arg(long, default_value = "iht-aware,iht-blind,ksp-aware,ksp-blind")]
    variants: String,
    /// Replications per value; replication r uses seed r.
    #[arg(long, default_value_t = 100)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Frames per sequence (defaults: toy 11, scene 500).
    #[arg(long)]
    frames: Option<u32>,
    /// Targets per scene.
    #[arg(long)]
    targets: Option<usize>,
    #[command(flatten)]
    tracker: TrackerConfigArgs,
    /// Result CSV; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[command(flatten)]
    tracker: TrackerConfigArgs,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

/// Bad flags or flag values.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::TooLarge { .. } => 1,
                Error::UnknownNode(_) | Error::InvalidPath(_) | Error::Invariant(_) => 3,
                Error::Detection(_) | Error::StaleFrame { .. } | Error::Format { .. } | Error::Csv(_) | Error::Io(_) => 2,
            };
        }
        if cause.is::<io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    3
}

/// Per-invocation state: the raw arguments, and the configuration to use
/// verbatim when replaying.
struct Ctx {
    args: Vec<String>,
    snapshot: Option<DriverConfig>,
}

/// Manifest contents gathered by a command.
struct Record {
    command: &'static str,
    config: Option<DriverConfig>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    summary: serde_json::Value,
}

impl Ctx {
    fn tracker_config(&self, args: &TrackerConfigArgs, default: Preset) -> Result<DriverConfig> {
        if let Some(cfg) = &self.snapshot {
            return Ok(cfg.clone());
        }
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ConfigFile::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let mut sets = Vec::with_capacity(args.set.len());
        for kv in &args.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            sets.push((key.trim(), value));
        }
        // The preset is the base everything else overrides, wherever it
        // was given: --set beats the environment, which beats the file.
        let env_preset = format!("{ENV_PREFIX}PRESET");
        let vars: Vec<(String, String)> = std::env::vars().collect();
        let mut cfg = file.preset.unwrap_or(default).config();
        let chosen = sets
            .iter()
            .rev()
            .find(|(k, _)| *k == "preset")
            .map(|(_, v)| v.to_string())
            .or_else(|| vars.iter().find(|(k, _)| *k == env_preset).map(|(_, v)| v.clone()));
        if let Some(preset) = chosen {
            config::set(&mut cfg, "preset", &preset)?;
        }
        file.apply(&mut cfg);
        config::apply_env(&mut cfg, ENV_PREFIX, vars.into_iter().filter(|(k, _)| *k != env_preset))?;
        for (key, value) in sets.into_iter().filter(|(k, _)| *k != "preset") {
            config::set(&mut cfg, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn finish(&self, manifest: Option<&Path>, output: Option<&Path>, start: Instant, rec: Record) -> Result<()> {
        let Some(path) = manifest::location(manifest, output) else {
            return Ok(());
        };
        RunManifest {
            command: rec.command.to_string(),
            args: self.args.clone(),
            config: rec.config.map(|c| ConfigFile::snapshot(&c).to_toml()),
            seed: rec.seed,
            inputs: rec.inputs,
            outputs: rec.outputs,
            seconds: start.elapsed().as_secs_f64(),
            summary: rec.summary,
        }
        .write(&path)
    }
}

fn create(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn present(paths: &[Option<&PathBuf>]) -> Vec<PathBuf> {
    paths.iter().flatten().map(|p| (*p).clone()).collect()
}

fn generate_toy_cmd(ctx: &Ctx, a: &GenerateToyArgs) -> Result<()> {
    let start = Instant::now();
    let toy = ToyConfig {
        p: a.p,
        seed: a.seed,
        horizon: a.frames,
        ..ToyConfig::default()
    };
    toy.validate().map_err(|e| usage(e.to_string()))?;
    let inst = generate_toy(&toy);
    formats::write_detections(create(a.output.as_deref())?, &inst.data.detections)?;
    if let Some(t) = &a.truth {
        formats::write_ground_truth(create(Some(t))?, &inst.data.ground_truth)?;
    }
    ctx.finish(
        a.manifest.as_deref(),
        a.output.as_deref(),
        start,
        Record {
            command: "generate-toy",
            config: None,
            seed: Some(a.seed),
            inputs: vec![],
            outputs: present(&[a.output.as_ref(), a.truth.as_ref()]),
            summary: json!({ "detections": inst.data.detections.len() }),
        },
    )
}

fn generate_scene_cmd(ctx: &Ctx, a: &GenerateSceneArgs) -> Result<()> {
    let start = Instant::now();
    let scene = SceneConfig {
        seed: a.seed,
        frames: a.frames,
        targets: a.targets,
        dropout: a.dropout,
        occlusion_radius: a.occlusion_radius,
        ..SceneConfig::default()
    };
    scene.validate().map_err(|e| usage(e.to_string()))?;
    let data = generate_scene(&scene)?;
    formats::write_detections(create(a.output.as_deref())?, &data.detections)?;
    if let Some(t) = &a.truth {
        formats::write_ground_truth(create(Some(t))?, &data.ground_truth)?;
    }
    ctx.finish(
        a.manifest.as_deref(),
        a.output.as_deref(),
        start,
        Record {
            command: "generate-scene",
            config: None,
            seed: Some(a.seed),
            inputs: vec![],
            outputs: present(&[a.output.as_ref(), a.truth.as_ref()]),
            summary: json!({ "detections": data.detections.len(), "scene": scene }),
        },
    )
}

fn graph_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".nodes.csv"), with(".edges.csv"))
}

fn track_cmd(ctx: &Ctx, a: &TrackArgs) -> Result<()> {
    let start = Instant::now();
    let detections = formats::read_detections(open(&a.input)?).with_context(|| format!("in {}", a.input.display()))?;
    let mut cfg = ctx.tracker_config(&a.tracker, Preset::Reference)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let mut outputs = present(&[a.output.as_ref()]);
    let (tracks, summary) = match a.algo {
        Algo::Ksp => {
            let k = a.k.ok_or_else(|| usage("--algo ksp needs --k"))?;
            if a.graph.is_some() {
                return Err(usage("--graph applies to the iht algorithm only"));
            }
            let out = ksp_track(&detections, k, &bench::toy_baseline_costs(&cfg))?;
            let summary = json!({ "cost": out.cost, "shortfall": out.shortfall });
            (out.tracks, summary)
        }
        Algo::Iht => {
            let out = match a.mode {
                Mode::Offline => run_offline(&detections, &cfg)?,
                Mode::Incremental => run_incremental(&detections, &cfg)?,
            };
            if let Some(prefix) = &a.graph {
                let (nodes, edges) = graph_paths(prefix);
                formats::write_graph_nodes(create(Some(&nodes))?, &out.graph)?;
                formats::write_graph_edges(create(Some(&edges))?, &out.graph)?;
                outputs.push(nodes);
                outputs.push(edges);
            }
            (out.tracks, json!({ "scans": out.scans }))
        }
    };
    iht::track::check_partition(&tracks, &detections).or_else(|e| match a.algo {
        // The baseline may leave detections unassigned.
        Algo::Ksp => Ok(()),
        Algo::Iht => Err(e),
    })?;
    formats::write_trajectories(create(a.output.as_deref())?, &tracks)?;
    let mut summary = summary;
    summary["detections"] = json!(detections.len());
    summary["tracks"] = json!(tracks.len());
    ctx.finish(
        a.manifest.as_deref(),
        a.output.as_deref(),
        start,
        Record {
            command: "track",
            seed: Some(cfg.seed),
            config: Some(cfg),
            inputs: vec![a.input.clone()],
            outputs,
            summary,
        },
    )
}

fn evaluate_cmd(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let start = Instant::now();
    let gt = formats::read_ground_truth(open(&a.truth)?).with_context(|| format!("in {}", a.truth.display()))?;
    let hyp = formats::read_trajectories(open(&a.input)?).with_context(|| format!("in {}", a.input.display()))?;
    if !(a.radius >= 0.0) {
        return Err(usage(format!("--radius must be nonnegative, got {}", a.radius)));
    }
    let (report, events) = evaluate_with_events(&gt, &hyp, a.radius)?;
    formats::write_report(create(a.output.as_deref())?, &report)?;
    if let Some(path) = &a.events {
        formats::write_events(create(Some(path))?, &events)?;
    }
    ctx.finish(
        a.manifest.as_deref(),
        a.output.as_deref(),
        start,
        Record {
            command: "evaluate",
            config: None,
            seed: None,
            inputs: vec![a.truth.clone(), a.input.clone()],
            outputs: present(&[a.output.as_ref(), a.events.as_ref()]),
            summary: serde_json::to_value(&report)?,
        },
    )
}

fn sweep_cmd(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let start = Instant::now();
    let (param, values) = a
        .sweep
        .split_once('=')
        .ok_or_else(|| usage(format!("--sweep expects PARAM=V1,V2,..., got '{}'", a.sweep)))?;
    let param = param.trim();
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.iter().any(String::is_empty) {
        return Err(usage("--sweep has an empty value"));
    }
    let variants = a
        .variants
        .split(',')
        .map(|v| v.trim().parse::<Variant>())
        .collect::<iht::Result<Vec<_>>>()?;
    if a.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let (dataset, preset) = match a.dataset {
        DatasetKind::Toy => {
            if a.targets.is_some() {
                return Err(usage("--targets applies to the scene dataset only"));
            }
            let toy = ToyConfig {
                horizon: a.frames.unwrap_or(11),
                ..ToyConfig::default()
            };
            (Dataset::Toy(toy), Preset::Toy)
        }
        DatasetKind::Scene => {
            let d = SceneConfig::default();
            let scene = SceneConfig {
                frames: a.frames.unwrap_or(d.frames),
                targets: a.targets.unwrap_or(d.targets),
                ..d
            };
            scene.validate().map_err(|e| usage(e.to_string()))?;
            (Dataset::Scene(scene), Preset::Scene)
        }
    };
    let cfg = ctx.tracker_config(&a.tracker, preset)?;
    let rows = bench::sweep(&dataset, &cfg, param, &values, &variants, a.reps, a.workers)?;
    formats::write_rows(create(a.output.as_deref())?, &rows)?;
    ctx.finish(
        a.manifest.as_deref(),
        a.output.as_deref(),
        start,
        Record {
            command: "sweep",
            config: Some(cfg),
            seed: None,
            inputs: vec![],
            outputs: present(&[a.output.as_ref()]),
            summary: json!({ "rows": rows.len(), "reps": a.reps }),
        },
    )
}

fn config_cmd(ctx: &Ctx, a: &ConfigArgs) -> Result<()> {
    let cfg = ctx.tracker_config(&a.tracker, Preset::Reference)?;
    let mut out = io::stdout().lock();
    out.write_all(ConfigFile::snapshot(&cfg).to_toml().as_bytes())?;
    Ok(())
}

fn replay_cmd(a: &ReplayArgs) -> Result<()> {
    let m = RunManifest::read(&a.manifest)?;
    let cli = Cli::try_parse_from(std::iter::once("iht".to_string()).chain(m.args.iter().cloned()))
        .map_err(|e| usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(usage("a replay manifest cannot replay itself"));
    }
    let snapshot = match &m.config {
        Some(text) => Some(ConfigFile::parse(text)?.resolve()?),
        None => None,
    };
    let before: Vec<Option<Vec<u8>>> = m.outputs.iter().map(|p| fs::read(p).ok()).collect();
    run(
        &Ctx {
            args: m.args.clone(),
            snapshot,
        },
        &cli.command,
    )?;
    let mut checked = 0;
    for (path, old) in m.outputs.iter().zip(before) {
        let Some(old) = old else { continue };
        let new = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        if new != old {
            return Err(Error::Invariant(format!("replayed output {} differs from the recorded run", path.display())).into());
        }
        checked += 1;
    }
    eprintln!("replayed {}: {checked} of {} outputs checked, all identical", m.command, m.outputs.len());
    Ok(())
}

fn run(ctx: &Ctx, command: &Command) -> Result<()> {
    match command {
        Command::GenerateToy(a) => generate_toy_cmd(ctx, a),
        Command::GenerateScene(a) => generate_scene_cmd(ctx, a),
        Command::Track(a) => track_cmd(ctx, a),
        Command::Evaluate(a) => evaluate_cmd(ctx, a),
        Command::Sweep(a) => sweep_cmd(ctx, a),
        Command::Config(a) => config_cmd(ctx, a),
        Command::Replay(a) => replay_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let ctx = Ctx {
        args: std::env::args().skip(1).collect(),
        snapshot: None,
    };
    match run(&ctx, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
