//! One pass/fail line per acceptance criterion. Run with
//! `cargo test -p iht-core --test acceptance` (the lines are written straight
//! to stdout, so they show without `--nocapture`).

mod common;

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use iht::baseline::{brute_force_partition, ksp_track, partition_cost, BaselineCosts, CostModel};
use iht::bench::{
    crossing_config, crossing_instance, least_conservative, most_conservative, pool, scene_trial, toy_baseline_costs,
    toy_sweep, ToyRow, Variant,
};
use iht::detection::{substream, Detection, FeatureMetric};
use iht::driver::{run_offline, DriverConfig, SchedulePolicy};
use iht::eval::evaluate;
use iht::scene::SceneConfig;
use iht::track::{Track, TrackPoint};
use rand::Rng;

const PS: [f64; 7] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const REPS: u64 = 100;

struct Board {
    failed: Vec<u32>,
}

impl Board {
    fn line(&self, text: &str) {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{text}");
        let _ = out.flush();
    }

    fn record(&mut self, n: u32, pass: bool, what: &str, detail: &str) {
        if !pass {
            self.failed.push(n);
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.line(&format!("criterion {n:>2}: {verdict}  {what}  [{detail}]"));
    }
}

fn mota(rows: &[ToyRow], p: f64, v: Variant) -> &[f64] {
    &rows.iter().find(|r| r.p == p && r.variant == v).expect("row present").mota
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of the per-seed differences `a - b`.
fn paired_gap(a: &[f64], b: &[f64]) -> f64 {
    mean(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

fn toy_criteria(board: &mut Board) {
    let lf = DriverConfig::toy();
    let rnd = DriverConfig {
        schedule: SchedulePolicy::Random,
        ..lf.clone()
    };
    let start = Instant::now();
    let main = toy_sweep(&PS, &[Variant::IhtAware, Variant::IhtBlind, Variant::KspAware], REPS, &lf, 1).unwrap();
    let c1_time = start.elapsed().as_secs_f64();
    let extra = toy_sweep(&PS, &[Variant::AlwaysValidate, Variant::Incremental], REPS, &lf, 1).unwrap();
    let random = toy_sweep(&PS, &[Variant::IhtAware, Variant::AlwaysValidate], REPS, &rnd, 1).unwrap();

    board.line("   p    aware  blind  ksp    always  incr   | random: aware  always");
    for p in PS {
        board.line(&format!(
            "  {p:.1}  {:.3}  {:.3}  {:.3}  {:.3}   {:.3}  |         {:.3}  {:.3}",
            mean(mota(&main, p, Variant::IhtAware)),
            mean(mota(&main, p, Variant::IhtBlind)),
            mean(mota(&main, p, Variant::KspAware)),
            mean(mota(&extra, p, Variant::AlwaysValidate)),
            mean(mota(&extra, p, Variant::Incremental)),
            mean(mota(&random, p, Variant::IhtAware)),
            mean(mota(&random, p, Variant::AlwaysValidate)),
        ));
    }

    let mut min_blind = f64::INFINITY;
    let mut min_ksp = f64::INFINITY;
    for p in PS {
        let aware = mota(&main, p, Variant::IhtAware);
        min_blind = min_blind.min(paired_gap(aware, mota(&main, p, Variant::IhtBlind)));
        min_ksp = min_ksp.min(paired_gap(aware, mota(&main, p, Variant::KspAware)));
    }
    board.record(
        1,
        min_blind > 0.0 && min_ksp > 0.0 && c1_time < 120.0,
        "toy: confidence-aware IHT beats confidence-blind IHT and KSP at every p",
        &format!(
            "smallest paired gap vs blind {:+.3}, vs KSP {:+.3}; {c1_time:.1}s",
            min_blind, min_ksp
        ),
    );

    let mut min_cons = f64::INFINITY;
    for p in PS {
        min_cons = min_cons.min(paired_gap(mota(&main, p, Variant::IhtAware), mota(&extra, p, Variant::AlwaysValidate)));
        min_cons = min_cons.min(paired_gap(mota(&random, p, Variant::IhtAware), mota(&random, p, Variant::AlwaysValidate)));
    }
    let mut max_always_vs_ksp = f64::NEG_INFINITY;
    for p in PS.iter().copied().filter(|&p| p >= 0.7) {
        max_always_vs_ksp =
            max_always_vs_ksp.max(paired_gap(mota(&extra, p, Variant::AlwaysValidate), mota(&main, p, Variant::KspAware)));
    }
    board.record(
        2,
        min_cons > 0.0 && max_always_vs_ksp < 0.0,
        "toy: conservative beats always-validate; always-validate falls below KSP for p >= 0.7",
        &format!(
            "smallest conservative gap {:+.3} (both schedules); largest always-minus-KSP at p >= 0.7 {:+.3}",
            min_cons, max_always_vs_ksp
        ),
    );

    let worst = PS
        .iter()
        .map(|&p| paired_gap(mota(&main, p, Variant::IhtAware), mota(&random, p, Variant::IhtAware)).abs())
        .fold(0.0, f64::max);
    board.record(
        3,
        worst <= 0.02,
        "toy: longest-first and random scheduling within 2 MOTA points",
        &format!("largest |difference| {:.2} points", 100.0 * worst),
    );

    let gaps: Vec<String> = PS
        .iter()
        .map(|&p| {
            format!(
                "{:.1}",
                100.0 * paired_gap(mota(&main, p, Variant::IhtAware), mota(&extra, p, Variant::Incremental))
            )
        })
        .collect();
    board.line(&format!(
        "  info: offline minus incremental MOTA on the toy, points per p: {}",
        gaps.join(" ")
    ));
}

/// Detection indices of each track, matched by frame and position.
fn index_partition(tracks: &[Track], dets: &[Detection]) -> Vec<Vec<usize>> {
    let key = |frame: u32, pos: &[f64]| (frame, pos.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    let index: HashMap<_, usize> = dets.iter().enumerate().map(|(i, d)| (key(d.frame, &d.position), i)).collect();
    let mut parts: Vec<Vec<usize>> = tracks
        .iter()
        .map(|t| t.points.iter().map(|p| index[&key(p.frame, &p.position)]).collect())
        .collect();
    parts.sort_by_key(|t| (dets[t[0]].frame, t[0]));
    parts
}

fn crossing_criterion(board: &mut Board) {
    let inst = crossing_instance();
    let cfg = crossing_config();
    let costs = toy_baseline_costs(&cfg);
    let iht = run_offline(&inst.detections, &cfg).unwrap().tracks;
    let iht_report = evaluate(&inst.ground_truth, &iht, 0.5).unwrap();
    let iht_parts = index_partition(&iht, &inst.detections);
    let pure = iht_parts.iter().all(|t| t.iter().all(|&i| inst.labels[i] == inst.labels[t[0]]));
    let ksp = ksp_track(&inst.detections, 2, &costs).unwrap();
    let ksp_report = evaluate(&inst.ground_truth, &ksp.tracks, 0.5).unwrap();
    let oracle = brute_force_partition(&inst.detections, 2, CostModel::AllPairs, &costs).unwrap();
    board.record(
        4,
        iht.len() == 2 && pure && iht_report.switches == 0 && ksp_report.switches >= 1 && oracle.tracks == iht_parts,
        "crossing instance: IHT gives 2 color-pure tracks, KSP switches, all-pairs oracle agrees with IHT",
        &format!(
            "IHT tracks {} pure {pure} SW {}; KSP SW {}; oracle match {}",
            iht.len(),
            iht_report.switches,
            ksp_report.switches,
            oracle.tracks == iht_parts
        ),
    );
}

/// Every target present in every frame, so KSP and the oracle both split all
/// detections into exactly `targets` full-length tracks.
fn oracle_instance(seed: u64) -> (Vec<Detection>, usize) {
    let mut rng = substream(seed, 11);
    let targets = rng.random_range(1..=3usize);
    let frames = rng.random_range(2..=5u32);
    let mut pos: Vec<f64> = (0..targets).map(|_| rng.random_range(-30.0..30.0)).collect();
    let colors: Vec<f64> = (0..targets).map(|_| rng.random_range(0.0..180.0)).collect();
    let mut dets = Vec::new();
    for frame in 0..frames {
        for t in 0..targets {
            pos[t] += rng.random_range(-10.0..10.0);
            let c = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.1..1.0) };
            let f = if c > 0.0 { colors[t] + rng.random_range(-30.0..30.0) } else { 0.0 };
            dets.push(Detection::new(frame, vec![pos[t]], vec![f], vec![c]).unwrap());
        }
    }
    (dets, targets)
}

fn oracle_criterion(board: &mut Board) {
    let costs = BaselineCosts {
        w_fix: 10.0,
        lambda: 20.0,
        metric: FeatureMetric::Angular,
    };
    let (mut bound_ok, mut coincide) = (true, 0);
    let n = 200;
    for seed in 0..n {
        let (dets, k) = oracle_instance(seed);
        let ksp = ksp_track(&dets, k, &costs).unwrap();
        let ksp_cost = partition_cost(&dets, &ksp.paths, CostModel::Consecutive, &costs);
        let best = brute_force_partition(&dets, k, CostModel::Consecutive, &costs).unwrap();
        bound_ok &= ksp.shortfall == 0 && ksp_cost >= best.cost - 1e-9;
        coincide += ((ksp_cost - best.cost).abs() <= 1e-9) as u32;
    }
    let rate = coincide as f64 / n as f64;
    board.record(
        5,
        bound_ok && rate >= 0.7,
        "200 random instances: KSP cost never below the brute-force optimum; coincidence rate >= 70%",
        &format!("bound holds {bound_ok}; coincidence {:.1}%", 100.0 * rate),
    );
}

fn relaxation_criterion(board: &mut Board) {
    let cfg = DriverConfig::scene();
    let run = |c: &DriverConfig| {
        let reports: Vec<_> = (0..12)
            .map(|seed| scene_trial(&SceneConfig { seed, ..SceneConfig::default() }, c, false).unwrap().report)
            .collect();
        pool(&reports)
    };
    let relax = run(&cfg);
    let loose = run(&least_conservative(&cfg));
    let tight = run(&most_conservative(&cfg));
    let msre = |r: &iht::eval::MotReport| r.misses + r.reinitializations;
    board.record(
        6,
        relax.switches <= loose.switches && msre(&relax) <= msre(&tight),
        "500x8 scenes, 12 seeds pooled: relaxation SW <= least-conservative SW, MS+RE <= most-conservative MS+RE",
        &format!(
            "SW relax {} vs least-conservative {}; MS+RE relax {} vs most-conservative {}",
            relax.switches,
            loose.switches,
            msre(&relax),
            msre(&tight)
        ),
    );
}

fn window_criterion(board: &mut Board) {
    let scene = SceneConfig {
        frames: 1000,
        targets: 10,
        ..SceneConfig::default()
    };
    let mut adaptive = DriverConfig::scene();
    adaptive.graph.tau_max = 5;
    adaptive.max_iter = 2;
    let mut fixed = adaptive.clone();
    fixed.validation.fixed_window = Some(500);
    let a = scene_trial(&scene, &adaptive, false).unwrap();
    let f = scene_trial(&scene, &fixed, false).unwrap();
    board.record(
        7,
        a.seconds <= f.seconds && a.report.mota >= f.report.mota - 0.01,
        "1000x10 scene: adaptive window (kappa 5) no slower than a fixed 500-frame window, MOTA within 1 point",
        &format!(
            "adaptive {:.2}s MOTA {:.4}; fixed {:.2}s MOTA {:.4}",
            a.seconds, a.report.mota, f.seconds, f.report.mota
        ),
    );
}

fn line(id: u64, frames: std::ops::Range<u32>, x: impl Fn(u32) -> f64) -> Track {
    Track {
        id,
        points: frames.map(|f| TrackPoint { frame: f, position: vec![x(f)] }).collect(),
    }
}

fn metric_criterion(board: &mut Board) {
    let gt = vec![line(0, 0..10, |f| f as f64), line(1, 0..10, |f| 100.0 - f as f64)];
    let same = evaluate(&gt, &gt, 10.0).unwrap();
    let perfect = same.mota == 1.0 && same.motp == 0.0 && same.errors() == 0;

    let single = vec![line(0, 0..10, |f| f as f64)];
    let empty = evaluate(&single, &[], 10.0).unwrap();
    let missed = empty.misses == 10 && empty.mota == 0.0;

    // Two targets cross between frames 2 and 3; the hypotheses swap there.
    let a = |f: u32| 10.0 * f as f64;
    let b = |f: u32| 50.0 - 10.0 * f as f64;
    let gt2 = vec![line(0, 0..6, a), line(1, 0..6, b)];
    let hyp = vec![
        line(7, 0..6, |f| if f < 3 { a(f) } else { b(f) }),
        line(8, 0..6, |f| if f < 3 { b(f) } else { a(f) }),
    ];
    let swapped = evaluate(&gt2, &hyp, 2.0).unwrap();
    board.record(
        8,
        perfect && missed && swapped.switches >= 1,
        "evaluation self-consistency and worked examples",
        &format!(
            "gt vs gt MOTA {} MOTP {}; empty hyp MS {} MOTA {}; crossing swap SW {}",
            same.mota, same.motp, empty.misses, empty.mota, swapped.switches
        ),
    );
}

fn invariant_criterion(board: &mut Board) {
    let mut failures = Vec::new();
    for seed in 0..1000 {
        if let Err(e) = common::check_run(&common::instance(seed), &common::config(seed)) {
            failures.push(format!("seed {seed}: {e}"));
        }
    }
    board.record(
        9,
        failures.is_empty(),
        "invariants over 1000 seeded instances (full proptest suite in tests/properties.rs)",
        &if failures.is_empty() {
            "acyclic after every mutation, conservation, partition, determinism".to_string()
        } else {
            failures[0].clone()
        },
    );
}

#[test]
fn acceptance() {
    let mut board = Board { failed: Vec::new() };
    toy_criteria(&mut board);
    crossing_criterion(&mut board);
    oracle_criterion(&mut board);
    relaxation_criterion(&mut board);
    window_criterion(&mut board);
    metric_criterion(&mut board);
    invariant_criterion(&mut board);
    board.line(
        "criterion 10: N/A   real-dataset scores are not reproducible here (datasets and detector outputs not available); \
         covered by criteria 1-9, and the CSV detection format accepts external dumps",
    );
    assert!(board.failed.is_empty(), "failed criteria: {:?}", board.failed);
}
