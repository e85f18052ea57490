//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use multigrasp_core::eval::{
    ap_grid, combine_grippers_posthoc, grasp_outcomes, run_clearing_loop, ClearingMetrics, PlannedGrasps,
};
use multigrasp_core::export::{colorized_ply, ColorChannel};
use multigrasp_core::labels::build_label_maps;
use multigrasp_core::pipeline::{oracle_maps, scene_features};
use multigrasp_core::ply::{write_ply, PlyFormat};
use multigrasp_core::scene::{
    generate_ground_truth, generate_scene, load_scene, save_scene, PrimitiveKind, SceneOracle, NOVEL_KINDS, SEEN_KINDS,
};
use multigrasp_core::train::{build_training_scene, train, write_log_csv};
use multigrasp_core::{
    run_pipeline, EvalConfig, GraspHead, GraspnessMaps, Gripper, MapRole, MlpModel, PipelineConfig, Scene, SpatialIndex,
};

use crate::config::RunConfig;
use crate::files::*;
use crate::{Cli, Command, EvalArgs, ExportArgs, HeadArgs, LabelsArgs, PredictArgs, SynthArgs, TrainArgs};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// Anything that went wrong while doing the work; exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<multigrasp_core::Error> for Failure {
    fn from(e: multigrasp_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check<T>(r: multigrasp_core::Result<T>) -> Outcome<T> {
    r.map_err(|e| usage(e.to_string()))
}

pub fn run(cli: Cli) -> Outcome {
    let cfg = RunConfig::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Synth(a) => synth(&cfg, &a),
        Command::Labels(a) => labels(&cfg, &a),
        Command::Train(a) => train_cmd(&cfg, &a),
        Command::Predict(a) => predict(&cfg, &a),
        Command::Eval(a) => eval(&cfg, &a),
        Command::ExportPly(a) => export_ply(&cfg, &a),
    }
}

/// Seed of scene `i` in a batch generated from `base`.
pub fn scene_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(10_000).wrapping_add(i as u64)
}

fn parse_list<T>(text: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Outcome<Vec<T>> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(usage(format!("empty {what} list")));
    }
    items
        .into_iter()
        .map(|s| parse(s).ok_or_else(|| usage(format!("unknown {what} {s:?}"))))
        .collect()
}

fn parse_kinds(text: &str) -> Outcome<Vec<PrimitiveKind>> {
    parse_list(text, "primitive kind", |s| serde_json::from_value(serde_json::Value::String(s.into())).ok())
}

/// Requested grippers in canonical order, without duplicates.
fn parse_grippers(text: &str) -> Outcome<Vec<Gripper>> {
    let mut g = parse_list(text, "gripper", |s| match s {
        "parallel" => Some(Gripper::Parallel),
        "vacuum" => Some(Gripper::Vacuum),
        _ => None,
    })?;
    g.sort();
    g.dedup();
    Ok(g)
}

fn parse_hidden(text: &str) -> Outcome<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    parse_list(text, "hidden size", |s| s.parse().ok().filter(|&n: &usize| n > 0))
}

fn head_of(args: &HeadArgs) -> Outcome<(GraspHead, HeadKind)> {
    match (&args.checkpoint, args.fallback_head) {
        (Some(path), _) => {
            let model = MlpModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            Ok((GraspHead::Learned(Box::new(model)), HeadKind::Learned))
        }
        (None, true) => Ok((GraspHead::Fallback, HeadKind::Fallback)),
        (None, false) => Err(usage("either --checkpoint or --fallback-head is required")),
    }
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn load(stem: &Path) -> anyhow::Result<Scene> {
    let (scene, _) = load_scene(stem).with_context(|| format!("loading scene {}", stem.display()))?;
    Ok(scene)
}

fn synth(run: &RunConfig, a: &SynthArgs) -> Outcome {
    if a.objects == 0 {
        return Err(usage("--objects must be at least 1"));
    }
    if a.scenes == 0 {
        return Err(usage("--scenes must be at least 1"));
    }
    let mut cfg = run.synth.clone();
    if let Some(k) = &a.kinds {
        cfg.kinds = parse_kinds(k)?;
        cfg.kind_sequence.clear();
    }
    check(cfg.validate())?;
    check(run.ground_truth.validate())?;
    let base = a.seed.unwrap_or(run.seed);
    create_dir(&a.out)?;
    let lines = (0..a.scenes)
        .into_par_iter()
        .map(|i| -> anyhow::Result<String> {
            let seed = scene_seed(base, i);
            let (cloud, annotation) = generate_scene(seed, a.objects, &cfg)?;
            let ground_truth = generate_ground_truth(&annotation, &run.ground_truth)?;
            let scene = Scene { cloud, annotation, ground_truth };
            let name = format!("scene_{i:04}");
            save_scene(&a.out.join(&name), &scene, seed)?;
            let vacuum = scene.ground_truth.iter().filter(|g| g.gripper() == Gripper::Vacuum).count();
            Ok(format!(
                "{name} seed={seed} points={} objects={} gt_parallel={} gt_vacuum={vacuum}",
                scene.cloud.len(),
                scene.annotation.primitives.len(),
                scene.ground_truth.len() - vacuum,
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn labels(run: &RunConfig, a: &LabelsArgs) -> Outcome {
    let stems = scene_stems(&a.scenes)?;
    let out = a.out.clone().unwrap_or_else(|| a.scenes.clone());
    create_dir(&out)?;
    let lines = stems
        .par_iter()
        .map(|stem| -> anyhow::Result<String> {
            let scene = load(stem)?;
            let maps = if scene.ground_truth.is_empty() {
                GraspnessMaps::zeros(scene.cloud.len(), MapRole::Label)
            } else {
                build_label_maps(&scene.cloud, &scene.annotation, &scene.ground_truth, &run.pipeline.labels)?
            };
            let name = stem_name(stem);
            let count = |v: &[f64]| v.iter().filter(|&&x| x > 0.0).count();
            let line = format!(
                "{name} points={} objectness={} parallel={} vacuum={}",
                maps.len(),
                count(&maps.objectness),
                count(&maps.parallel),
                count(&maps.vacuum)
            );
            write_json(&labels_path(&out, &name), &LabelsFile { schema_version: LABELS_SCHEMA_VERSION, scene: name, maps })?;
            Ok(line)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for l in lines {
        println!("{l}");
    }
    Ok(())
}

fn train_cmd(run: &RunConfig, a: &TrainArgs) -> Outcome {
    let mut cfg = run.train.clone();
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.lr0 = v;
    }
    if let Some(v) = a.pcgrad {
        cfg.pcgrad_enabled = v;
    }
    if let Some(v) = a.seed {
        cfg.rng_seed = v;
    }
    if let Some(h) = &a.hidden {
        cfg.hidden = parse_hidden(h)?;
    }
    check(cfg.validate())?;
    let dataset = run.dataset();
    check(dataset.refine.validate())?;
    let stems = scene_stems(&a.scenes)?;
    let scenes = stems
        .par_iter()
        .map(|stem| -> anyhow::Result<_> { Ok(build_training_scene(&load(stem)?, &dataset)?) })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let out = train(&scenes, dataset.head_layout(), &cfg)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    out.model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let log_path = a.log.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    let file = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    write_log_csv(BufWriter::new(file), &out.log)?;
    if let Some(last) = out.log.last() {
        println!(
            "{} scenes, {} epochs, variant {}: final loss obj={:.4} vac={:.4} par={:.4} refiner={:.4}",
            scenes.len(),
            out.log.len(),
            last.variant,
            last.loss_obj,
            last.loss_vac,
            last.loss_par,
            last.loss_refiner
        );
    }
    Ok(())
}

fn pipeline_config(run: &RunConfig, top_k: Option<usize>) -> Outcome<PipelineConfig> {
    let mut p = run.pipeline.clone();
    if let Some(k) = top_k {
        p.top_k = k;
    }
    check(p.validate())?;
    Ok(p)
}

fn channel_of(g: Gripper) -> ColorChannel {
    match g {
        Gripper::Parallel => ColorChannel::Parallel,
        Gripper::Vacuum => ColorChannel::Vacuum,
    }
}

fn predict(run: &RunConfig, a: &PredictArgs) -> Outcome {
    let grippers = parse_grippers(&a.grippers)?;
    let (head, kind) = head_of(&a.head)?;
    let p = pipeline_config(run, a.top_k)?;
    let stems = scene_stems(&a.scenes)?;
    create_dir(&a.out)?;
    let lines = stems
        .par_iter()
        .map(|stem| -> anyhow::Result<Vec<String>> {
            let scene = load(stem)?;
            let name = stem_name(stem);
            let out = run_pipeline(&scene, &head, &grippers, &p)?;
            let mut lines = Vec::new();
            for r in &out.results {
                let status = if r.grasps.is_empty() { STATUS_EMPTY } else { STATUS_OK };
                lines.push(format!(
                    "{name} {}: {} seeds, {} grasps, {status}",
                    r.gripper,
                    r.seeds.len(),
                    r.grasps.len()
                ));
                let file = GraspsFile {
                    schema_version: GRASPS_SCHEMA_VERSION,
                    scene: name.clone(),
                    gripper: r.gripper,
                    head: kind,
                    status: status.into(),
                    seeds: r.seeds.len(),
                    dropped: r.dropped,
                    grasps: r.grasps.clone(),
                };
                write_json(&grasps_path(&a.out, &name, r.gripper), &file)?;
                let ply = colorized_ply(&scene.cloud, &out.maps, channel_of(r.gripper))?;
                let mut w = BufWriter::new(File::create(grasps_ply_path(&a.out, &name, r.gripper))?);
                write_ply(&mut w, &ply, PlyFormat::BinaryLittleEndian)?;
            }
            Ok(lines)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    for l in lines.into_iter().flatten() {
        println!("{l}");
    }
    Ok(())
}

/// "seen" when every object is of a training kind, "novel" when every
/// object is of a held-out kind, "similar" otherwise.
fn split_of(scene: &Scene) -> &'static str {
    let kinds: Vec<PrimitiveKind> = scene.annotation.primitives.iter().map(|p| p.kind()).collect();
    if kinds.iter().all(|k| SEEN_KINDS.contains(k)) {
        "seen"
    } else if kinds.iter().all(|k| NOVEL_KINDS.contains(k)) {
        "novel"
    } else {
        "similar"
    }
}

/// One row of the long-format metrics table; AP rows leave the clearing
/// columns empty and vice versa.
#[derive(Debug, Clone, Default, Serialize)]
struct MetricRow {
    record: &'static str,
    scene: String,
    split: &'static str,
    gripper: String,
    mu: Option<f64>,
    ap: Option<f64>,
    objects_total: Option<usize>,
    objects_cleared: Option<usize>,
    grasps_total: Option<usize>,
    grasps_successful: Option<usize>,
    grasps_on_cleared: Option<usize>,
    objects_detected: Option<usize>,
    r_object: Option<f64>,
    r_grasp: Option<f64>,
    r_mix: Option<f64>,
    r_seen: Option<f64>,
}

impl MetricRow {
    fn clearing(scene: &str, split: &'static str, gripper: &str, m: &ClearingMetrics) -> Self {
        let c = m.counts;
        Self {
            record: "clearing",
            scene: scene.into(),
            split,
            gripper: gripper.into(),
            objects_total: Some(c.objects_total),
            objects_cleared: Some(c.objects_cleared),
            grasps_total: Some(c.grasps_total),
            grasps_successful: Some(c.grasps_successful),
            grasps_on_cleared: Some(c.grasps_on_cleared),
            objects_detected: Some(c.objects_detected),
            r_object: Some(m.r_object),
            r_grasp: Some(m.r_grasp),
            r_mix: Some(m.r_mix),
            r_seen: Some(m.r_seen),
            ..Default::default()
        }
    }
}

struct SceneEval {
    name: String,
    split: &'static str,
    /// Per gripper, AP at each grid coefficient.
    ap: BTreeMap<Gripper, Vec<(f64, f64)>>,
    clearing: Vec<(String, ClearingMetrics)>,
}

#[derive(Debug, Serialize)]
struct GripperSummary {
    scenes: usize,
    ap_overall: f64,
    /// Mean AP over scenes at each grid coefficient.
    ap_mu: Vec<(f64, f64)>,
}

#[derive(Debug, Default, Serialize)]
struct SplitSummary {
    scenes: usize,
    grippers: BTreeMap<String, GripperSummary>,
    /// Pooled over the split's scenes.
    clearing: BTreeMap<String, ClearingMetrics>,
}

#[derive(Debug, Serialize)]
struct Summary {
    schema_version: u32,
    k_max: usize,
    mu_p_grid: Vec<f64>,
    mu_v_grid: Vec<f64>,
    splits: BTreeMap<String, SplitSummary>,
}

fn eval_scene(
    stem: &Path,
    a: &EvalArgs,
    grippers: &[Gripper],
    cfg: &EvalConfig,
    clearing: Option<(&GraspHead, &PipelineConfig)>,
) -> anyhow::Result<SceneEval> {
    let scene = load(stem)?;
    let name = stem_name(stem);
    let oracle = SceneOracle::with_gripper(&scene.annotation, cfg.gripper);
    let mut ap = BTreeMap::new();
    for &g in grippers {
        let path = grasps_path(&a.grasps, &name, g);
        let file = read_grasps(&path)?;
        if file.scene != name || file.gripper != g {
            bail!("{} holds {} grasps for {}, expected {g} grasps for {name}", path.display(), file.gripper, file.scene);
        }
        let top = &file.grasps[..file.grasps.len().min(cfg.k_max)];
        if let Some(bad) = top.iter().find(|x| x.gripper() != g) {
            bail!("{}: a {} grasp in a {g} file", path.display(), bad.gripper());
        }
        ap.insert(g, ap_grid(&grasp_outcomes(&oracle, top, cfg.cup_radius), g, cfg));
    }
    let mut runs = Vec::new();
    if let Some((head, p)) = clearing {
        let mut traces = Vec::new();
        for &g in grippers {
            let mut policy = |s: &Scene| -> multigrasp_core::Result<PlannedGrasps> {
                let out = run_pipeline(s, head, &[g], p)?;
                let r = &out.results[0];
                Ok(PlannedGrasps { grasps: r.grasps.clone(), seed_points: r.seeds.indices.clone() })
            };
            let trace = run_clearing_loop(&scene, &mut policy, cfg)?;
            runs.push((g.to_string(), trace.metrics()));
            traces.push(trace);
        }
        if traces.len() > 1 {
            runs.push(("combined".to_string(), combine_grippers_posthoc(&traces)?));
        }
    }
    Ok(SceneEval { name, split: split_of(&scene), ap, clearing: runs })
}

fn mu_label(mu: f64) -> String {
    format!("{mu:.1}")
}

fn eval(run: &RunConfig, a: &EvalArgs) -> Outcome {
    let mut cfg = run.eval.clone();
    if let Some(k) = a.k {
        cfg.k_max = k;
    }
    check(cfg.validate())?;
    let grippers = parse_grippers(&a.grippers)?;
    let clearing_head = if a.clearing { Some(head_of(&a.head)?.0) } else { None };
    let p = pipeline_config(run, None)?;
    let stems = scene_stems(&a.scenes)?;
    create_dir(&a.out)?;
    let evals = stems
        .par_iter()
        .map(|stem| eval_scene(stem, a, &grippers, &cfg, clearing_head.as_ref().map(|h| (h, &p))))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_path(a.out.join("metrics.csv")).context("creating metrics.csv")?;
    for e in &evals {
        for (g, grid) in &e.ap {
            for &(mu, ap) in grid {
                w.serialize(MetricRow {
                    record: "ap",
                    scene: e.name.clone(),
                    split: e.split,
                    gripper: g.to_string(),
                    mu: Some(mu),
                    ap: Some(ap),
                    ..Default::default()
                })
                .context("writing metrics.csv")?;
            }
        }
        for (g, m) in &e.clearing {
            w.serialize(MetricRow::clearing(&e.name, e.split, g, m)).context("writing metrics.csv")?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(a.out.join("ap_grid.csv")).context("creating ap_grid.csv")?;
    let mut header = vec!["scene".to_string(), "split".to_string()];
    header.extend(cfg.mu_p_grid.iter().map(|&m| format!("ap_p_{}", mu_label(m))));
    header.extend(cfg.mu_v_grid.iter().map(|&m| format!("ap_v_{}", mu_label(m))));
    w.write_record(&header).context("writing ap_grid.csv")?;
    for e in &evals {
        let mut row = vec![e.name.clone(), e.split.to_string()];
        for g in Gripper::BOTH {
            match e.ap.get(&g) {
                Some(grid) => row.extend(grid.iter().map(|(_, ap)| format!("{ap:?}"))),
                None => row.extend(cfg.grid(g).iter().map(|_| String::new())),
            }
        }
        w.write_record(&row).context("writing ap_grid.csv")?;
    }
    w.flush()?;

    let summary = summarize(&evals, &cfg);
    write_json_pretty(&a.out.join("summary.json"), &summary)?;
    for (split, s) in &summary.splits {
        let aps: Vec<String> = s.grippers.iter().map(|(g, v)| format!("{g} AP {:.4}", v.ap_overall)).collect();
        println!("{split}: {} scenes, {}", s.scenes, aps.join(", "));
    }
    Ok(())
}

fn summarize(evals: &[SceneEval], cfg: &EvalConfig) -> Summary {
    let mut groups: BTreeMap<String, Vec<&SceneEval>> = BTreeMap::new();
    for e in evals {
        groups.entry(e.split.to_string()).or_default().push(e);
        groups.entry("all".to_string()).or_default().push(e);
    }
    let splits = groups
        .into_iter()
        .map(|(split, members)| {
            let mut s = SplitSummary { scenes: members.len(), ..Default::default() };
            for g in Gripper::BOTH {
                let grids: Vec<&Vec<(f64, f64)>> = members.iter().filter_map(|e| e.ap.get(&g)).collect();
                if grids.is_empty() {
                    continue;
                }
                let n = grids.len() as f64;
                let ap_mu: Vec<(f64, f64)> = cfg
                    .grid(g)
                    .iter()
                    .enumerate()
                    .map(|(k, &mu)| (mu, grids.iter().map(|grid| grid[k].1).sum::<f64>() / n))
                    .collect();
                let ap_overall = ap_mu.iter().map(|(_, v)| v).sum::<f64>() / ap_mu.len() as f64;
                s.grippers.insert(g.to_string(), GripperSummary { scenes: grids.len(), ap_overall, ap_mu });
            }
            let mut by_gripper: BTreeMap<String, Vec<ClearingMetrics>> = BTreeMap::new();
            for e in &members {
                for (g, m) in &e.clearing {
                    by_gripper.entry(g.clone()).or_default().push(*m);
                }
            }
            s.clearing = by_gripper.into_iter().map(|(g, runs)| (g, ClearingMetrics::pooled(&runs))).collect();
            (split, s)
        })
        .collect();
    Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        k_max: cfg.k_max,
        mu_p_grid: cfg.mu_p_grid.clone(),
        mu_v_grid: cfg.mu_v_grid.clone(),
        splits,
    }
}

fn export_ply(run: &RunConfig, a: &ExportArgs) -> Outcome {
    let channel: ColorChannel = a.channel.parse().map_err(|e: multigrasp_core::Error| usage(e.to_string()))?;
    let scene = load(&a.scene)?;
    let maps = if let Some(path) = &a.labels {
        read_labels(path)?.maps
    } else if let Some(path) = &a.checkpoint {
        let model = MlpModel::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        let index = SpatialIndex::build(&scene.cloud);
        model.predict_maps(&scene_features(&scene, &index, &run.pipeline.refine))?
    } else {
        oracle_maps(&scene, &run.pipeline.labels)?
    };
    let ply = colorized_ply(&scene.cloud, &maps, channel)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let format = if a.ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    let mut w = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    write_ply(&mut w, &ply, format)?;
    println!("{}: {} points colored by {}", a.out.display(), ply.positions.len(), a.channel);
    Ok(())
}
