//! Scene-batched training loop with optional gradient surgery.

use std::io::Write;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::train::dataset::{validate_dataset, TrainingScene};
use crate::train::features::{feature_stats, FEATURE_DIM};
use crate::train::losses::{
    loss_objectness, loss_parallel_graspness, loss_refiner, loss_vacuum, RefinerTarget, RefinerWeights,
};
use crate::train::mlp::{HeadLayout, MlpModel, MAP_OUTPUTS, OBJECTNESS, PARALLEL, VACUUM};
use crate::train::optim::{cosine_lr, Adam};
use crate::train::pcgrad::{mean_gradient, pcgrad};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub positive_weight_parallel: f64,
    pub pcgrad_enabled: bool,
    pub rng_seed: u64,
    pub hidden: Vec<usize>,
    pub refiner_weights: RefinerWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 5e-4,
            batch_size: 12,
            epochs: 22,
            positive_weight_parallel: 10.0,
            pcgrad_enabled: true,
            rng_seed: 0,
            hidden: vec![64, 64],
            refiner_weights: RefinerWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be at least 1".into()));
        }
        if self.positive_weight_parallel <= 0.0 {
            return Err(Error::InvalidConfig("positive_weight_parallel must be positive".into()));
        }
        Ok(())
    }

    /// Name written to the log's variant column.
    pub fn variant(&self) -> &'static str {
        if self.pcgrad_enabled {
            "PCGrad"
        } else {
            "w/o PCGrad"
        }
    }
}

/// Mean losses over the batches of one epoch, measured before each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_obj: f64,
    pub loss_vac: f64,
    pub loss_par: f64,
    pub loss_refiner: f64,
    pub variant: String,
}

impl EpochLog {
    pub fn total(&self) -> f64 {
        self.loss_obj + self.loss_vac + self.loss_par + self.loss_refiner
    }
}

pub fn write_log_csv<W: Write>(out: W, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-task losses and parameter gradients for one batch.
#[derive(Debug, Clone)]
pub struct TaskGradients {
    pub loss_obj: f64,
    pub loss_par: f64,
    pub loss_vac: f64,
    pub loss_refiner: f64,
    pub objectness: Vec<f64>,
    /// Parallel graspness plus the grasp-head loss.
    pub parallel: Vec<f64>,
    pub vacuum: Vec<f64>,
}

/// Standardized features, labels and grasp-head targets of several scenes
/// stacked into one batch.
pub struct Batch {
    pub x: Array2<f64>,
    pub objectness: Vec<f64>,
    pub parallel: Vec<f64>,
    pub vacuum: Vec<f64>,
    pub refiner: Vec<RefinerTarget>,
}

impl Batch {
    pub fn stack(model: &MlpModel, scenes: &[&TrainingScene]) -> Result<Self> {
        let mut xs = Vec::with_capacity(scenes.len());
        let mut b = Batch {
            x: Array2::zeros((0, model.input_dim())),
            objectness: Vec::new(),
            parallel: Vec::new(),
            vacuum: Vec::new(),
            refiner: Vec::new(),
        };
        let mut offset = 0;
        for s in scenes {
            xs.push(model.standardize(&s.features)?);
            b.objectness.extend_from_slice(&s.labels.objectness);
            b.parallel.extend_from_slice(&s.labels.parallel);
            b.vacuum.extend_from_slice(&s.labels.vacuum);
            b.refiner.extend(s.refiner.iter().map(|t| RefinerTarget { point: t.point + offset, ..t.clone() }));
            offset += s.len();
        }
        let views: Vec<_> = xs.iter().map(|x| x.view()).collect();
        b.x = concatenate(Axis(0), &views).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(b)
    }
}

/// Losses and separate parameter gradients of the three tasks.
pub fn task_gradients(model: &MlpModel, batch: &Batch, cfg: &TrainConfig) -> Result<TaskGradients> {
    let fwd = model.forward(&batch.x)?;
    let n = batch.x.nrows();
    let (loss_obj, d_obj) = loss_objectness(&fwd.logits(OBJECTNESS), &batch.objectness);
    let (loss_par, d_par) = loss_parallel_graspness(&fwd.logits(PARALLEL), &batch.parallel, cfg.positive_weight_parallel);
    let (loss_vac, d_vac) = loss_vacuum(&fwd.logits(VACUUM), &batch.vacuum);

    let layout = model.layout();
    let rows: Vec<usize> = batch.refiner.iter().map(|t| t.point).collect();
    let out = model.refiner_outputs(&fwd, &rows);
    let m = rows.len().max(1) as f64;
    let mut refiner_total = 0.0;
    let mut d_ref = Array2::zeros((rows.len(), layout.width()));
    for (r, t) in batch.refiner.iter().enumerate() {
        let row = out.row(r).to_vec();
        let l = loss_refiner(&layout.split(&row, model.width_offset), t, &cfg.refiner_weights);
        refiner_total += l.value / m;
        let g = layout.join(&l.d_view, &l.d_angle, &l.d_depth, l.d_width, &l.d_score);
        d_ref.row_mut(r).iter_mut().zip(g).for_each(|(d, x)| *d = x / m);
    }

    let column = |c: usize, d: &[f64]| {
        let mut a = Array2::zeros((n, MAP_OUTPUTS));
        a.column_mut(c).iter_mut().zip(d).for_each(|(x, v)| *x = *v);
        a
    };
    let empty = Array2::zeros((0, layout.width()));
    Ok(TaskGradients {
        loss_obj,
        loss_par,
        loss_vac,
        loss_refiner: refiner_total,
        objectness: model.backward(&fwd, &column(OBJECTNESS, &d_obj), &[], &empty),
        parallel: model.backward(&fwd, &column(PARALLEL, &d_par), &rows, &d_ref),
        vacuum: model.backward(&fwd, &column(VACUUM, &d_vac), &[], &empty),
    })
}

/// Objectness gradient plus the surgery-combined (or averaged) gripper
/// task gradients.
pub fn combine(g: &TaskGradients, pcgrad_enabled: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let tasks = [g.parallel.clone(), g.vacuum.clone()];
    let mut out = if pcgrad_enabled { pcgrad(&tasks, rng) } else { mean_gradient(&tasks) };
    out.iter_mut().zip(&g.objectness).for_each(|(o, x)| *o += x);
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: MlpModel,
    pub log: Vec<EpochLog>,
}

/// Constant logit minimizing a weighted cross-entropy for a positive rate.
fn prior_logit(rate: f64, pos_weight: f64) -> f64 {
    let r = rate.clamp(1e-6, 1.0 - 1e-6);
    (pos_weight * r / (1.0 - r)).ln()
}

/// Fresh model: seeded hidden weights, map-head biases at the training
/// base rates, feature standardization and width offset taken from the
/// training scenes.
pub fn init_model(scenes: &[TrainingScene], layout: HeadLayout, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> MlpModel {
    let mut model = MlpModel::new(FEATURE_DIM, &cfg.hidden, layout, rng);
    let n: usize = scenes.iter().map(|s| s.len()).sum::<usize>().max(1);
    let rate = |f: &dyn Fn(&TrainingScene) -> f64| scenes.iter().map(f).sum::<f64>() / n as f64;
    let obj = rate(&|s| s.labels.objectness.iter().filter(|&&v| v > 0.5).count() as f64);
    let par = rate(&|s| s.labels.parallel.iter().filter(|&&v| v > 0.0).count() as f64);
    let vac = rate(&|s| s.labels.vacuum.iter().sum());
    model.set_map_bias([prior_logit(obj, 1.0), prior_logit(par, cfg.positive_weight_parallel), prior_logit(vac, 1.0)]);
    let (mean, std) = feature_stats(scenes.iter().map(|s| &s.features));
    model.feature_mean = mean;
    model.feature_std = std;
    let widths: Vec<f64> = scenes.iter().flat_map(|s| s.refiner.iter().map(|t| t.width)).collect();
    if !widths.is_empty() {
        model.width_offset = widths.iter().sum::<f64>() / widths.len() as f64;
    }
    let targets: Vec<&RefinerTarget> = scenes.iter().flat_map(|s| s.refiner.iter()).collect();
    model
        .set_refiner_bias(&refiner_prior(&targets, &layout))
        .expect("layout width matches the model");
    model
}

/// Grasp-head biases that reproduce the training targets' marginals: mean
/// view scores, zero width residual and Laplace-smoothed log class
/// frequencies for the bin classifiers.
pub fn refiner_prior(targets: &[&RefinerTarget], layout: &HeadLayout) -> Vec<f64> {
    let n = targets.len() as f64;
    let log_freq = |k: usize, bin: &dyn Fn(&RefinerTarget) -> usize| -> Vec<f64> {
        let mut counts = vec![1.0; k];
        for t in targets {
            counts[bin(t).min(k - 1)] += 1.0;
        }
        counts.iter().map(|c| (c / (n + k as f64)).ln()).collect()
    };
    let mut view = vec![0.0; layout.views];
    for t in targets {
        for (v, s) in view.iter_mut().zip(&t.view_scores) {
            *v += s / n;
        }
    }
    layout.join(
        &view,
        &log_freq(layout.angles, &|t| t.angle_bin),
        &log_freq(layout.depths, &|t| t.depth_bin),
        0.0,
        &log_freq(layout.scores, &|t| t.score_bin),
    )
}

pub fn train(scenes: &[TrainingScene], layout: HeadLayout, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    validate_dataset(scenes, &layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut model = init_model(scenes, layout, cfg, &mut rng);
    let mut adam = Adam::new(model.param_count());
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg.lr0, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let picked: Vec<&TrainingScene> = chunk.iter().map(|&i| &scenes[i]).collect();
            let batch = Batch::stack(&model, &picked)?;
            let g = task_gradients(&model, &batch, cfg)?;
            let losses = [g.loss_obj, g.loss_vac, g.loss_par, g.loss_refiner];
            if let Some(k) = losses.iter().position(|l| !l.is_finite()) {
                let name = ["objectness", "vacuum", "parallel", "refiner"][k];
                return Err(Error::NonFiniteLoss { epoch, detail: format!("{name} loss is {}", losses[k]) });
            }
            let step = combine(&g, cfg.pcgrad_enabled, &mut rng);
            if step.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, detail: "non-finite gradient".into() });
            }
            adam.step(model.params_mut(), &step, lr);
            sums.iter_mut().zip(losses).for_each(|(s, l)| *s += l);
            batches += 1;
        }
        let b = batches as f64;
        log.push(EpochLog {
            epoch,
            lr,
            loss_obj: sums[0] / b,
            loss_vac: sums[1] / b,
            loss_par: sums[2] / b,
            loss_refiner: sums[3] / b,
            variant: cfg.variant().to_string(),
        });
    }
    Ok(TrainOutput { model, log })
}
