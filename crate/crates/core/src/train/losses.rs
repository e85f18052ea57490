//! Map-head and refiner losses with analytic gradients.
//!
//! Map losses are means over points and return the gradient with respect
//! to each logit.

use serde::{Deserialize, Serialize};

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy on logits, positive term scaled by `pos_weight`.
pub fn weighted_bce(logits: &[f64], targets: &[f64], pos_weight: f64) -> (f64, Vec<f64>) {
    assert_eq!(logits.len(), targets.len());
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| {
            // -log σ(z) = softplus(-z), -log(1 - σ(z)) = softplus(z)
            loss += pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
            (pos_weight * y * (sigmoid(z) - 1.0) + (1.0 - y) * sigmoid(z)) / n
        })
        .collect();
    (loss / n, grad)
}

pub fn loss_objectness(logits: &[f64], labels: &[f64]) -> (f64, Vec<f64>) {
    let hard: Vec<f64> = labels.iter().map(|&l| if l > 0.5 { 1.0 } else { 0.0 }).collect();
    weighted_bce(logits, &hard, 1.0)
}

pub fn loss_vacuum(logits: &[f64], soft_labels: &[f64]) -> (f64, Vec<f64>) {
    weighted_bce(logits, soft_labels, 1.0)
}

/// Labels are binarized at zero before weighting.
pub fn loss_parallel_graspness(logits: &[f64], labels: &[f64], pos_weight: f64) -> (f64, Vec<f64>) {
    let hard: Vec<f64> = labels.iter().map(|&l| if l > 0.0 { 1.0 } else { 0.0 }).collect();
    weighted_bce(logits, &hard, pos_weight)
}

/// Smooth-L1 of a residual and its derivative.
pub fn smooth_l1(x: f64, beta: f64) -> (f64, f64) {
    if x.abs() < beta {
        (0.5 * x * x / beta, x / beta)
    } else {
        (x.abs() - 0.5 * beta, x.signum())
    }
}

/// Softmax cross-entropy of one class and its gradient.
pub fn cross_entropy(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exp.iter().sum();
    let loss = z.ln() + m - logits[class];
    let mut grad: Vec<f64> = exp.iter().map(|e| e / z).collect();
    grad[class] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinerWeights {
    pub view: f64,
    pub width: f64,
    pub angle: f64,
    pub depth: f64,
    pub score: f64,
}

impl Default for RefinerWeights {
    fn default() -> Self {
        Self {
            view: 1.0,
            width: 1.0,
            angle: 1.0,
            depth: 1.0,
            score: 1.0,
        }
    }
}

/// Oracle supervision for the grasp head at one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerTarget {
    pub point: usize,
    pub view_scores: Vec<f64>,
    pub width: f64,
    pub angle_bin: usize,
    pub depth_bin: usize,
    pub score_bin: usize,
}

/// Grasp-head outputs for one seed, borrowed from the model's output row.
#[derive(Debug, Clone, Copy)]
pub struct RefinerPrediction<'a> {
    pub view: &'a [f64],
    pub width: f64,
    pub angle: &'a [f64],
    pub depth: &'a [f64],
    pub score: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinerLoss {
    pub value: f64,
    pub d_view: Vec<f64>,
    pub d_width: f64,
    pub d_angle: Vec<f64>,
    pub d_depth: Vec<f64>,
    pub d_score: Vec<f64>,
}

/// Weighted sum of Smooth-L1 on view scores (mean over views) and width,
/// and cross-entropy on the angle, depth and score classes. β = 1.
pub fn loss_refiner(pred: &RefinerPrediction, target: &RefinerTarget, w: &RefinerWeights) -> RefinerLoss {
    assert_eq!(pred.view.len(), target.view_scores.len());
    let nv = pred.view.len().max(1) as f64;
    let mut value = 0.0;
    let d_view = pred
        .view
        .iter()
        .zip(&target.view_scores)
        .map(|(p, t)| {
            let (l, d) = smooth_l1(p - t, 1.0);
            value += w.view * l / nv;
            w.view * d / nv
        })
        .collect();
    let (lw, dw) = smooth_l1(pred.width - target.width, 1.0);
    value += w.width * lw;
    let mut ce = |logits: &[f64], class: usize, weight: f64| {
        let (l, mut g) = cross_entropy(logits, class);
        value += weight * l;
        g.iter_mut().for_each(|x| *x *= weight);
        g
    };
    let d_angle = ce(pred.angle, target.angle_bin, w.angle);
    let d_depth = ce(pred.depth, target.depth_bin, w.depth);
    let d_score = ce(pred.score, target.score_bin, w.score);
    RefinerLoss {
        value,
        d_view,
        d_width: w.width * dw,
        d_angle,
        d_depth,
        d_score,
    }
}
