//! Oracle outcomes, Precision@k, AP over friction/seal grids, ROC-AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{Grasp, Gripper};
use crate::scene::{GripperGeometry, SceneOracle, DEFAULT_CUP_RADIUS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub k_max: usize,
    pub mu_p_grid: Vec<f64>,
    pub mu_v_grid: Vec<f64>,
    pub max_consecutive_failures: usize,
    /// Execution thresholds of the clearing loop.
    pub exec_mu_parallel: f64,
    pub exec_mu_vacuum: f64,
    pub cup_radius: f64,
    pub gripper: GripperGeometry,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k_max: 50,
            mu_p_grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            mu_v_grid: vec![0.2, 0.4, 0.6, 0.8],
            max_consecutive_failures: 3,
            exec_mu_parallel: 0.8,
            exec_mu_vacuum: 0.4,
            cup_radius: DEFAULT_CUP_RADIUS,
            gripper: GripperGeometry::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        for (name, grid) in [("mu_p_grid", &self.mu_p_grid), ("mu_v_grid", &self.mu_v_grid)] {
            if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!("{name} must be non-empty and strictly ascending")));
            }
        }
        if self.max_consecutive_failures == 0 {
            return Err(Error::InvalidConfig("max_consecutive_failures must be at least 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self, gripper: Gripper) -> &[f64] {
        match gripper {
            Gripper::Parallel => &self.mu_p_grid,
            Gripper::Vacuum => &self.mu_v_grid,
        }
    }

    pub fn exec_threshold(&self, gripper: Gripper) -> f64 {
        match gripper {
            Gripper::Parallel => self.exec_mu_parallel,
            Gripper::Vacuum => self.exec_mu_vacuum,
        }
    }
}

/// What the oracle says about one grasp, independent of any threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspOutcome {
    pub gripper: Gripper,
    /// Required friction (parallel, +inf without closure) or seal (vacuum).
    pub quality: f64,
    pub collides: bool,
    /// Object the grasp acts on.
    pub object: Option<u32>,
}

impl GraspOutcome {
    /// Parallel: collision-free and required friction ≤ μ. Vacuum: seal ≥ μ.
    pub fn success(&self, mu: f64) -> bool {
        match self.gripper {
            Gripper::Parallel => !self.collides && self.quality <= mu,
            Gripper::Vacuum => self.quality >= mu,
        }
    }
}

pub fn grasp_outcome(oracle: &SceneOracle, grasp: &Grasp, cup_radius: f64) -> GraspOutcome {
    match grasp {
        Grasp::Parallel(g) => {
            let contact = if g.width > oracle.gripper().max_width + 1e-12 {
                None
            } else {
                oracle
                    .jaw_contact(&g.jaw_center(), &g.closing_axis().into_inner(), g.width)
                    .ok()
            };
            GraspOutcome {
                gripper: Gripper::Parallel,
                quality: contact.map_or(f64::INFINITY, |c| c.mu),
                collides: oracle.parallel_collides(g),
                object: contact.map(|c| c.object_id),
            }
        }
        Grasp::Vacuum(g) => GraspOutcome {
            gripper: Gripper::Vacuum,
            quality: oracle.seal_quality(g, cup_radius),
            collides: oracle.vacuum_collides(g),
            object: oracle.support(&g.center).map(|(k, _)| oracle.scene().primitives[k].object_id),
        },
    }
}

/// Outcomes of a ranked grasp list, in rank order.
pub fn grasp_outcomes(oracle: &SceneOracle, grasps: &[Grasp], cup_radius: f64) -> Vec<GraspOutcome> {
    grasps.iter().map(|g| grasp_outcome(oracle, g, cup_radius)).collect()
}

/// Fraction of successes among the first min(k, len) entries; 0 for an
/// empty list or k = 0.
pub fn precision_at_k(successes: &[bool], k: usize) -> f64 {
    let n = k.min(successes.len());
    if n == 0 {
        return 0.0;
    }
    successes[..n].iter().filter(|&&s| s).count() as f64 / n as f64
}

/// Mean of Precision@k over k = 1..=k_max.
pub fn ap_mu(successes: &[bool], k_max: usize) -> f64 {
    if k_max == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for k in 1..=k_max {
        if k <= successes.len() && successes[k - 1] {
            hits += 1;
        }
        let n = k.min(successes.len());
        if n > 0 {
            sum += hits as f64 / n as f64;
        }
    }
    sum / k_max as f64
}

/// AP at every grid coefficient of the outcomes' gripper.
pub fn ap_grid(outcomes: &[GraspOutcome], gripper: Gripper, cfg: &EvalConfig) -> Vec<(f64, f64)> {
    cfg.grid(gripper)
        .iter()
        .map(|&mu| {
            let flags: Vec<bool> = outcomes.iter().map(|o| o.success(mu)).collect();
            (mu, ap_mu(&flags, cfg.k_max))
        })
        .collect()
}

/// Mean AP over the gripper's coefficient grid.
pub fn ap_overall(outcomes: &[GraspOutcome], gripper: Gripper, cfg: &EvalConfig) -> f64 {
    let grid = ap_grid(outcomes, gripper, cfg);
    grid.iter().map(|(_, ap)| ap).sum::<f64>() / grid.len() as f64
}

/// Area under the ROC curve with tied scores counted as one half.
/// `None` when either class is empty.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut pos = 0usize;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += mid_rank;
                pos += 1;
            }
        }
        i = j + 1;
    }
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    Some((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64))
}
