//! Training examples: features, label maps and grasp-head targets per scene.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fps::farthest_point_sampling;
use crate::index::SpatialIndex;
use crate::labels::{build_label_maps, GraspnessMaps, LabelConfig};
use crate::refine::{argmax, best_bin, oracle_view_scores, RefineConfig, ViewGrid};
use crate::scene::{Scene, SceneOracle};
use crate::train::features::point_features;
use crate::train::losses::RefinerTarget;
use crate::train::mlp::HeadLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Seeds per scene supervised for the grasp head.
    pub refiner_samples: usize,
    pub labels: LabelConfig,
    pub refine: RefineConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            refiner_samples: 16,
            labels: LabelConfig::default(),
            refine: RefineConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn head_layout(&self) -> HeadLayout {
        HeadLayout {
            views: self.refine.view_count,
            angles: self.refine.angle_bins,
            depths: self.refine.depth_bins.len(),
            scores: self.refine.score_bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingScene {
    /// Raw (unstandardized) features.
    pub features: Array2<f64>,
    pub labels: GraspnessMaps,
    pub refiner: Vec<RefinerTarget>,
}

impl TrainingScene {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

/// Labels from the scene's ground truth, features from its cloud, and
/// oracle grasp-head targets at farthest-point samples of the parallel
/// positives.
pub fn build_training_scene(scene: &Scene, cfg: &DatasetConfig) -> Result<TrainingScene> {
    let labels = build_label_maps(&scene.cloud, &scene.annotation, &scene.ground_truth, &cfg.labels)?;
    let index = SpatialIndex::build(&scene.cloud);
    let features = point_features(&scene.cloud, &index, scene.annotation.table_height, cfg.refine.normal_radius);

    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels.parallel[i] > 0.0).collect();
    let picks = if positives.len() <= cfg.refiner_samples {
        positives
    } else {
        farthest_point_sampling(scene.cloud.points(), &positives, cfg.refiner_samples)?
    };
    let oracle = SceneOracle::with_gripper(&scene.annotation, cfg.refine.gripper);
    let grid = ViewGrid::new(cfg.refine.view_count);
    let refiner = picks
        .par_iter()
        .map(|&i| {
            let p = scene.cloud.point(i);
            let view_scores = oracle_view_scores(&oracle, p, &grid, &cfg.refine);
            let best = best_bin(&oracle, p, grid.view(argmax(&view_scores)), &cfg.refine);
            RefinerTarget {
                point: i,
                view_scores,
                width: best.grasp.width,
                angle_bin: best.angle_bin,
                depth_bin: best.depth_bin,
                score_bin: cfg.refine.score_bin(best.graspness(cfg.refine.mu_max)),
            }
        })
        .collect();
    Ok(TrainingScene { features, labels, refiner })
}

/// Check that every scene agrees with the grasp-head layout.
pub fn validate_dataset(scenes: &[TrainingScene], layout: &HeadLayout) -> Result<()> {
    if scenes.is_empty() {
        return Err(Error::InvalidConfig("training needs at least one scene".into()));
    }
    for s in scenes {
        s.labels.validate()?;
        if s.labels.len() != s.len() {
            return Err(Error::LengthMismatch { what: "labels", got: s.labels.len(), expected: s.len() });
        }
        for t in &s.refiner {
            if t.view_scores.len() != layout.views
                || t.angle_bin >= layout.angles
                || t.depth_bin >= layout.depths
                || t.score_bin >= layout.scores
                || t.point >= s.len()
            {
                return Err(Error::InvalidConfig("grasp-head target does not match the head layout".into()));
            }
        }
    }
    Ok(())
}
