//! Maps → seeds → poses for one scene, with either grasp head.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{Grasp, Gripper, ParallelGrasp};
use crate::index::SpatialIndex;
use crate::labels::{build_label_maps, GraspnessMaps, LabelConfig, MapRole};
use crate::refine::{
    argmax, cylinder_group, predict_grasp, rank_parallel, rank_vacuum, refine_parallel_fallback, refine_vacuum_poses,
    HeadOutputs, RefineConfig, ViewGrid,
};
use crate::sampling::{fuse_scores, select_seeds, SamplingConfig, SeedSet};
use crate::scene::{Scene, SceneOracle};
use crate::train::{point_features, MlpModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub sampling: SamplingConfig,
    pub refine: RefineConfig,
    pub labels: LabelConfig,
    /// Ranked grasps kept per gripper.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            refine: RefineConfig::default(),
            labels: LabelConfig::default(),
            top_k: 100,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.refine.validate()?;
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Learned predictor, or oracle maps plus exhaustive bin search.
#[derive(Debug, Clone)]
pub enum GraspHead {
    Fallback,
    Learned(Box<MlpModel>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GripperResult {
    pub gripper: Gripper,
    pub seeds: SeedSet,
    /// Ranked, at most `top_k`.
    pub grasps: Vec<Grasp>,
    /// Seeds that produced no pose.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub maps: GraspnessMaps,
    pub results: Vec<GripperResult>,
}

impl PipelineOutput {
    pub fn result(&self, gripper: Gripper) -> Option<&GripperResult> {
        self.results.iter().find(|r| r.gripper == gripper)
    }
}

/// Label maps from the scene's ground truth; all zeros when there is none.
pub fn oracle_maps(scene: &Scene, cfg: &LabelConfig) -> Result<GraspnessMaps> {
    let mut maps = if scene.ground_truth.is_empty() {
        scene.annotation.validate(scene.cloud.len())?;
        GraspnessMaps::zeros(scene.cloud.len(), MapRole::Label)
    } else {
        build_label_maps(&scene.cloud, &scene.annotation, &scene.ground_truth, cfg)?
    };
    maps.role = MapRole::Prediction;
    Ok(maps)
}

pub fn scene_features(scene: &Scene, index: &SpatialIndex, cfg: &RefineConfig) -> Array2<f64> {
    point_features(&scene.cloud, index, scene.annotation.table_height, cfg.normal_radius)
}

pub fn run_pipeline(scene: &Scene, head: &GraspHead, grippers: &[Gripper], cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let cloud = &scene.cloud;
    let index = SpatialIndex::build(cloud);
    let features = match head {
        GraspHead::Learned(_) => Some(scene_features(scene, &index, &cfg.refine)),
        GraspHead::Fallback => None,
    };
    let maps = match (head, &features) {
        (GraspHead::Learned(model), Some(f)) => model.predict_maps(f)?,
        _ => oracle_maps(scene, &cfg.labels)?,
    };

    let mut results = Vec::new();
    for &gripper in grippers {
        let fused = fuse_scores(&maps.objectness, maps.graspness(gripper))?;
        let seeds = select_seeds(
            cloud,
            &fused,
            cfg.sampling.threshold(gripper),
            cfg.sampling.count(gripper),
            gripper,
        )?;
        let (grasps, dropped) = match gripper {
            Gripper::Vacuum => {
                let r = refine_vacuum_poses(cloud, &index, &seeds, cfg.refine.normal_radius);
                let ranked = rank_vacuum(r.grasps, cfg.top_k);
                (ranked.into_iter().map(Grasp::Vacuum).collect::<Vec<_>>(), r.degenerate)
            }
            Gripper::Parallel => {
                let grid = ViewGrid::new(cfg.refine.view_count);
                let poses = match (head, &features) {
                    (GraspHead::Learned(model), Some(f)) => learned_parallel(model, f, scene, &index, &seeds, &grid, &cfg.refine)?,
                    _ => {
                        let oracle = SceneOracle::with_gripper(&scene.annotation, cfg.refine.gripper);
                        refine_parallel_fallback(cloud, &index, &seeds, &oracle, &grid, &cfg.refine)
                    }
                };
                let dropped = seeds.len() - poses.len();
                let ranked = rank_parallel(poses, cfg.top_k);
                (ranked.into_iter().map(Grasp::Parallel).collect(), dropped)
            }
        };
        results.push(GripperResult { gripper, seeds, grasps, dropped });
    }
    Ok(PipelineOutput { maps, results })
}

/// Learned grasp head: argmax view, cylinder group, decoded bins.
fn learned_parallel(
    model: &MlpModel,
    features: &Array2<f64>,
    scene: &Scene,
    index: &SpatialIndex,
    seeds: &SeedSet,
    grid: &ViewGrid,
    cfg: &RefineConfig,
) -> Result<Vec<ParallelGrasp>> {
    if seeds.is_empty() {
        return Ok(Vec::new());
    }
    let layout = model.layout();
    if layout.views != grid.len() || layout.angles != cfg.angle_bins || layout.depths != cfg.depth_bins.len() || layout.scores != cfg.score_bins {
        return Err(Error::InvalidConfig("checkpoint grasp head does not match the refine configuration".into()));
    }
    let rows = model.predict_refiner(features, &seeds.indices)?;
    let mut out = Vec::with_capacity(seeds.len());
    for (r, &s) in seeds.indices.iter().enumerate() {
        let row = rows.row(r).to_vec();
        let p = layout.split(&row, model.width_offset);
        let view = grid.view(argmax(p.view));
        let group = cylinder_group(&scene.cloud, index, s, view, cfg.cylinder_radius, cfg.cylinder_height);
        let head = HeadOutputs {
            angle_logits: p.angle.to_vec(),
            depth_logits: p.depth.to_vec(),
            width: p.width,
            score_logits: p.score.to_vec(),
        };
        if let Ok(g) = predict_grasp(&scene.cloud, &group, &head, cfg) {
            out.push(g);
        }
    }
    Ok(out)
}
