//! Parallel-jaw pose completion: view choice, bin decoding and the
//! oracle-driven fallback head.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, UnitVector3, Vec3};
use crate::grasp::ParallelGrasp;
use crate::index::SpatialIndex;
use crate::labels::friction_to_graspness;
use crate::sampling::SeedSet;
use crate::scene::{GripperGeometry, SceneOracle};

use super::views::{argmax, cylinder_group, CylinderGroup, ViewGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub view_count: usize,
    pub angle_bins: usize,
    pub depth_bins: Vec<f64>,
    pub cylinder_radius: f64,
    pub cylinder_height: f64,
    /// Clearance added to a fitted jaw opening.
    pub width_margin: f64,
    /// Score classes; class `k` stands for the value `(k + 0.5) / score_bins`.
    pub score_bins: usize,
    pub mu_max: f64,
    /// Radius of the neighbourhood used for vacuum normals.
    pub normal_radius: f64,
    pub gripper: GripperGeometry,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            view_count: 300,
            angle_bins: 12,
            depth_bins: vec![0.01, 0.02, 0.03, 0.04],
            cylinder_radius: 0.05,
            cylinder_height: 0.04,
            width_margin: 0.01,
            score_bins: 10,
            mu_max: 1.0,
            normal_radius: crate::normals::DEFAULT_NORMAL_RADIUS,
            gripper: GripperGeometry::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.view_count == 0 || self.angle_bins == 0 || self.depth_bins.is_empty() || self.score_bins == 0 {
            return Err(Error::InvalidConfig("refiner bin counts must be positive".into()));
        }
        if !(self.cylinder_radius > 0.0 && self.cylinder_height > 0.0) {
            return Err(Error::InvalidConfig("cylinder radius and height must be positive".into()));
        }
        Ok(())
    }

    pub fn angle_of_bin(&self, k: usize) -> f64 {
        180.0 * k as f64 / self.angle_bins as f64
    }

    pub fn score_centres(&self) -> Vec<f64> {
        (0..self.score_bins)
            .map(|k| (k as f64 + 0.5) / self.score_bins as f64)
            .collect()
    }

    /// Score class holding `s` ∈ [0, 1].
    pub fn score_bin(&self, s: f64) -> usize {
        ((s.clamp(0.0, 1.0) * self.score_bins as f64) as usize).min(self.score_bins - 1)
    }
}

/// Raw outputs of a learned grasp head for one cylinder group.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutputs {
    pub angle_logits: Vec<f64>,
    pub depth_logits: Vec<f64>,
    pub width: f64,
    pub score_logits: Vec<f64>,
}

/// Smallest opening a decoded grasp may report.
pub const MIN_WIDTH: f64 = 1e-3;

pub fn decode_width(raw: f64, max_width: f64) -> f64 {
    if raw.is_nan() {
        return max_width;
    }
    raw.clamp(MIN_WIDTH, max_width)
}

/// Expected score under the softmax over score classes.
pub fn decode_score(logits: &[f64], centres: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().zip(centres).map(|(w, c)| w * c).sum::<f64>() / z
}

/// Decode a learned head's outputs into a grasp at the group's seed.
pub fn predict_grasp(cloud: &PointCloud, group: &CylinderGroup, out: &HeadOutputs, cfg: &RefineConfig) -> Result<ParallelGrasp> {
    if group.member_indices.is_empty() {
        return Err(Error::NoSupport(group.seed_index));
    }
    Ok(ParallelGrasp {
        center: *cloud.point(group.seed_index),
        approach: group.view,
        angle_deg: cfg.angle_of_bin(argmax(&out.angle_logits)),
        width: decode_width(out.width, cfg.gripper.max_width),
        depth: cfg.depth_bins[argmax(&out.depth_logits).min(cfg.depth_bins.len() - 1)],
        score: decode_score(&out.score_logits, &cfg.score_centres()),
        seed: Some(group.seed_index),
    })
}

/// Oracle-evaluated candidate on the (angle, depth) lattice of one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinCandidate {
    pub angle_bin: usize,
    pub depth_bin: usize,
    pub grasp: ParallelGrasp,
    /// Required friction; infinite when the candidate is invalid.
    pub mu: f64,
    pub collides: bool,
}

impl BinCandidate {
    pub fn graspness(&self, mu_max: f64) -> f64 {
        if self.collides {
            0.0
        } else {
            friction_to_graspness(self.mu, mu_max)
        }
    }
}

/// Every (angle, depth) candidate for a view with its jaw opening fitted to
/// the target object. Invalid candidates carry `mu = ∞` and maximum width.
pub fn enumerate_bins(
    oracle: &SceneOracle,
    center: &Point3,
    view: UnitVector3,
    cfg: &RefineConfig,
) -> Vec<BinCandidate> {
    let target = oracle.nearest_object(center);
    let mut out = Vec::with_capacity(cfg.angle_bins * cfg.depth_bins.len());
    for a in 0..cfg.angle_bins {
        for (d, &depth) in cfg.depth_bins.iter().enumerate() {
            out.push(bin_candidate(oracle, target, center, view, a, d, depth, cfg, true));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn bin_candidate(
    oracle: &SceneOracle,
    target: Option<u32>,
    center: &Point3,
    view: UnitVector3,
    a: usize,
    d: usize,
    depth: f64,
    cfg: &RefineConfig,
    check_collision: bool,
) -> BinCandidate {
    let angle = cfg.angle_of_bin(a);
    let fitted = target.and_then(|id| {
        crate::scene::fitted_parallel(oracle, id, center, view, angle, depth, cfg.width_margin)
    });
    match fitted {
        Some((grasp, mu)) => BinCandidate {
            angle_bin: a,
            depth_bin: d,
            grasp,
            mu,
            collides: check_collision && oracle.parallel_collides(&grasp),
        },
        None => BinCandidate {
            angle_bin: a,
            depth_bin: d,
            grasp: ParallelGrasp {
                center: *center,
                approach: view,
                angle_deg: angle,
                width: cfg.gripper.max_width,
                depth,
                score: 0.0,
                seed: None,
            },
            mu: f64::INFINITY,
            collides: false,
        },
    }
}

/// Best candidate of a view: highest graspness, lowest (angle, depth) bin
/// on ties. Collision checks run only on candidates that could still win.
fn best_in_view(
    oracle: &SceneOracle,
    target: Option<u32>,
    center: &Point3,
    view: UnitVector3,
    cfg: &RefineConfig,
) -> BinCandidate {
    let mut cands: Vec<BinCandidate> = Vec::with_capacity(cfg.angle_bins * cfg.depth_bins.len());
    for a in 0..cfg.angle_bins {
        for (d, &depth) in cfg.depth_bins.iter().enumerate() {
            cands.push(bin_candidate(oracle, target, center, view, a, d, depth, cfg, false));
        }
    }
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&i, &j| {
        let (gi, gj) = (cands[i].graspness(cfg.mu_max), cands[j].graspness(cfg.mu_max));
        gj.total_cmp(&gi).then(i.cmp(&j))
    });
    for &i in &order {
        let c = &mut cands[i];
        if !c.mu.is_finite() {
            break;
        }
        c.collides = oracle.parallel_collides(&c.grasp);
        if !c.collides {
            return *c;
        }
    }
    // nothing usable: report the first bin as a zero-score grasp
    let first = cands[0];
    if first.mu.is_finite() {
        BinCandidate { collides: true, ..first }
    } else {
        first
    }
}

/// Best collision-free lattice candidate along `view` for a point on the
/// surface; a zero-score candidate when none is usable.
pub fn best_bin(oracle: &SceneOracle, center: &Point3, view: UnitVector3, cfg: &RefineConfig) -> BinCandidate {
    best_in_view(oracle, oracle.nearest_object(center), center, view, cfg)
}

/// Exhaustive bin search for a fixed view; the fallback grasp head.
pub fn fallback_grasp(
    oracle: &SceneOracle,
    cloud: &PointCloud,
    group: &CylinderGroup,
    cfg: &RefineConfig,
) -> Result<ParallelGrasp> {
    if group.member_indices.is_empty() {
        return Err(Error::NoSupport(group.seed_index));
    }
    let center = cloud.point(group.seed_index);
    let best = best_in_view(oracle, oracle.nearest_object(center), center, group.view, cfg);
    Ok(ParallelGrasp {
        score: best.graspness(cfg.mu_max),
        seed: Some(group.seed_index),
        ..best.grasp
    })
}

/// Oracle view quality: best collision-free graspness along the view times
/// the cosine between the view and the inward surface normal.
pub fn oracle_view_scores(oracle: &SceneOracle, center: &Point3, grid: &ViewGrid, cfg: &RefineConfig) -> Vec<f64> {
    let target = oracle.nearest_object(center);
    let inward = inward_normal(oracle, center);
    grid.views()
        .iter()
        .map(|v| {
            let cos = v.dot(&inward);
            if cos <= 0.0 {
                0.0
            } else {
                best_in_view(oracle, target, center, *v, cfg).graspness(cfg.mu_max) * cos
            }
        })
        .collect()
}

fn inward_normal(oracle: &SceneOracle, p: &Point3) -> Vec3 {
    let scene = oracle.scene();
    match oracle.nearest_object(p).and_then(|id| scene.primitive(id)) {
        Some(prim) => -prim.closest_surface(p).1,
        None => -Vec3::z(),
    }
}

/// Argmax of [`oracle_view_scores`] without scoring every view exactly:
/// views are visited by an optimistic bound (collisions ignored) and the
/// first view whose exact score beats every remaining bound wins.
pub fn oracle_select_view(oracle: &SceneOracle, center: &Point3, grid: &ViewGrid, cfg: &RefineConfig) -> usize {
    let target = oracle.nearest_object(center);
    let inward = inward_normal(oracle, center);
    let mut bounds: Vec<(f64, usize, bool)> = grid
        .views()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let cos = v.dot(&inward);
            if cos <= 0.0 {
                return (0.0, i, true);
            }
            let mut best = 0.0f64;
            for a in 0..cfg.angle_bins {
                for (d, &depth) in cfg.depth_bins.iter().enumerate() {
                    let c = bin_candidate(oracle, target, center, *v, a, d, depth, cfg, false);
                    best = best.max(c.graspness(cfg.mu_max));
                }
            }
            (best * cos, i, best == 0.0)
        })
        .collect();
    loop {
        // highest score, lowest index on ties
        let pos = (0..bounds.len())
            .reduce(|b, k| {
                let (sb, ib, _) = bounds[b];
                let (sk, ik, _) = bounds[k];
                if sk > sb || (sk == sb && ik < ib) {
                    k
                } else {
                    b
                }
            })
            .expect("grid is non-empty");
        let (score, i, exact) = bounds[pos];
        if exact {
            return i;
        }
        let v = grid.view(i);
        let exact_score = best_in_view(oracle, target, center, v, cfg).graspness(cfg.mu_max) * v.dot(&inward);
        bounds[pos] = (exact_score.min(score), i, true);
    }
}

/// Fallback refinement of every seed: oracle view, cylinder group and
/// exhaustive bin search. Seeds with empty groups are skipped.
pub fn refine_parallel_fallback(
    cloud: &PointCloud,
    index: &SpatialIndex,
    seeds: &SeedSet,
    oracle: &SceneOracle,
    grid: &ViewGrid,
    cfg: &RefineConfig,
) -> Vec<ParallelGrasp> {
    seeds
        .indices
        .par_iter()
        .filter_map(|&s| {
            let view = grid.view(oracle_select_view(oracle, cloud.point(s), grid, cfg));
            let group = cylinder_group(cloud, index, s, view, cfg.cylinder_radius, cfg.cylinder_height);
            fallback_grasp(oracle, cloud, &group, cfg).ok()
        })
        .collect()
}

/// Descending by score, ties by seed index; at most `k` grasps.
pub fn rank_parallel(mut grasps: Vec<ParallelGrasp>, k: usize) -> Vec<ParallelGrasp> {
    grasps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.seed.cmp(&b.seed)));
    grasps.truncate(k);
    grasps
}
