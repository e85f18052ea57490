//! Vacuum pose completion from local surface normals.

use crate::cloud::PointCloud;
use crate::grasp::{Gripper, VacuumGrasp};
use crate::index::SpatialIndex;
use crate::normals::estimate_normal;
use crate::sampling::SeedSet;

#[derive(Debug, Clone, PartialEq)]
pub struct VacuumRefinement {
    pub grasps: Vec<VacuumGrasp>,
    /// Seeds dropped because their neighbourhood had no stable normal.
    pub degenerate: usize,
}

/// One grasp per seed: centre at the seed, estimated normal, fused score.
pub fn refine_vacuum_poses(cloud: &PointCloud, index: &SpatialIndex, seeds: &SeedSet, radius: f64) -> VacuumRefinement {
    debug_assert_eq!(seeds.gripper, Gripper::Vacuum);
    let mut grasps = Vec::with_capacity(seeds.len());
    let mut degenerate = 0;
    for (&i, &score) in seeds.indices.iter().zip(&seeds.fused_scores) {
        match estimate_normal(index, i, radius, &cloud.viewpoint()) {
            Ok(normal) => grasps.push(VacuumGrasp {
                center: *cloud.point(i),
                normal,
                score,
                seed: Some(i),
            }),
            Err(_) => degenerate += 1,
        }
    }
    VacuumRefinement { grasps, degenerate }
}

/// Descending by score, ties by seed index; at most `k` grasps.
pub fn rank_vacuum(mut grasps: Vec<VacuumGrasp>, k: usize) -> Vec<VacuumGrasp> {
    grasps.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.seed.cmp(&b.seed)));
    grasps.truncate(k);
    grasps
}
