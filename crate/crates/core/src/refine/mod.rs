//! Pose completion for both end-effectors.

mod parallel;
mod vacuum;
mod views;

pub use parallel::{
    best_bin, decode_score, decode_width, enumerate_bins, fallback_grasp, oracle_select_view, oracle_view_scores,
    predict_grasp, rank_parallel, refine_parallel_fallback, BinCandidate, HeadOutputs, RefineConfig, MIN_WIDTH,
};
pub use vacuum::{rank_vacuum, refine_vacuum_poses, VacuumRefinement};
pub use views::{argmax, brute_force_cylinder, cylinder_group, in_cylinder, select_view, CylinderGroup, ViewGrid};
