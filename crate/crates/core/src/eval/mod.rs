//! Benchmark metrics and the clearing simulation.

mod clearing;
mod metrics;

pub use clearing::{
    combine_grippers_posthoc, run_clearing_loop, Attempt, ClearingCounts, ClearingMetrics, ClearingTrace, GraspPolicy,
    PlannedGrasps,
};
pub use metrics::{
    ap_grid, ap_mu, ap_overall, grasp_outcome, grasp_outcomes, precision_at_k, roc_auc, EvalConfig, GraspOutcome,
};
