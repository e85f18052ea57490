//! Simulated table clearing and its success ratios.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::{grasp_outcome, EvalConfig};
use crate::grasp::Grasp;
use crate::scene::{Scene, SceneOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    /// Object the executed grasp acted on; `None` when it touched nothing.
    pub object: Option<u32>,
    pub success: bool,
}

/// Everything that happened while clearing one scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingTrace {
    pub objects: Vec<u32>,
    pub attempts: Vec<Attempt>,
    /// Objects with at least one point among the seeds of any planning step.
    pub detected: BTreeSet<u32>,
}

impl ClearingTrace {
    pub fn cleared(&self) -> BTreeSet<u32> {
        self.attempts
            .iter()
            .filter(|a| a.success)
            .filter_map(|a| a.object)
            .collect()
    }

    pub fn attempts_on(&self, object: u32) -> usize {
        self.attempts.iter().filter(|a| a.object == Some(object)).count()
    }

    pub fn metrics(&self) -> ClearingMetrics {
        let cleared = self.cleared();
        ClearingMetrics::from_counts(ClearingCounts {
            objects_total: self.objects.len(),
            objects_cleared: cleared.len(),
            grasps_total: self.attempts.len(),
            grasps_successful: self.attempts.iter().filter(|a| a.success).count(),
            grasps_on_cleared: self
                .attempts
                .iter()
                .filter(|a| a.object.is_some_and(|o| cleared.contains(&o)))
                .count(),
            objects_detected: self.detected.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingCounts {
    pub objects_total: usize,
    pub objects_cleared: usize,
    pub grasps_total: usize,
    pub grasps_successful: usize,
    pub grasps_on_cleared: usize,
    pub objects_detected: usize,
}

impl std::ops::Add for ClearingCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            objects_total: self.objects_total + o.objects_total,
            objects_cleared: self.objects_cleared + o.objects_cleared,
            grasps_total: self.grasps_total + o.grasps_total,
            grasps_successful: self.grasps_successful + o.grasps_successful,
            grasps_on_cleared: self.grasps_on_cleared + o.grasps_on_cleared,
            objects_detected: self.objects_detected + o.objects_detected,
        }
    }
}

/// Counters and the four clearing ratios. Ratios with a zero denominator
/// are 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearingMetrics {
    pub counts: ClearingCounts,
    pub r_object: f64,
    pub r_grasp: f64,
    pub r_mix: f64,
    pub r_seen: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl ClearingMetrics {
    pub fn from_counts(c: ClearingCounts) -> Self {
        Self {
            counts: c,
            r_object: ratio(c.objects_cleared, c.objects_total),
            r_grasp: ratio(c.grasps_successful, c.grasps_total),
            r_mix: ratio(c.grasps_on_cleared, c.objects_cleared),
            r_seen: ratio(c.objects_detected, c.objects_total),
        }
    }

    /// Pool counters over several runs and recompute the ratios.
    pub fn pooled(runs: &[ClearingMetrics]) -> Self {
        Self::from_counts(runs.iter().fold(ClearingCounts::default(), |acc, m| acc + m.counts))
    }
}

/// Ranked grasps for the current scene state, plus the seed points the
/// pipeline sampled (indices into the current cloud).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannedGrasps {
    pub grasps: Vec<Grasp>,
    pub seed_points: Vec<usize>,
}

pub trait GraspPolicy {
    fn plan(&mut self, scene: &Scene) -> Result<PlannedGrasps>;
}

impl<F: FnMut(&Scene) -> Result<PlannedGrasps>> GraspPolicy for F {
    fn plan(&mut self, scene: &Scene) -> Result<PlannedGrasps> {
        self(scene)
    }
}

/// Execute the top-ranked grasp until the table is empty, the policy has
/// nothing to offer, or `max_consecutive_failures` attempts fail in a row.
/// A successful grasp lifts its object out of the scene.
pub fn run_clearing_loop<P: GraspPolicy + ?Sized>(scene: &Scene, policy: &mut P, cfg: &EvalConfig) -> Result<ClearingTrace> {
    let mut state = scene.clone();
    let mut trace = ClearingTrace {
        objects: scene.annotation.object_ids(),
        attempts: Vec::new(),
        detected: BTreeSet::new(),
    };
    let mut failures = 0;
    while !state.annotation.primitives.is_empty() && failures < cfg.max_consecutive_failures {
        let plan = policy.plan(&state)?;
        for &i in &plan.seed_points {
            match state.annotation.per_point_object_id.get(i) {
                Some(&id) if id != 0 => {
                    trace.detected.insert(id);
                }
                Some(_) => {}
                None => return Err(Error::IndexOutOfRange { index: i, len: state.cloud.len() }),
            }
        }
        let Some(top) = plan.grasps.first() else { break };
        let oracle = SceneOracle::with_gripper(&state.annotation, cfg.gripper);
        let outcome = grasp_outcome(&oracle, top, cfg.cup_radius);
        let success = outcome.object.is_some() && outcome.success(cfg.exec_threshold(top.gripper()));
        trace.attempts.push(Attempt { object: outcome.object, success });
        if success {
            failures = 0;
            state = state.without_object(outcome.object.expect("checked above"))?;
        } else {
            failures += 1;
        }
    }
    Ok(trace)
}

/// Per object, the gripper that needed the fewest attempts: the minimum
/// over the traces that cleared it, or over all traces when none did.
/// Attempts that touched no object cannot be attributed and are dropped.
pub fn combine_grippers_posthoc(traces: &[ClearingTrace]) -> Result<ClearingMetrics> {
    let Some(first) = traces.first() else {
        return Err(Error::MismatchedTraces("no traces".into()));
    };
    let objects: BTreeSet<u32> = first.objects.iter().copied().collect();
    for t in &traces[1..] {
        let other: BTreeSet<u32> = t.objects.iter().copied().collect();
        if other != objects {
            return Err(Error::MismatchedTraces(format!("{objects:?} vs {other:?}")));
        }
    }
    let cleared: Vec<BTreeSet<u32>> = traces.iter().map(|t| t.cleared()).collect();
    let mut counts = ClearingCounts {
        objects_total: objects.len(),
        objects_detected: traces
            .iter()
            .flat_map(|t| t.detected.iter().copied())
            .collect::<BTreeSet<_>>()
            .len(),
        ..Default::default()
    };
    for &o in &objects {
        let winners: Vec<usize> = (0..traces.len()).filter(|&k| cleared[k].contains(&o)).collect();
        if winners.is_empty() {
            counts.grasps_total += traces.iter().map(|t| t.attempts_on(o)).min().unwrap_or(0);
        } else {
            let best = winners.iter().map(|&k| traces[k].attempts_on(o)).min().unwrap_or(0);
            counts.objects_cleared += 1;
            counts.grasps_successful += 1;
            counts.grasps_total += best;
            counts.grasps_on_cleared += best;
        }
    }
    Ok(ClearingMetrics::from_counts(counts))
}
