//! Dense analytic ground-truth grasps on every object surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closing_axis, unit, Point3, UnitVector3};
use crate::grasp::{Grasp, ParallelGrasp, VacuumGrasp};

use super::{fibonacci_sphere, GroundTruthGrasp, SceneAnnotation, SceneOracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundTruthConfig {
    /// Spacing of the surface points that receive grasps.
    pub spacing: f64,
    /// Directions on the full sphere; only those within 60° of the inward
    /// normal are tried.
    pub view_count: usize,
    pub angle_bins: usize,
    pub depth_bins: Vec<f64>,
    pub grasps_per_point: usize,
    /// Added to the fitted jaw opening.
    pub width_margin: f64,
    pub cup_radius: f64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            spacing: 0.006,
            view_count: 64,
            angle_bins: 12,
            depth_bins: vec![0.01, 0.02, 0.03, 0.04],
            grasps_per_point: 3,
            width_margin: 0.01,
            cup_radius: super::DEFAULT_CUP_RADIUS,
        }
    }
}

/// Minimum cosine between a ground-truth approach and the inward normal.
const MIN_APPROACH_COS: f64 = 0.5;

impl GroundTruthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || self.view_count == 0 || self.angle_bins == 0 || self.depth_bins.is_empty() {
            return Err(Error::InvalidConfig("ground truth grid must be non-empty".into()));
        }
        if !(self.cup_radius > 0.0) {
            return Err(Error::InvalidConfig("cup_radius must be positive".into()));
        }
        Ok(())
    }
}

/// Parallel grasp centred at `center` with its opening fitted to the object
/// interval on the jaw line, plus the required friction. `None` when the
/// object is wider than the gripper or the jaws would close on another
/// object first.
pub(crate) fn fitted_parallel(
    oracle: &SceneOracle,
    object_id: u32,
    center: &Point3,
    approach: UnitVector3,
    angle_deg: f64,
    depth: f64,
    margin: f64,
) -> Option<(ParallelGrasp, f64)> {
    let max = oracle.gripper().max_width;
    let b = closing_axis(&approach, angle_deg).into_inner();
    let q = center + approach.into_inner() * depth;
    let c = oracle.jaw_contact(&q, &b, max).ok()?;
    if !c.mu.is_finite() || c.object_id != object_id {
        return None;
    }
    let width = 2.0 * c.t_in.abs().max(c.t_out.abs()) + margin;
    if width > max {
        return None;
    }
    let fitted = oracle.jaw_contact(&q, &b, width).ok()?;
    if !fitted.mu.is_finite() || fitted.object_id != object_id {
        return None;
    }
    let grasp = ParallelGrasp {
        center: *center,
        approach,
        angle_deg,
        width,
        depth,
        score: (1.0 - fitted.mu).clamp(0.0, 1.0),
        seed: None,
    };
    Some((grasp, fitted.mu))
}

/// Ground truth for every visible-or-not object surface point on a
/// stratified grid: the best collision-free parallel grasps and one vacuum
/// grasp along the outward normal.
pub fn generate_ground_truth(scene: &SceneAnnotation, config: &GroundTruthConfig) -> Result<Vec<GroundTruthGrasp>> {
    config.validate()?;
    let oracle = SceneOracle::new(scene);
    let views = fibonacci_sphere(config.view_count);
    let mut out = Vec::new();
    for prim in &scene.primitives {
        for s in prim.stratified_surface(config.spacing) {
            let probe = s.point + s.normal * 1e-4;
            if scene.solids().any(|o| o.object_id != prim.object_id && o.contains(&probe)) {
                continue;
            }
            let normal = unit(s.normal).expect("surface normals are unit");

            let mut cands: Vec<(f64, f64, ParallelGrasp)> = Vec::new();
            for v in &views {
                let cos = -v.dot(&s.normal);
                if cos < MIN_APPROACH_COS {
                    continue;
                }
                let approach = UnitVector3::new_unchecked(*v);
                for k in 0..config.angle_bins {
                    let angle = 180.0 * k as f64 / config.angle_bins as f64;
                    for &d in &config.depth_bins {
                        if let Some((g, mu)) =
                            fitted_parallel(&oracle, prim.object_id, &s.point, approach, angle, d, config.width_margin)
                        {
                            cands.push((mu, cos, g));
                        }
                    }
                }
            }
            // stable: ties keep view, angle, depth enumeration order
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
            let mut kept = 0;
            for (mu, _, g) in cands {
                if kept == config.grasps_per_point {
                    break;
                }
                if oracle.parallel_collides(&g) {
                    continue;
                }
                out.push(GroundTruthGrasp {
                    object_id: prim.object_id,
                    pose: Grasp::Parallel(g),
                    quality_coeff: mu,
                });
                kept += 1;
            }

            let vac = VacuumGrasp {
                center: s.point,
                normal,
                score: 0.0,
                seed: None,
            };
            let seal = oracle.seal_quality(&vac, config.cup_radius);
            out.push(GroundTruthGrasp {
                object_id: prim.object_id,
                pose: Grasp::Vacuum(VacuumGrasp { score: seal, ..vac }),
                quality_coeff: seal,
            });
        }
    }
    Ok(out)
}
