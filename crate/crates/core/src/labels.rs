//! Per-point graspness maps built from ground-truth grasps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::grasp::{Grasp, Gripper};
use crate::index::SpatialIndex;
use crate::scene::{GripperGeometry, GroundTruthGrasp, SceneAnnotation, SceneOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapRole {
    Label,
    Prediction,
}

/// Objectness and per-gripper graspness, one value per cloud point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspnessMaps {
    pub objectness: Vec<f64>,
    pub parallel: Vec<f64>,
    pub vacuum: Vec<f64>,
    pub role: MapRole,
}

impl GraspnessMaps {
    pub fn zeros(n: usize, role: MapRole) -> Self {
        Self {
            objectness: vec![0.0; n],
            parallel: vec![0.0; n],
            vacuum: vec![0.0; n],
            role,
        }
    }

    pub fn len(&self) -> usize {
        self.objectness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectness.is_empty()
    }

    pub fn graspness(&self, gripper: Gripper) -> &[f64] {
        match gripper {
            Gripper::Parallel => &self.parallel,
            Gripper::Vacuum => &self.vacuum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objectness.len();
        for (what, v) in [("parallel", &self.parallel), ("vacuum", &self.vacuum)] {
            if v.len() != n {
                return Err(Error::LengthMismatch { what, got: v.len(), expected: n });
            }
        }
        Ok(())
    }

    /// Maps at the given point indices, in order.
    pub fn select(&self, keep: &[usize]) -> Self {
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect();
        Self {
            objectness: pick(&self.objectness),
            parallel: pick(&self.parallel),
            vacuum: pick(&self.vacuum),
            role: self.role,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    /// Vacuum grasps with a lower seal are discarded.
    pub min_seal: f64,
    /// Friction at which parallel graspness reaches zero.
    pub mu_max: f64,
    /// Rescaled vacuum values below this are zeroed.
    pub vacuum_cutoff: f64,
    /// Scene points farther than this from every grasp of their object get
    /// no label.
    pub max_association_distance: f64,
    /// Minimum cosine between a vacuum grasp normal and the surface normal at
    /// the labelled point.
    pub vacuum_normal_cos: f64,
    pub gripper: GripperGeometry,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            min_seal: 0.004,
            mu_max: 1.0,
            vacuum_cutoff: 0.1,
            max_association_distance: 0.01,
            vacuum_normal_cos: 0.9,
            gripper: GripperGeometry::default(),
        }
    }
}

/// Parallel graspness of a required friction coefficient.
pub fn friction_to_graspness(mu: f64, mu_max: f64) -> f64 {
    if mu.is_finite() {
        (1.0 - mu / mu_max).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Label maps: collision filter, seal filter, pruning of table and
/// below-table points, per-object nearest-grasp association, then the
/// per-scene vacuum rescale and cutoff.
pub fn build_label_maps(
    cloud: &PointCloud,
    scene: &SceneAnnotation,
    grasps: &[GroundTruthGrasp],
    config: &LabelConfig,
) -> Result<GraspnessMaps> {
    scene.validate(cloud.len())?;
    if grasps.is_empty() {
        return Err(Error::InvalidConfig("no ground-truth grasps for label building".into()));
    }
    let oracle = SceneOracle::with_gripper(scene, config.gripper);

    // per (object, gripper): centre -> (value, normal); equal centres keep the best
    let mut sources: BTreeMap<(u32, Gripper), BTreeMap<[u64; 3], (f64, Vec3)>> = BTreeMap::new();
    for g in grasps {
        let (value, normal) = match &g.pose {
            Grasp::Parallel(p) => {
                if oracle.parallel_collides(p) {
                    continue;
                }
                (friction_to_graspness(g.quality_coeff, config.mu_max), Vec3::zeros())
            }
            Grasp::Vacuum(v) => {
                if oracle.vacuum_collides(v) || g.quality_coeff < config.min_seal {
                    continue;
                }
                (g.quality_coeff, v.normal.into_inner())
            }
        };
        let c = g.pose.center();
        let key = [c.x.to_bits(), c.y.to_bits(), c.z.to_bits()];
        let slot = sources
            .entry((g.object_id, g.gripper()))
            .or_default()
            .entry(key)
            .or_insert((f64::NEG_INFINITY, normal));
        if value > slot.0 {
            *slot = (value, normal);
        }
    }

    let n = cloud.len();
    let mut maps = GraspnessMaps::zeros(n, MapRole::Label);
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, (&id, p)) in scene.per_point_object_id.iter().zip(cloud.points()).enumerate() {
        if id == 0 || p.z < scene.table_height {
            continue;
        }
        maps.objectness[i] = 1.0;
        members.entry(id).or_default().push(i);
    }

    let mut vacuum_raw: Vec<(usize, f64)> = Vec::new();
    for ((id, gripper), by_centre) in &sources {
        let Some(points) = members.get(id) else { continue };
        let Some(prim) = scene.primitive(*id) else { continue };
        let centres: Vec<Point3> = by_centre
            .keys()
            .map(|k| Point3::new(f64::from_bits(k[0]), f64::from_bits(k[1]), f64::from_bits(k[2])))
            .collect();
        let values: Vec<(f64, Vec3)> = by_centre.values().copied().collect();
        let index = SpatialIndex::from_points(centres)?;
        let k = index.len().min(8);
        let max_d2 = config.max_association_distance * config.max_association_distance;
        for &i in points {
            let p = cloud.point(i);
            match gripper {
                Gripper::Parallel => {
                    let (j, d2) = index.nearest(p);
                    if d2 <= max_d2 {
                        maps.parallel[i] = values[j].0;
                    }
                }
                Gripper::Vacuum => {
                    let (_, surface_normal) = prim.closest_surface(p);
                    let hit = index.knn(p, k)?.into_iter().find(|&j| {
                        crate::geometry::dist2(&index.points()[j], p) <= max_d2
                            && values[j].1.dot(&surface_normal) >= config.vacuum_normal_cos
                    });
                    if let Some(j) = hit {
                        vacuum_raw.push((i, values[j].0));
                    }
                }
            }
        }
    }

    if !vacuum_raw.is_empty() {
        let lo = vacuum_raw.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let hi = vacuum_raw.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in vacuum_raw {
            let r = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
            maps.vacuum[i] = if r < config.vacuum_cutoff { 0.0 } else { r };
        }
    }
    Ok(maps)
}

/// Give every target point the values of its nearest source point.
pub fn project_map_to_cloud(maps: &GraspnessMaps, source: &PointCloud, target: &PointCloud) -> Result<GraspnessMaps> {
    maps.validate()?;
    if maps.len() != source.len() {
        return Err(Error::LengthMismatch {
            what: "maps",
            got: maps.len(),
            expected: source.len(),
        });
    }
    let index = SpatialIndex::build(source);
    let nearest: Vec<usize> = target.points().iter().map(|p| index.nearest(p).0).collect();
    Ok(maps.select(&nearest))
}
