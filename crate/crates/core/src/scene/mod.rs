//! Synthetic tabletop scenes with analytic ground truth.

mod collision;
mod ground_truth;
mod io;
mod oracle;
mod primitive;
mod synth;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::grasp::{Grasp, Gripper};

pub use collision::GripperGeometry;
pub use ground_truth::{generate_ground_truth, GroundTruthConfig};
pub(crate) use ground_truth::fitted_parallel;
pub use io::{load_scene, save_scene, SceneFile, SCENE_SCHEMA_VERSION};
pub use oracle::{SceneOracle, DEFAULT_CUP_RADIUS, FLAT_PLANARITY, SEAL_SUPPORT_DISTANCE};
pub use primitive::{fibonacci_sphere, LineHit, Primitive, PrimitiveKind, Shape, SurfaceSample};
pub use synth::{generate_scene, SizeRanges, SynthConfig, NOVEL_KINDS, SEEN_KINDS};

/// Object and table geometry plus the per-point object labels of a cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneAnnotation {
    pub primitives: Vec<Primitive>,
    /// Plane slab with object id 0 whose top face sits at `table_height`.
    pub table: Primitive,
    pub table_height: f64,
    pub camera_viewpoint: Point3,
    /// 0 marks table/background.
    pub per_point_object_id: Vec<u32>,
}

impl SceneAnnotation {
    pub fn validate(&self, cloud_len: usize) -> Result<()> {
        if self.per_point_object_id.len() != cloud_len {
            return Err(Error::LengthMismatch {
                what: "per_point_object_id",
                got: self.per_point_object_id.len(),
                expected: cloud_len,
            });
        }
        if self.table.object_id != 0 {
            return Err(Error::schema("table.object_id", "table must carry object id 0"));
        }
        for p in &self.primitives {
            if p.object_id == 0 {
                return Err(Error::schema("primitives.object_id", "object ids start at 1"));
            }
            p.validate()?;
        }
        if let Some(id) = self
            .per_point_object_id
            .iter()
            .find(|&&id| id != 0 && self.primitive(id).is_none())
        {
            return Err(Error::schema(
                "per_point_object_id",
                format!("id {id} has no primitive"),
            ));
        }
        Ok(())
    }

    pub fn primitive(&self, object_id: u32) -> Option<&Primitive> {
        self.primitives.iter().find(|p| p.object_id == object_id)
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.primitives.iter().map(|p| p.object_id).collect()
    }

    /// Objects and table, in that order.
    pub fn solids(&self) -> impl Iterator<Item = &Primitive> {
        self.primitives.iter().chain(std::iter::once(&self.table))
    }

    /// Copy without the given object's primitive; point ids are left to the
    /// caller.
    pub fn without_object(&self, object_id: u32) -> SceneAnnotation {
        let mut out = self.clone();
        out.primitives.retain(|p| p.object_id != object_id);
        out
    }
}

/// Grasp with its oracle coefficient: required friction for parallel
/// grasps (infinite when no closure exists), seal for vacuum grasps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthGrasp {
    pub object_id: u32,
    pub pose: Grasp,
    #[serde(with = "inf_as_null")]
    pub quality_coeff: f64,
}

impl GroundTruthGrasp {
    pub fn gripper(&self) -> Gripper {
        self.pose.gripper()
    }
}

/// A generated scene: cloud, annotation and ground-truth grasps.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub annotation: SceneAnnotation,
    pub ground_truth: Vec<GroundTruthGrasp>,
}

impl Scene {
    /// The scene after an object is lifted away: its primitive, points and
    /// ground-truth grasps are removed.
    pub fn without_object(&self, object_id: u32) -> Result<Scene> {
        let keep: Vec<usize> = (0..self.cloud.len())
            .filter(|&i| self.annotation.per_point_object_id[i] != object_id)
            .collect();
        let mut annotation = self.annotation.without_object(object_id);
        annotation.per_point_object_id = keep.iter().map(|&i| self.annotation.per_point_object_id[i]).collect();
        Ok(Scene {
            cloud: self.cloud.select(&keep)?,
            annotation,
            ground_truth: self
                .ground_truth
                .iter()
                .filter(|g| g.object_id != object_id)
                .copied()
                .collect(),
        })
    }
}

pub(crate) mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let v = Option::<f64>::deserialize(d)?;
        match v {
            Some(x) if x < 0.0 => Err(serde::de::Error::custom("quality_coeff must be >= 0")),
            Some(x) => Ok(x),
            None => Ok(f64::INFINITY),
        }
    }
}
