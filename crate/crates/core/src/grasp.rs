//! Grasp pose types for both end-effectors and their JSON records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closing_axis, unit, Point3, UnitVector3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gripper {
    Parallel,
    Vacuum,
}

impl Gripper {
    pub const BOTH: [Gripper; 2] = [Gripper::Parallel, Gripper::Vacuum];

    pub fn name(self) -> &'static str {
        match self {
            Gripper::Parallel => "parallel",
            Gripper::Vacuum => "vacuum",
        }
    }
}

impl std::fmt::Display for Gripper {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Two-finger grasp. The jaws close along [`ParallelGrasp::closing_axis`]
/// on a line `depth` metres past `center` along `approach`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParallelRecord", into = "ParallelRecord")]
pub struct ParallelGrasp {
    pub center: Point3,
    pub approach: UnitVector3,
    /// In-plane rotation in degrees, [0, 180).
    pub angle_deg: f64,
    pub width: f64,
    pub depth: f64,
    pub score: f64,
    /// Cloud index of the seed that produced the grasp, if any.
    pub seed: Option<usize>,
}

impl ParallelGrasp {
    pub fn closing_axis(&self) -> UnitVector3 {
        closing_axis(&self.approach, self.angle_deg)
    }

    /// Point on the closing line midway between the jaws.
    pub fn jaw_center(&self) -> Point3 {
        self.center + self.approach.into_inner() * self.depth
    }
}

/// Suction grasp: cup centre, surface normal (facing the sensor) and score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VacuumRecord", into = "VacuumRecord")]
pub struct VacuumGrasp {
    pub center: Point3,
    pub normal: UnitVector3,
    pub score: f64,
    pub seed: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gripper", rename_all = "lowercase")]
pub enum Grasp {
    Parallel(ParallelGrasp),
    Vacuum(VacuumGrasp),
}

impl Grasp {
    pub fn gripper(&self) -> Gripper {
        match self {
            Grasp::Parallel(_) => Gripper::Parallel,
            Grasp::Vacuum(_) => Gripper::Vacuum,
        }
    }

    pub fn score(&self) -> f64 {
        match self {
            Grasp::Parallel(g) => g.score,
            Grasp::Vacuum(g) => g.score,
        }
    }

    pub fn center(&self) -> Point3 {
        match self {
            Grasp::Parallel(g) => g.center,
            Grasp::Vacuum(g) => g.center,
        }
    }

    pub fn seed(&self) -> Option<usize> {
        match self {
            Grasp::Parallel(g) => g.seed,
            Grasp::Vacuum(g) => g.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParallelRecord {
    center: [f64; 3],
    approach: [f64; 3],
    angle_deg: f64,
    width_m: f64,
    depth_m: f64,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VacuumRecord {
    center: [f64; 3],
    normal: [f64; 3],
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<usize>,
}

fn direction(field: &str, v: [f64; 3]) -> Result<UnitVector3> {
    let raw = Vec3::from(v);
    let d = unit(raw).ok_or_else(|| Error::schema(field, "zero or non-finite direction"))?;
    let norm = raw.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::schema(field, "direction is not unit length"));
    }
    // keep stored unit vectors bit-exact across a save/load cycle
    if (norm - 1.0).abs() <= 1e-12 {
        return Ok(UnitVector3::new_unchecked(raw));
    }
    Ok(d)
}

fn finite_point(field: &str, v: [f64; 3]) -> Result<Point3> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(Point3::from(v))
    } else {
        Err(Error::schema(field, "non-finite coordinate"))
    }
}

impl TryFrom<ParallelRecord> for ParallelGrasp {
    type Error = Error;
    fn try_from(r: ParallelRecord) -> Result<Self> {
        if !(r.width_m.is_finite() && r.width_m > 0.0) {
            return Err(Error::schema("width_m", "must be positive"));
        }
        if !(0.0..180.0).contains(&r.angle_deg) {
            return Err(Error::schema("angle_deg", "must lie in [0, 180)"));
        }
        if !r.depth_m.is_finite() || !r.score.is_finite() {
            return Err(Error::schema("depth_m/score", "non-finite value"));
        }
        Ok(ParallelGrasp {
            center: finite_point("center", r.center)?,
            approach: direction("approach", r.approach)?,
            angle_deg: r.angle_deg,
            width: r.width_m,
            depth: r.depth_m,
            score: r.score,
            seed: r.seed,
        })
    }
}

impl From<ParallelGrasp> for ParallelRecord {
    fn from(g: ParallelGrasp) -> Self {
        ParallelRecord {
            center: g.center.coords.into(),
            approach: g.approach.into_inner().into(),
            angle_deg: g.angle_deg,
            width_m: g.width,
            depth_m: g.depth,
            score: g.score,
            seed: g.seed,
        }
    }
}

impl TryFrom<VacuumRecord> for VacuumGrasp {
    type Error = Error;
    fn try_from(r: VacuumRecord) -> Result<Self> {
        if !r.score.is_finite() {
            return Err(Error::schema("score", "non-finite value"));
        }
        Ok(VacuumGrasp {
            center: finite_point("center", r.center)?,
            normal: direction("normal", r.normal)?,
            score: r.score,
            seed: r.seed,
        })
    }
}

impl From<VacuumGrasp> for VacuumRecord {
    fn from(g: VacuumGrasp) -> Self {
        VacuumRecord {
            center: g.center.coords.into(),
            normal: g.normal.into_inner().into(),
            score: g.score,
            seed: g.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grasp_json_schema() {
        let g = Grasp::Parallel(ParallelGrasp {
            center: Point3::new(0.0, 0.1, 0.2),
            approach: -Vec3::z_axis(),
            angle_deg: 45.0,
            width: 0.05,
            depth: 0.02,
            score: 0.9,
            seed: None,
        });
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"gripper":"parallel","center":[0.0,0.1,0.2],"approach":[-0.0,-0.0,-1.0],"angle_deg":45.0,"width_m":0.05,"depth_m":0.02,"score":0.9}"#
        );
        let back: Grasp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn malformed_records_name_the_field() {
        let bad = r#"{"gripper":"vacuum","center":[0,0,0],"normal":[0,0,2],"score":0.5}"#;
        let err = serde_json::from_str::<Grasp>(bad).unwrap_err().to_string();
        assert!(err.contains("normal"), "{err}");
        let bad = r#"{"gripper":"parallel","center":[0,0,0],"approach":[0,0,-1],"angle_deg":190,"width_m":0.05,"depth_m":0.01,"score":1}"#;
        let err = serde_json::from_str::<Grasp>(bad).unwrap_err().to_string();
        assert!(err.contains("angle_deg"), "{err}");
    }
}
