//! Scene files: a binary PLY cloud plus a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::ply::{read_ply, write_ply, PlyData, PlyFormat};

use super::{GroundTruthGrasp, Scene, SceneAnnotation};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema_version: u32,
    pub seed: u64,
    pub annotation: SceneAnnotation,
    pub ground_truth: Vec<GroundTruthGrasp>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("ply"), stem.with_extension("json"))
}

/// Write `<stem>.ply` and `<stem>.json`.
pub fn save_scene(stem: &Path, scene: &Scene, seed: u64) -> Result<()> {
    let (ply_path, json_path) = paths(stem);
    let positions = scene
        .cloud
        .points()
        .iter()
        .map(|p| [p.x as f32, p.y as f32, p.z as f32])
        .collect();
    let ids = scene.annotation.per_point_object_id.iter().map(|&i| i as f32).collect();
    let data = PlyData::new(positions).with_scalar("object_id", ids);
    let mut out = BufWriter::new(File::create(&ply_path)?);
    write_ply(&mut out, &data, PlyFormat::BinaryLittleEndian)?;
    out.flush()?;

    let file = SceneFile {
        schema_version: SCENE_SCHEMA_VERSION,
        seed,
        annotation: scene.annotation.clone(),
        ground_truth: scene.ground_truth.clone(),
    };
    let mut out = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer(&mut out, &file)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Read a scene written by [`save_scene`]; `stem` may carry either extension.
pub fn load_scene(stem: &Path) -> Result<(Scene, u64)> {
    let (ply_path, json_path) = paths(stem);
    let file: SceneFile = serde_json::from_reader(BufReader::new(File::open(&json_path)?))?;
    if file.schema_version != SCENE_SCHEMA_VERSION {
        return Err(Error::schema(
            "schema_version",
            format!("expected {SCENE_SCHEMA_VERSION}, found {}", file.schema_version),
        ));
    }
    let data = read_ply(BufReader::new(File::open(&ply_path)?))?;
    let points = data
        .positions
        .iter()
        .map(|p| Point3::new(p[0] as f64, p[1] as f64, p[2] as f64))
        .collect();
    let cloud = PointCloud::new(points, file.annotation.camera_viewpoint)?;
    file.annotation.validate(cloud.len())?;
    Ok((
        Scene {
            cloud,
            annotation: file.annotation,
            ground_truth: file.ground_truth,
        },
        file.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_ground_truth, generate_scene, GroundTruthConfig, SynthConfig};

    #[test]
    fn scene_round_trips_exactly() {
        let (cloud, annotation) = generate_scene(5, 2, &SynthConfig::default()).unwrap();
        let ground_truth = generate_ground_truth(&annotation, &GroundTruthConfig::default()).unwrap();
        let scene = Scene { cloud, annotation, ground_truth };
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("scene_0000");
        save_scene(&stem, &scene, 5).unwrap();
        let (back, seed) = load_scene(&stem).unwrap();
        assert_eq!(seed, 5);
        assert!(back.cloud == scene.cloud, "cloud differs");
        assert!(back.annotation.primitives == scene.annotation.primitives, "primitives differ");
        assert!(back.annotation == scene.annotation, "annotation differs");
        assert!(back.ground_truth == scene.ground_truth, "ground truth differs");
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        let (cloud, annotation) = generate_scene(5, 1, &SynthConfig::default()).unwrap();
        let scene = Scene { cloud, annotation, ground_truth: vec![] };
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("s");
        save_scene(&stem, &scene, 1).unwrap();
        let json = stem.with_extension("json");
        let text = std::fs::read_to_string(&json).unwrap();
        std::fs::write(&json, text.replacen("\"schema_version\":1", "\"schema_version\":9", 1)).unwrap();
        let err = load_scene(&stem).unwrap_err().to_string();
        assert!(err.contains("schema_version"), "{err}");
        std::fs::write(&json, text.replacen("\"seed\"", "\"extra\":0,\"seed\"", 1)).unwrap();
        assert!(load_scene(&stem).is_err());
    }
}
