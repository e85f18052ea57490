//! On-disk schemas written and read by the subcommands.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use multigrasp_core::{Grasp, GraspnessMaps, Gripper};

pub const LABELS_SCHEMA_VERSION: u32 = 1;
pub const GRASPS_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

pub const STATUS_OK: &str = "ok";
pub const STATUS_EMPTY: &str = "no graspable region";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsFile {
    pub schema_version: u32,
    pub scene: String,
    pub maps: GraspnessMaps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Fallback,
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspsFile {
    pub schema_version: u32,
    pub scene: String,
    pub gripper: Gripper,
    pub head: HeadKind,
    pub status: String,
    pub seeds: usize,
    pub dropped: usize,
    /// Ranked, best first.
    pub grasps: Vec<Grasp>,
}

/// Scene stems in `dir`, sorted: every `<name>.json` whose name has no
/// further dot and which has a `<name>.ply` next to it.
pub fn scene_stems(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("json") || stem.contains('.') {
            continue;
        }
        if path.with_extension("ply").is_file() {
            out.push(path.with_extension(""));
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no scenes found in {}", dir.display());
    }
    Ok(out)
}

pub fn stem_name(stem: &Path) -> String {
    stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn labels_path(dir: &Path, scene: &str) -> PathBuf {
    dir.join(format!("{scene}.labels.json"))
}

pub fn grasps_path(dir: &Path, scene: &str, gripper: Gripper) -> PathBuf {
    dir.join(format!("{scene}.{gripper}.json"))
}

pub fn grasps_ply_path(dir: &Path, scene: &str, gripper: Gripper) -> PathBuf {
    dir.join(format!("{scene}.{gripper}.ply"))
}

/// Compact JSON plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_grasps(path: &Path) -> anyhow::Result<GraspsFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: GraspsFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.schema_version != GRASPS_SCHEMA_VERSION {
        bail!(
            "{}: schema_version {} is not supported (expected {GRASPS_SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        );
    }
    Ok(file)
}

pub fn read_labels(path: &Path) -> anyhow::Result<LabelsFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: LabelsFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.schema_version != LABELS_SCHEMA_VERSION {
        bail!(
            "{}: schema_version {} is not supported (expected {LABELS_SCHEMA_VERSION})",
            path.display(),
            file.schema_version
        );
    }
    Ok(file)
}
