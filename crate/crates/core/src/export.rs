//! Colorized PLY export of graspness maps.

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::labels::GraspnessMaps;
use crate::ply::PlyData;

/// Ramp anchors at t = 0, 0.25, 0.5, 0.75, 1.
pub const VIRIDIS_ANCHORS: [[u8; 3]; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

/// Piecewise-linear viridis-like ramp; inputs are clamped to [0, 1] and
/// NaN maps to the low end.
pub fn viridis(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let x = t * 4.0;
    let k = (x.floor() as usize).min(3);
    let f = x - k as f64;
    let (a, b) = (VIRIDIS_ANCHORS[k], VIRIDIS_ANCHORS[k + 1]);
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (a[c] as f64 + (b[c] as f64 - a[c] as f64) * f).round() as u8;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorChannel {
    Objectness,
    Parallel,
    Vacuum,
}

impl std::str::FromStr for ColorChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objectness" => Ok(Self::Objectness),
            "parallel" => Ok(Self::Parallel),
            "vacuum" => Ok(Self::Vacuum),
            other => Err(Error::InvalidConfig(format!("unknown channel {other:?}"))),
        }
    }
}

/// Vertices colored by one channel, with all three channels attached as
/// float properties.
pub fn colorized_ply(cloud: &PointCloud, maps: &GraspnessMaps, channel: ColorChannel) -> Result<PlyData> {
    maps.validate()?;
    if maps.len() != cloud.len() {
        return Err(Error::LengthMismatch { what: "maps", got: maps.len(), expected: cloud.len() });
    }
    let values = match channel {
        ColorChannel::Objectness => &maps.objectness,
        ColorChannel::Parallel => &maps.parallel,
        ColorChannel::Vacuum => &maps.vacuum,
    };
    let f32s = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
    let mut ply = PlyData::new(cloud.points().iter().map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect())
        .with_scalar("objectness", f32s(&maps.objectness))
        .with_scalar("graspness_parallel", f32s(&maps.parallel))
        .with_scalar("graspness_vacuum", f32s(&maps.vacuum));
    ply.colors = Some(values.iter().map(|&v| viridis(v)).collect());
    Ok(ply)
}
