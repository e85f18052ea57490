//! Approach-view grid, view selection and cylinder grouping.

use std::f64::consts::PI;

use crate::cloud::PointCloud;
use crate::geometry::{Point3, UnitVector3, Vec3};
use crate::index::SpatialIndex;

/// Approach directions for a gripper positioned anywhere on the upper
/// hemisphere around a seed: every approach has z ≤ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewGrid {
    views: Vec<UnitVector3>,
}

impl ViewGrid {
    /// Fibonacci lattice with `count` points on the hemisphere.
    pub fn new(count: usize) -> Self {
        let golden = PI * (3.0 - 5f64.sqrt());
        let views = (0..count)
            .map(|k| {
                let z = 1.0 - (k as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = k as f64 * golden;
                UnitVector3::new_normalize(-Vec3::new(r * phi.cos(), r * phi.sin(), z))
            })
            .collect();
        Self { views }
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn views(&self) -> &[UnitVector3] {
        &self.views
    }

    pub fn view(&self, i: usize) -> UnitVector3 {
        self.views[i]
    }

    /// Index of the grid view closest to `dir`, lowest index on ties.
    pub fn nearest(&self, dir: &Vec3) -> usize {
        argmax(&self.views.iter().map(|v| v.dot(dir)).collect::<Vec<_>>())
    }
}

/// Index of the largest score; the lowest index wins ties. NaN never wins.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] || scores[best].is_nan() {
            best = i;
        }
    }
    best
}

/// View with the highest score.
pub fn select_view(scores: &[f64], grid: &ViewGrid) -> Option<UnitVector3> {
    if scores.len() != grid.len() || scores.is_empty() {
        return None;
    }
    Some(grid.view(argmax(scores)))
}

/// Points inside a cylinder around the seed aligned with an approach view.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderGroup {
    pub seed_index: usize,
    pub view: UnitVector3,
    pub member_indices: Vec<usize>,
    pub radius: f64,
    pub height: f64,
}

/// Membership test shared by the indexed query and brute-force checks:
/// |(p − s)·v| ≤ height/2 and perpendicular distance ≤ radius.
pub fn in_cylinder(seed: &Point3, view: &Vec3, radius: f64, height: f64, p: &Point3) -> bool {
    let d = p - seed;
    let along = d.dot(view);
    if along.abs() > height / 2.0 {
        return false;
    }
    (d - view * along).norm_squared() <= radius * radius
}

pub fn cylinder_group(
    cloud: &PointCloud,
    index: &SpatialIndex,
    seed_index: usize,
    view: UnitVector3,
    radius: f64,
    height: f64,
) -> CylinderGroup {
    let seed = cloud.point(seed_index);
    // enclosing ball, padded against rounding in the membership test
    let reach = radius.hypot(height / 2.0) * (1.0 + 1e-9) + 1e-12;
    let member_indices = index
        .radius_query(seed, reach)
        .into_iter()
        .filter(|&i| in_cylinder(seed, &view, radius, height, cloud.point(i)))
        .collect();
    CylinderGroup {
        seed_index,
        view,
        member_indices,
        radius,
        height,
    }
}

/// Linear-scan reference for [`cylinder_group`].
pub fn brute_force_cylinder(cloud: &PointCloud, seed_index: usize, view: &Vec3, radius: f64, height: f64) -> Vec<usize> {
    let seed = cloud.point(seed_index);
    (0..cloud.len())
        .filter(|&i| in_cylinder(seed, view, radius, height, cloud.point(i)))
        .collect()
}
