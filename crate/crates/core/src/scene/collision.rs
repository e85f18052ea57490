//! Conservative sampled-volume collision tests for both end-effectors.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Vec3};
use crate::grasp::{ParallelGrasp, VacuumGrasp};

use super::Primitive;

/// Gripper dimensions in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GripperGeometry {
    pub max_width: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    /// How far the fingertips reach past the closing line.
    pub tip_extension: f64,
    pub palm_thickness: f64,
    pub cup_radius: f64,
    pub cup_length: f64,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        Self {
            max_width: 0.1,
            finger_length: 0.05,
            finger_thickness: 0.01,
            finger_height: 0.02,
            tip_extension: 0.005,
            palm_thickness: 0.01,
            cup_radius: 0.01,
            cup_length: 0.05,
        }
    }
}

/// Penetration depth below which contact counts as touching, not colliding.
const CONTACT_TOL: f64 = 1e-4;

impl GripperGeometry {
    /// Sample points filling both fingers and the palm.
    pub fn parallel_volume(&self, g: &ParallelGrasp) -> Vec<Point3> {
        let a = g.approach.into_inner();
        let b = g.closing_axis().into_inner();
        let c = a.cross(&b);
        let q = g.jaw_center();
        let mut pts = Vec::new();
        let along = (-(self.finger_length - self.tip_extension), self.tip_extension);
        for side in [-1.0, 1.0] {
            let across = (
                side * g.width / 2.0,
                side * (g.width / 2.0 + self.finger_thickness),
            );
            box_samples(&q, &a, &b, &c, along, across, self.finger_height / 2.0, &mut pts);
        }
        let back = -(self.finger_length - self.tip_extension);
        let half = g.width / 2.0 + self.finger_thickness;
        box_samples(
            &q,
            &a,
            &b,
            &c,
            (back - self.palm_thickness, back),
            (-half, half),
            self.finger_height / 2.0,
            &mut pts,
        );
        pts
    }

    /// Sample points on the cup rim and body, starting just above the
    /// contact surface.
    pub fn vacuum_volume(&self, g: &VacuumGrasp) -> Vec<Point3> {
        let n = g.normal.into_inner();
        let u = crate::geometry::reference_axis(&g.normal).into_inner();
        let w = n.cross(&u);
        let mut pts = Vec::new();
        for h in [0.002, 0.005, 0.01, 0.02, 0.03, self.cup_length] {
            pts.push(g.center + n * h);
            for k in 0..16 {
                let t = k as f64 * std::f64::consts::PI / 8.0;
                pts.push(g.center + n * h + (u * t.cos() + w * t.sin()) * self.cup_radius);
            }
        }
        pts
    }

    pub fn parallel_collides<'a>(&self, g: &ParallelGrasp, solids: impl IntoIterator<Item = &'a Primitive>) -> bool {
        collides(&self.parallel_volume(g), solids)
    }

    pub fn vacuum_collides<'a>(&self, g: &VacuumGrasp, solids: impl IntoIterator<Item = &'a Primitive>) -> bool {
        collides(&self.vacuum_volume(g), solids)
    }
}

fn collides<'a>(pts: &[Point3], solids: impl IntoIterator<Item = &'a Primitive>) -> bool {
    solids.into_iter().any(|s| {
        let reach = s.bounding_radius() + CONTACT_TOL;
        let centre = s.center();
        pts.iter()
            .any(|p| (p - centre).norm() < reach && s.signed_distance(p) < -CONTACT_TOL)
    })
}

/// Grid samples of an oriented box given as ranges along `a` and `b` and a
/// half extent along `c`, spaced at most 5 mm apart.
#[allow(clippy::too_many_arguments)]
fn box_samples(
    q: &Point3,
    a: &Vec3,
    b: &Vec3,
    c: &Vec3,
    along: (f64, f64),
    across: (f64, f64),
    half_c: f64,
    out: &mut Vec<Point3>,
) {
    let steps = |lo: f64, hi: f64| ((hi - lo).abs() / 0.005).ceil().max(1.0) as usize;
    let (na, nb, nc) = (
        steps(along.0, along.1),
        steps(across.0, across.1),
        steps(-half_c, half_c),
    );
    for i in 0..=na {
        let ta = along.0 + (along.1 - along.0) * i as f64 / na as f64;
        for j in 0..=nb {
            let tb = across.0 + (across.1 - across.0) * j as f64 / nb as f64;
            for k in 0..=nc {
                let tc = -half_c + 2.0 * half_c * k as f64 / nc as f64;
                out.push(q + a * ta + b * tb + c * tc);
            }
        }
    }
}
