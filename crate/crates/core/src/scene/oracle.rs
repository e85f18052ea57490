//! Analytic grasp-quality oracles over a scene annotation.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{dist2, Point3, Vec3};
use crate::grasp::{ParallelGrasp, VacuumGrasp};
use crate::index::SpatialIndex;

use super::{GripperGeometry, Primitive, SceneAnnotation, SurfaceSample};

pub const DEFAULT_CUP_RADIUS: f64 = 0.01;
/// A suction centre farther than this from every object surface cannot seal.
pub const SEAL_SUPPORT_DISTANCE: f64 = 0.002;
/// Planarity at or above which a surface point counts as a flat region.
pub const FLAT_PLANARITY: f64 = 0.99;

/// Surface sample spacing used for seal integration.
const SEAL_SAMPLE_SPACING: f64 = 0.001;

struct ObjectSamples {
    samples: Vec<SurfaceSample>,
    index: SpatialIndex,
}

/// Oracle queries over one scene. Dense surface samples for the seal oracle
/// are built lazily per object and shared across threads.
pub struct SceneOracle<'a> {
    scene: &'a SceneAnnotation,
    gripper: GripperGeometry,
    samples: Vec<OnceLock<ObjectSamples>>,
}

/// Result of intersecting a jaw line with the scene objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct JawContact {
    pub object_id: u32,
    pub t_in: f64,
    pub t_out: f64,
    pub mu: f64,
}

impl<'a> SceneOracle<'a> {
    pub fn new(scene: &'a SceneAnnotation) -> Self {
        Self::with_gripper(scene, GripperGeometry::default())
    }

    pub fn with_gripper(scene: &'a SceneAnnotation, gripper: GripperGeometry) -> Self {
        Self {
            scene,
            gripper,
            samples: (0..scene.primitives.len()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn scene(&self) -> &SceneAnnotation {
        self.scene
    }

    pub fn gripper(&self) -> &GripperGeometry {
        &self.gripper
    }

    /// Minimum friction coefficient at which the two jaw contacts give
    /// antipodal force closure. Infinite when the jaws close on more than one
    /// object, start inside an object, or meet a surface edge-on.
    pub fn parallel_quality(&self, grasp: &ParallelGrasp) -> Result<f64> {
        if grasp.width > self.gripper.max_width + 1e-12 {
            return Err(Error::WidthExceeded {
                width: grasp.width,
                max: self.gripper.max_width,
            });
        }
        let c = self.jaw_contact(&grasp.jaw_center(), &grasp.closing_axis().into_inner(), grasp.width)?;
        Ok(c.mu)
    }

    pub(crate) fn jaw_contact(&self, q: &Point3, b: &Vec3, width: f64) -> Result<JawContact> {
        let half = width / 2.0;
        let mut first: Option<(f64, Vec3, u32)> = None;
        let mut last: Option<(f64, Vec3, u32)> = None;
        for p in &self.scene.primitives {
            if line_point_distance(q, b, &p.center()) > p.bounding_radius() {
                continue;
            }
            let Some(hit) = p.intersect_line(q, b) else { continue };
            if hit.t_out < -half || hit.t_in > half {
                continue;
            }
            if first.is_none_or(|f| hit.t_in < f.0) {
                first = Some((hit.t_in, hit.normal_in, p.object_id));
            }
            if last.is_none_or(|l| hit.t_out > l.0) {
                last = Some((hit.t_out, hit.normal_out, p.object_id));
            }
        }
        let (Some((t0, n0, id0)), Some((t1, n1, id1))) = (first, last) else {
            return Err(Error::NoContact);
        };
        let mu = if t0 < -half || t1 > half || id0 != id1 {
            f64::INFINITY
        } else {
            let cos1 = -n0.dot(b);
            let cos2 = n1.dot(b);
            if cos1 <= 1e-12 || cos2 <= 1e-12 {
                f64::INFINITY
            } else {
                let tan = |c: f64| (1.0 - c * c).max(0.0).sqrt() / c;
                tan(cos1.min(1.0)).max(tan(cos2.min(1.0)))
            }
        };
        Ok(JawContact {
            object_id: id0,
            t_in: t0,
            t_out: t1,
            mu,
        })
    }

    /// Suction seal in [0, 1]: one minus the area-weighted RMS distance of
    /// the object surface inside the cup ball from the tangent plane at the
    /// centre, over the cup radius.
    pub fn seal_quality(&self, grasp: &VacuumGrasp, cup_radius: f64) -> f64 {
        match self.support(&grasp.center) {
            Some((k, _)) if self.scene.primitives[k].porous => 0.0,
            Some((k, _)) => self.planarity_on(k, &grasp.center, cup_radius),
            None => 0.0,
        }
    }

    /// Same statistic as [`SceneOracle::seal_quality`] but ignoring porosity;
    /// 0 when `p` is not on an object.
    pub fn planarity(&self, p: &Point3, radius: f64) -> f64 {
        match self.support(p) {
            Some((k, _)) => self.planarity_on(k, p, radius),
            None => 0.0,
        }
    }

    pub fn is_flat(&self, p: &Point3, radius: f64) -> bool {
        self.planarity(p, radius) >= FLAT_PLANARITY
    }

    /// Object whose surface is nearest to `p`, if within the support distance.
    pub fn support(&self, p: &Point3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, prim) in self.scene.primitives.iter().enumerate() {
            let d = prim.signed_distance(p).abs();
            if d <= SEAL_SUPPORT_DISTANCE && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best
    }

    fn planarity_on(&self, k: usize, p: &Point3, radius: f64) -> f64 {
        let prim = &self.scene.primitives[k];
        let (p0, n0) = prim.closest_surface(p);
        let data = self.object_samples(k);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in data.index.radius_query(&p0, radius) {
            let s = &data.samples[i];
            let dev = (s.point - p0).dot(&n0);
            num += s.area * dev * dev;
            den += s.area;
        }
        if den == 0.0 {
            return 0.0;
        }
        (1.0 - (num / den).sqrt() / radius).max(0.0)
    }

    fn object_samples(&self, k: usize) -> &ObjectSamples {
        self.samples[k].get_or_init(|| {
            let samples = self.scene.primitives[k].stratified_surface(SEAL_SAMPLE_SPACING);
            let index = SpatialIndex::from_points(samples.iter().map(|s| s.point).collect())
                .expect("primitive surfaces are non-empty and finite");
            ObjectSamples { samples, index }
        })
    }

    /// Every solid (objects and table) for collision queries.
    pub fn solids(&self) -> impl Iterator<Item = &Primitive> {
        self.scene.solids()
    }

    pub fn parallel_collides(&self, g: &ParallelGrasp) -> bool {
        self.gripper.parallel_collides(g, self.scene.solids())
    }

    pub fn vacuum_collides(&self, g: &VacuumGrasp) -> bool {
        self.gripper.vacuum_collides(g, self.scene.solids())
    }

    /// Object whose surface is closest to `p` (no distance limit).
    pub fn nearest_object(&self, p: &Point3) -> Option<u32> {
        self.scene
            .primitives
            .iter()
            .map(|prim| (prim.object_id, prim.signed_distance(p).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(id, _)| id)
    }
}

fn line_point_distance(q: &Point3, b: &Vec3, c: &Point3) -> f64 {
    let d = c - q;
    let along = d.dot(b);
    (dist2(c, q) - along * along).max(0.0).sqrt()
}
