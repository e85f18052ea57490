//! Random tabletop layouts and their single-view point clouds.

use std::f64::consts::FRAC_PI_2;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Isometry3, Point3, Vec3};

use super::{Primitive, PrimitiveKind, SceneAnnotation, Shape};

/// Size ranges in metres, sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizeRanges {
    pub box_side: [f64; 2],
    pub sphere_radius: [f64; 2],
    pub cylinder_radius: [f64; 2],
    pub cylinder_height: [f64; 2],
    pub slab_side: [f64; 2],
    pub slab_thickness: [f64; 2],
}

impl Default for SizeRanges {
    fn default() -> Self {
        Self {
            box_side: [0.03, 0.08],
            sphere_radius: [0.015, 0.04],
            cylinder_radius: [0.015, 0.035],
            cylinder_height: [0.04, 0.12],
            slab_side: [0.10, 0.14],
            slab_thickness: [0.008, 0.015],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Half side of the square table top.
    pub table_half_extent: f64,
    pub table_thickness: f64,
    pub table_height: f64,
    pub camera_viewpoint: [f64; 3],
    /// Surface samples per square metre before hidden-point removal.
    pub density: f64,
    /// Kinds drawn uniformly per object.
    pub kinds: Vec<PrimitiveKind>,
    /// When non-empty, object `i` gets `kind_sequence[i % len]` instead.
    pub kind_sequence: Vec<PrimitiveKind>,
    pub sizes: SizeRanges,
    /// Minimum gap between object footprint circles.
    pub placement_gap: f64,
    pub max_retries: usize,
    pub porous_probability: f64,
    pub friction_range: [f64; 2],
    pub lying_cylinder_probability: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            table_half_extent: 0.25,
            table_thickness: 0.02,
            table_height: 0.0,
            camera_viewpoint: [0.0, -0.35, 0.6],
            density: 30_000.0,
            kinds: SEEN_KINDS.to_vec(),
            kind_sequence: Vec::new(),
            sizes: SizeRanges::default(),
            placement_gap: 0.01,
            max_retries: 500,
            porous_probability: 0.0,
            friction_range: [0.3, 1.0],
            lying_cylinder_probability: 0.5,
        }
    }
}

/// Kinds used for training scenes; cylinders are held out as novel shapes.
pub const SEEN_KINDS: [PrimitiveKind; 3] = [PrimitiveKind::Box, PrimitiveKind::Sphere, PrimitiveKind::PlaneSlab];
pub const NOVEL_KINDS: [PrimitiveKind; 1] = [PrimitiveKind::Cylinder];

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.kinds.is_empty() && self.kind_sequence.is_empty() {
            return bad("synth.kinds must not be empty");
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad("synth.density must be positive");
        }
        if !(self.table_half_extent > 0.0 && self.table_thickness > 0.0) {
            return bad("synth table dimensions must be positive");
        }
        if !(0.0..=1.0).contains(&self.porous_probability) {
            return bad("synth.porous_probability must lie in [0, 1]");
        }
        let [lo, hi] = self.friction_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.2) {
            return bad("synth.friction_range must lie in (0, 1.2]");
        }
        let s = &self.sizes;
        for r in [s.box_side, s.sphere_radius, s.cylinder_radius, s.cylinder_height, s.slab_side, s.slab_thickness] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return bad("synth.sizes ranges must be positive and ordered");
            }
        }
        Ok(())
    }

    pub fn viewpoint(&self) -> Point3 {
        Point3::from(self.camera_viewpoint)
    }
}

/// Generate a scene: objects resting on the table without overlap and the
/// points of every surface facing the camera.
pub fn generate_scene(seed: u64, n_objects: usize, config: &SynthConfig) -> Result<(PointCloud, SceneAnnotation)> {
    if n_objects == 0 {
        return Err(Error::InvalidConfig("n_objects must be at least 1".into()));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = Primitive::new(
        Shape::PlaneSlab {
            half_extents: [config.table_half_extent, config.table_half_extent, config.table_thickness / 2.0],
        },
        Isometry3::translation(0.0, 0.0, config.table_height - config.table_thickness / 2.0),
        0,
    )?;

    let mut primitives: Vec<Primitive> = Vec::with_capacity(n_objects);
    for i in 0..n_objects {
        let kind = if config.kind_sequence.is_empty() {
            *config.kinds.choose(&mut rng).expect("validated non-empty")
        } else {
            config.kind_sequence[i % config.kind_sequence.len()]
        };
        primitives.push(random_object(&mut rng, kind, i as u32 + 1, config)?);
    }
    // largest footprints first; ids keep generation order
    let mut order: Vec<usize> = (0..n_objects).collect();
    order.sort_by(|&a, &b| primitives[b].footprint_radius().total_cmp(&primitives[a].footprint_radius()));
    let mut placed: Vec<(f64, f64, f64)> = Vec::with_capacity(n_objects);
    for i in order {
        let r = primitives[i].footprint_radius();
        let limit = config.table_half_extent - r;
        if limit <= 0.0 {
            return Err(Error::PlacementFailed { object: i + 1, retries: 0 });
        }
        let mut spot = None;
        for _ in 0..config.max_retries {
            let x = rng.random_range(-limit..=limit);
            let y = rng.random_range(-limit..=limit);
            if placed
                .iter()
                .all(|&(ox, oy, or)| (ox - x).hypot(oy - y) >= or + r + config.placement_gap)
            {
                spot = Some((x, y));
                break;
            }
        }
        let Some((x, y)) = spot else {
            return Err(Error::PlacementFailed { object: i + 1, retries: config.max_retries });
        };
        primitives[i].pose.translation.x = x;
        primitives[i].pose.translation.y = y;
        placed.push((x, y, r));
    }

    let viewpoint = config.viewpoint();
    let solids: Vec<&Primitive> = primitives.iter().chain(std::iter::once(&table)).collect();
    let mut points = Vec::new();
    let mut ids = Vec::new();
    for (k, solid) in solids.iter().enumerate() {
        for (p, n) in solid.sample_surface(&mut rng, config.density) {
            if n.dot(&(viewpoint - p)) <= 0.0 {
                continue;
            }
            let probe = p + n * 1e-4;
            let hidden = solids
                .iter()
                .enumerate()
                .any(|(j, other)| j != k && other.contains(&probe));
            if !hidden {
                // stored at file precision so saved scenes reload bit-exact
                points.push(p.map(|c| c as f32 as f64));
                ids.push(solid.object_id);
            }
        }
    }
    let cloud = PointCloud::new(points, viewpoint)?;
    let annotation = SceneAnnotation {
        primitives,
        table,
        table_height: config.table_height,
        camera_viewpoint: viewpoint,
        per_point_object_id: ids,
    };
    Ok((cloud, annotation))
}

/// Object of the given kind at the origin of the xy plane, resting on the
/// table with a random yaw.
fn random_object<R: Rng>(rng: &mut R, kind: PrimitiveKind, id: u32, config: &SynthConfig) -> Result<Primitive> {
    let s = &config.sizes;
    let mut range = |r: [f64; 2]| rng.random_range(r[0]..=r[1]);
    let (shape, lying) = match kind {
        PrimitiveKind::Box => (
            Shape::Box {
                half_extents: [range(s.box_side) / 2.0, range(s.box_side) / 2.0, range(s.box_side) / 2.0],
            },
            false,
        ),
        PrimitiveKind::Sphere => (Shape::Sphere { radius: range(s.sphere_radius) }, false),
        PrimitiveKind::Cylinder => {
            let radius = range(s.cylinder_radius);
            let half_height = range(s.cylinder_height) / 2.0;
            let lying = rng.random_bool(config.lying_cylinder_probability);
            (Shape::Cylinder { radius, half_height }, lying)
        }
        PrimitiveKind::PlaneSlab => {
            let side = [range(s.slab_side), range(s.slab_side)];
            (
                Shape::PlaneSlab {
                    half_extents: [side[0] / 2.0, side[1] / 2.0, range(s.slab_thickness) / 2.0],
                },
                false,
            )
        }
    };
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt = if lying { Vec3::x() * FRAC_PI_2 } else { Vec3::zeros() };
    let rotation = Isometry3::rotation(Vec3::z() * yaw) * Isometry3::rotation(tilt);
    let mut prim = Primitive::new(shape, rotation, id)?;
    prim.pose.translation.z = config.table_height - prim.min_z();
    prim.friction_coeff = rng.random_range(config.friction_range[0]..=config.friction_range[1]);
    prim.porous = rng.random_bool(config.porous_probability);
    Ok(prim)
}
