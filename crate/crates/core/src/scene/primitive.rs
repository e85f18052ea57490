//! Convex solid primitives: signed distance, line intersection, closest
//! surface point and surface sampling, all in world coordinates.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Isometry3, Point3, UnitQuaternion, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Box,
    Sphere,
    Cylinder,
    PlaneSlab,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [
        PrimitiveKind::Box,
        PrimitiveKind::Sphere,
        PrimitiveKind::Cylinder,
        PrimitiveKind::PlaneSlab,
    ];
}

impl std::str::FromStr for PrimitiveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Self::Box),
            "sphere" => Ok(Self::Sphere),
            "cylinder" => Ok(Self::Cylinder),
            "plane_slab" | "plane-slab" | "slab" => Ok(Self::PlaneSlab),
            other => Err(Error::InvalidConfig(format!("unknown primitive kind {other}"))),
        }
    }
}

/// Dimensions in metres. Boxes and slabs use half extents; cylinders are
/// aligned with their local z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_height: f64 },
    PlaneSlab { half_extents: [f64; 3] },
}

impl Shape {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Shape::Box { .. } => PrimitiveKind::Box,
            Shape::Sphere { .. } => PrimitiveKind::Sphere,
            Shape::Cylinder { .. } => PrimitiveKind::Cylinder,
            Shape::PlaneSlab { .. } => PrimitiveKind::PlaneSlab,
        }
    }

    fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Box { half_extents } | Shape::PlaneSlab { half_extents } => half_extents.to_vec(),
            Shape::Sphere { radius } => vec![radius],
            Shape::Cylinder { radius, half_height } => vec![radius, half_height],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrimitiveRecord", into = "PrimitiveRecord")]
pub struct Primitive {
    pub shape: Shape,
    pub pose: Isometry3,
    /// 0 is reserved for the table.
    pub object_id: u32,
    pub friction_coeff: f64,
    /// Porous surfaces cannot hold a suction seal.
    pub porous: bool,
}

/// Entry and exit of a line through a convex solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHit {
    pub t_in: f64,
    pub normal_in: Vec3,
    pub t_out: f64,
    pub normal_out: Vec3,
}

#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Point3,
    pub normal: Vec3,
    /// Surface area represented by the sample, m².
    pub area: f64,
}

impl Primitive {
    pub fn new(shape: Shape, pose: Isometry3, object_id: u32) -> Result<Self> {
        let p = Primitive {
            shape,
            pose,
            object_id,
            friction_coeff: 0.5,
            porous: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape.dims().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::schema("primitives.shape", "dimensions must be positive"));
        }
        let q = self.pose.rotation.quaternion();
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::schema("primitives.rotation", "quaternion must have unit norm"));
        }
        if !(self.friction_coeff > 0.0 && self.friction_coeff <= 1.2) {
            return Err(Error::schema("primitives.friction_coeff", "must lie in (0, 1.2]"));
        }
        Ok(())
    }

    pub fn kind(&self) -> PrimitiveKind {
        self.shape.kind()
    }

    pub fn center(&self) -> Point3 {
        Point3::from(self.pose.translation.vector)
    }

    /// Radius of a sphere around [`Primitive::center`] enclosing the solid.
    pub fn bounding_radius(&self) -> f64 {
        match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => {
                Vec3::from(h).norm()
            }
            Shape::Sphere { radius } => radius,
            Shape::Cylinder { radius, half_height } => radius.hypot(half_height),
        }
    }

    /// Radius of the world-xy footprint circle around the centre.
    pub fn footprint_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        for c in self.local_extreme_points() {
            let w = self.pose * c;
            r = r.max((w.x - self.pose.translation.x).hypot(w.y - self.pose.translation.y));
        }
        match self.shape {
            Shape::Sphere { radius } => radius,
            _ => r,
        }
    }

    fn local_extreme_points(&self) -> Vec<Point3> {
        match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => {
                let mut v = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            v.push(Point3::new(sx * h[0], sy * h[1], sz * h[2]));
                        }
                    }
                }
                v
            }
            Shape::Sphere { radius } => vec![Point3::new(radius, 0.0, 0.0)],
            Shape::Cylinder { radius, half_height } => (0..32)
                .flat_map(|k| {
                    let a = k as f64 * PI / 16.0;
                    [-half_height, half_height]
                        .map(|z| Point3::new(radius * a.cos(), radius * a.sin(), z))
                })
                .collect(),
        }
    }

    /// Lowest world z of the solid.
    pub fn min_z(&self) -> f64 {
        match self.shape {
            Shape::Sphere { radius } => self.pose.translation.z - radius,
            _ => self
                .local_extreme_points()
                .into_iter()
                .map(|p| (self.pose * p).z)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Exact signed distance; negative inside.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        let q = self.pose.inverse_transform_point(p);
        match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => {
                let d = Vec3::new(q.x.abs() - h[0], q.y.abs() - h[1], q.z.abs() - h[2]);
                let outside = Vec3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
                outside + d.x.max(d.y).max(d.z).min(0.0)
            }
            Shape::Sphere { radius } => q.coords.norm() - radius,
            Shape::Cylinder { radius, half_height } => {
                let dr = q.x.hypot(q.y) - radius;
                let dz = q.z.abs() - half_height;
                dr.max(0.0).hypot(dz.max(0.0)) + dr.max(dz).min(0.0)
            }
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.signed_distance(p) < 0.0
    }

    /// Closest point on the surface and the outward normal there.
    pub fn closest_surface(&self, p: &Point3) -> (Point3, Vec3) {
        let q = self.pose.inverse_transform_point(p);
        let (c, n) = match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => box_closest(&q, h),
            Shape::Sphere { radius } => {
                let n = if q.coords.norm() > 1e-15 {
                    q.coords.normalize()
                } else {
                    Vec3::z()
                };
                (Point3::from(n * radius), n)
            }
            Shape::Cylinder { radius, half_height } => cylinder_closest(&q, radius, half_height),
        };
        (self.pose * c, self.pose.rotation * n)
    }

    /// Intersection of the infinite line `origin + t·dir` (unit `dir`) with
    /// the solid.
    pub fn intersect_line(&self, origin: &Point3, dir: &Vec3) -> Option<LineHit> {
        let o = self.pose.inverse_transform_point(origin);
        let d = self.pose.inverse_transform_vector(dir);
        let hit = match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => slab_hit(&o, &d, h),
            Shape::Sphere { radius } => {
                let b = o.coords.dot(&d);
                let c = o.coords.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    None
                } else {
                    let s = disc.sqrt();
                    let (t0, t1) = (-b - s, -b + s);
                    Some(LineHit {
                        t_in: t0,
                        normal_in: (o.coords + d * t0) / radius,
                        t_out: t1,
                        normal_out: (o.coords + d * t1) / radius,
                    })
                }
            }
            Shape::Cylinder { radius, half_height } => cylinder_hit(&o, &d, radius, half_height),
        }?;
        Some(LineHit {
            normal_in: self.pose.rotation * hit.normal_in,
            normal_out: self.pose.rotation * hit.normal_out,
            ..hit
        })
    }

    pub fn surface_area(&self) -> f64 {
        self.faces().iter().map(Face::area).sum()
    }

    fn faces(&self) -> Vec<Face> {
        match self.shape {
            Shape::Box { half_extents: h } | Shape::PlaneSlab { half_extents: h } => {
                let mut faces = Vec::with_capacity(6);
                for axis in 0..3 {
                    for sign in [1.0, -1.0] {
                        faces.push(Face::Rect { axis, sign, h });
                    }
                }
                faces
            }
            Shape::Sphere { radius } => vec![Face::Sphere { radius }],
            Shape::Cylinder { radius, half_height } => vec![
                Face::Side { radius, half_height },
                Face::Cap { radius, z: half_height, sign: 1.0 },
                Face::Cap { radius, z: -half_height, sign: -1.0 },
            ],
        }
    }

    /// Uniform random surface samples, `round(area * density)` per face.
    pub fn sample_surface<R: Rng>(&self, rng: &mut R, density: f64) -> Vec<(Point3, Vec3)> {
        let mut out = Vec::new();
        for face in self.faces() {
            let n = (face.area() * density).round() as usize;
            for _ in 0..n {
                let (p, nrm) = face.random(rng);
                out.push((self.pose * p, self.pose.rotation * nrm));
            }
        }
        out
    }

    /// Deterministic near-uniform samples at roughly `spacing` metres, each
    /// carrying the area it stands for.
    pub fn stratified_surface(&self, spacing: f64) -> Vec<SurfaceSample> {
        let mut out = Vec::new();
        for face in self.faces() {
            for (p, n, a) in face.stratified(spacing) {
                out.push(SurfaceSample {
                    point: self.pose * p,
                    normal: self.pose.rotation * n,
                    area: a,
                });
            }
        }
        out
    }

    /// Whether the surface at local point `q` (on the surface) is planar.
    pub fn is_planar_at(&self, p: &Point3) -> bool {
        let q = self.pose.inverse_transform_point(p);
        match self.shape {
            Shape::Box { .. } | Shape::PlaneSlab { .. } => true,
            Shape::Sphere { .. } => false,
            Shape::Cylinder { radius, half_height } => {
                (q.z.abs() - half_height).abs() < (q.x.hypot(q.y) - radius).abs()
            }
        }
    }
}

fn box_closest(q: &Point3, h: [f64; 3]) -> (Point3, Vec3) {
    let c = Point3::new(
        q.x.clamp(-h[0], h[0]),
        q.y.clamp(-h[1], h[1]),
        q.z.clamp(-h[2], h[2]),
    );
    let d = q - c;
    if d.norm() > 1e-12 {
        return (c, d.normalize());
    }
    // on or inside: nearest face
    let mut axis = 0;
    let mut best = f64::INFINITY;
    for a in 0..3 {
        let gap = h[a] - q[a].abs();
        if gap < best {
            best = gap;
            axis = a;
        }
    }
    let sign = if q[axis] >= 0.0 { 1.0 } else { -1.0 };
    let mut c = *q;
    c[axis] = sign * h[axis];
    let mut n = Vec3::zeros();
    n[axis] = sign;
    (c, n)
}

fn cylinder_closest(q: &Point3, radius: f64, hh: f64) -> (Point3, Vec3) {
    let rho = q.x.hypot(q.y);
    let radial = if rho > 1e-15 {
        Vec3::new(q.x / rho, q.y / rho, 0.0)
    } else {
        Vec3::x()
    };
    let zsign = if q.z >= 0.0 { 1.0 } else { -1.0 };
    let inside = rho <= radius && q.z.abs() <= hh;
    if inside {
        if radius - rho < hh - q.z.abs() {
            (Point3::new(radial.x * radius, radial.y * radius, q.z), radial)
        } else {
            (Point3::new(q.x, q.y, zsign * hh), Vec3::z() * zsign)
        }
    } else {
        let cr = rho.min(radius);
        let cz = q.z.clamp(-hh, hh);
        let c = Point3::new(radial.x * cr, radial.y * cr, cz);
        let d = q - c;
        let n = if d.norm() > 1e-12 {
            d.normalize()
        } else if (rho - radius).abs() < (q.z.abs() - hh).abs() {
            radial
        } else {
            Vec3::z() * zsign
        };
        (c, n)
    }
}

fn slab_hit(o: &Point3, d: &Vec3, h: [f64; 3]) -> Option<LineHit> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    let mut n0 = Vec3::zeros();
    let mut n1 = Vec3::zeros();
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a].abs() > h[a] {
                return None;
            }
            continue;
        }
        let ta = (-h[a] - o[a]) / d[a];
        let tb = (h[a] - o[a]) / d[a];
        let (near, far, sn) = if ta < tb { (ta, tb, -1.0) } else { (tb, ta, 1.0) };
        if near > t0 {
            t0 = near;
            n0 = Vec3::zeros();
            n0[a] = sn;
        }
        if far < t1 {
            t1 = far;
            n1 = Vec3::zeros();
            n1[a] = -sn;
        }
    }
    (t0 <= t1 && t0.is_finite() && t1.is_finite()).then_some(LineHit {
        t_in: t0,
        normal_in: n0,
        t_out: t1,
        normal_out: n1,
    })
}

fn cylinder_hit(o: &Point3, d: &Vec3, radius: f64, hh: f64) -> Option<LineHit> {
    // radial part
    let a = d.x * d.x + d.y * d.y;
    let (mut t0, mut t1, mut n0, mut n1);
    if a < 1e-15 {
        if o.x.hypot(o.y) > radius {
            return None;
        }
        t0 = f64::NEG_INFINITY;
        t1 = f64::INFINITY;
        n0 = Vec3::zeros();
        n1 = Vec3::zeros();
    } else {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - radius * radius;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        t0 = (-b - s) / a;
        t1 = (-b + s) / a;
        let p0 = o.coords + d * t0;
        let p1 = o.coords + d * t1;
        n0 = Vec3::new(p0.x, p0.y, 0.0) / radius;
        n1 = Vec3::new(p1.x, p1.y, 0.0) / radius;
    }
    // axial slab
    if d.z.abs() < 1e-15 {
        if o.z.abs() > hh {
            return None;
        }
    } else {
        let ta = (-hh - o.z) / d.z;
        let tb = (hh - o.z) / d.z;
        let (near, far, sn) = if ta < tb { (ta, tb, -1.0) } else { (tb, ta, 1.0) };
        if near > t0 {
            t0 = near;
            n0 = Vec3::new(0.0, 0.0, sn);
        }
        if far < t1 {
            t1 = far;
            n1 = Vec3::new(0.0, 0.0, -sn);
        }
    }
    (t0 <= t1 && t0.is_finite() && t1.is_finite()).then_some(LineHit {
        t_in: t0,
        normal_in: n0,
        t_out: t1,
        normal_out: n1,
    })
}

#[derive(Debug, Clone, Copy)]
enum Face {
    Rect { axis: usize, sign: f64, h: [f64; 3] },
    Sphere { radius: f64 },
    Side { radius: f64, half_height: f64 },
    Cap { radius: f64, z: f64, sign: f64 },
}

impl Face {
    fn area(&self) -> f64 {
        match *self {
            Face::Rect { axis, h, .. } => {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                4.0 * h[u] * h[v]
            }
            Face::Sphere { radius } => 4.0 * PI * radius * radius,
            Face::Side { radius, half_height } => 2.0 * PI * radius * 2.0 * half_height,
            Face::Cap { radius, .. } => PI * radius * radius,
        }
    }

    fn random<R: Rng>(&self, rng: &mut R) -> (Point3, Vec3) {
        match *self {
            Face::Rect { axis, sign, h } => {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut p = Point3::origin();
                p[axis] = sign * h[axis];
                p[u] = rng.random_range(-h[u]..=h[u]);
                p[v] = rng.random_range(-h[v]..=h[v]);
                let mut n = Vec3::zeros();
                n[axis] = sign;
                (p, n)
            }
            Face::Sphere { radius } => {
                let z: f64 = rng.random_range(-1.0..=1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let r = (1.0 - z * z).max(0.0).sqrt();
                let n = Vec3::new(r * phi.cos(), r * phi.sin(), z);
                (Point3::from(n * radius), n)
            }
            Face::Side { radius, half_height } => {
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let z = rng.random_range(-half_height..=half_height);
                let n = Vec3::new(phi.cos(), phi.sin(), 0.0);
                (Point3::new(radius * n.x, radius * n.y, z), n)
            }
            Face::Cap { radius, z, sign } => {
                let r = radius * rng.random::<f64>().sqrt();
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                (Point3::new(r * phi.cos(), r * phi.sin(), z), Vec3::new(0.0, 0.0, sign))
            }
        }
    }

    fn stratified(&self, spacing: f64) -> Vec<(Point3, Vec3, f64)> {
        let mut out = Vec::new();
        match *self {
            Face::Rect { axis, sign, h } => {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let nu = ((2.0 * h[u] / spacing).ceil() as usize).max(1);
                let nv = ((2.0 * h[v] / spacing).ceil() as usize).max(1);
                let area = self.area() / (nu * nv) as f64;
                let mut n = Vec3::zeros();
                n[axis] = sign;
                for i in 0..nu {
                    for j in 0..nv {
                        let mut p = Point3::origin();
                        p[axis] = sign * h[axis];
                        p[u] = -h[u] + (i as f64 + 0.5) * 2.0 * h[u] / nu as f64;
                        p[v] = -h[v] + (j as f64 + 0.5) * 2.0 * h[v] / nv as f64;
                        out.push((p, n, area));
                    }
                }
            }
            Face::Sphere { radius } => {
                let n = ((self.area() / (spacing * spacing)).ceil() as usize).max(1);
                let area = self.area() / n as f64;
                for (k, d) in fibonacci_sphere(n).into_iter().enumerate() {
                    let _ = k;
                    out.push((Point3::from(d * radius), d, area));
                }
            }
            Face::Side { radius, half_height } => {
                let na = ((2.0 * PI * radius / spacing).ceil() as usize).max(3);
                let nz = ((2.0 * half_height / spacing).ceil() as usize).max(1);
                let area = self.area() / (na * nz) as f64;
                for i in 0..na {
                    let phi = (i as f64 + 0.5) * 2.0 * PI / na as f64;
                    let n = Vec3::new(phi.cos(), phi.sin(), 0.0);
                    for j in 0..nz {
                        let z = -half_height + (j as f64 + 0.5) * 2.0 * half_height / nz as f64;
                        out.push((Point3::new(radius * n.x, radius * n.y, z), n, area));
                    }
                }
            }
            Face::Cap { radius, z, sign } => {
                let n = ((self.area() / (spacing * spacing)).ceil() as usize).max(1);
                let area = self.area() / n as f64;
                let golden = PI * (3.0 - 5f64.sqrt());
                for k in 0..n {
                    let r = radius * ((k as f64 + 0.5) / n as f64).sqrt();
                    let phi = k as f64 * golden;
                    out.push((Point3::new(r * phi.cos(), r * phi.sin(), z), Vec3::new(0.0, 0.0, sign), area));
                }
            }
        }
        out
    }
}

/// `n` near-uniform unit vectors on the sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = k as f64 * golden;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveRecord {
    shape: Shape,
    /// Unit quaternion as [w, x, y, z].
    rotation: [f64; 4],
    translation: [f64; 3],
    object_id: u32,
    friction_coeff: f64,
    porous: bool,
}

impl TryFrom<PrimitiveRecord> for Primitive {
    type Error = Error;
    fn try_from(r: PrimitiveRecord) -> Result<Self> {
        let [w, x, y, z] = r.rotation;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        if !(q.norm() - 1.0).abs().lt(&1e-9) {
            return Err(Error::schema("primitives.rotation", "quaternion must have unit norm"));
        }
        if r.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema("primitives.translation", "non-finite value"));
        }
        let p = Primitive {
            shape: r.shape,
            pose: Isometry3::from_parts(
                Vec3::from(r.translation).into(),
                UnitQuaternion::new_unchecked(q),
            ),
            object_id: r.object_id,
            friction_coeff: r.friction_coeff,
            porous: r.porous,
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<Primitive> for PrimitiveRecord {
    fn from(p: Primitive) -> Self {
        let q = p.pose.rotation.quaternion();
        PrimitiveRecord {
            shape: p.shape,
            rotation: [q.w, q.i, q.j, q.k],
            translation: p.pose.translation.vector.into(),
            object_id: p.object_id,
            friction_coeff: p.friction_coeff,
            porous: p.porous,
        }
    }
}
