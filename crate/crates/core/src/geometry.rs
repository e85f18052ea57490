//! Scalar geometry shared by every stage: points, directions and the grasp
//! frame convention.

use nalgebra::{Unit, Vector3};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;
/// Direction with Euclidean norm 1 (to within 1e-9).
pub type UnitVector3 = Unit<Vector3<f64>>;
pub type Isometry3 = nalgebra::Isometry3<f64>;
pub type UnitQuaternion = nalgebra::UnitQuaternion<f64>;

/// Squared Euclidean distance. Every distance comparison in the crate goes
/// through this function so that index queries and brute-force scans agree
/// bit for bit.
#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

pub fn is_finite(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

pub fn unit(v: Vec3) -> Option<UnitVector3> {
    let n = v.norm();
    if n.is_finite() && n > 1e-12 {
        Some(Unit::new_unchecked(v / n))
    } else {
        None
    }
}

/// Reference jaw axis for an approach direction, before in-plane rotation.
///
/// Horizontal and perpendicular to the approach; falls back to +y for
/// vertical approaches.
pub fn reference_axis(approach: &UnitVector3) -> UnitVector3 {
    let h = Vec3::new(-approach.y, approach.x, 0.0);
    unit(h).unwrap_or_else(|| Vector3::y_axis())
}

/// Closing (jaw-to-jaw) axis of a parallel grasp: the reference axis rotated
/// by `angle_deg` about the approach direction.
pub fn closing_axis(approach: &UnitVector3, angle_deg: f64) -> UnitVector3 {
    let y0 = reference_axis(approach).into_inner();
    let z0 = approach.cross(&y0);
    let a = angle_deg.to_radians();
    Unit::new_normalize(y0 * a.cos() + z0 * a.sin())
}

/// In-plane angle in [0, 180) whose closing axis is parallel to `axis`.
pub fn angle_for_axis(approach: &UnitVector3, axis: &Vec3) -> f64 {
    let y0 = reference_axis(approach).into_inner();
    let z0 = approach.cross(&y0);
    let deg = axis.dot(&z0).atan2(axis.dot(&y0)).to_degrees();
    let a = deg.rem_euclid(180.0);
    if a >= 180.0 {
        0.0
    } else {
        a
    }
}

/// Angle in degrees between two directions, clamped for rounding.
pub fn angle_between_deg(a: &Vec3, b: &Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closing_axis_is_perpendicular_and_unit() {
        for v in [Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.3, -0.2, -0.9), Vec3::x()] {
            let v = unit(v).unwrap();
            for a in [0.0, 15.0, 90.0, 165.0] {
                let b = closing_axis(&v, a);
                assert_abs_diff_eq!(b.dot(&v), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(b.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angle_for_axis_inverts_closing_axis() {
        let v = unit(Vec3::new(0.2, 0.1, -1.0)).unwrap();
        for a in [0.0, 30.0, 75.0, 179.0] {
            let b = closing_axis(&v, a);
            assert_abs_diff_eq!(angle_for_axis(&v, &b), a, epsilon = 1e-9);
            // the opposite jaw direction is the same grasp
            assert_abs_diff_eq!(angle_for_axis(&v, &(-b.into_inner())), a, epsilon = 1e-9);
        }
    }
}
