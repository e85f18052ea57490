//! Surface normals from the covariance of a radius neighbourhood.

use nalgebra::{Matrix3, SymmetricEigen, Unit};

use crate::error::{Error, Result};
use crate::geometry::{Point3, UnitVector3, Vec3};
use crate::index::SpatialIndex;

pub const DEFAULT_NORMAL_RADIUS: f64 = 0.01;

/// Rank test on the middle covariance eigenvalue (m²).
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSurface {
    pub normal: UnitVector3,
    /// Smallest eigenvalue over the eigenvalue sum; 0 on a plane, 1/3 for
    /// isotropic scatter.
    pub curvature: f64,
    pub neighbours: usize,
}

pub fn estimate_normal(
    index: &SpatialIndex,
    seed: usize,
    radius: f64,
    viewpoint: &Point3,
) -> Result<UnitVector3> {
    local_surface(index, seed, radius, viewpoint).map(|s| s.normal)
}

/// Normal, curvature proxy and support size around `seed`.
///
/// The normal is the eigenvector of the neighbourhood covariance with the
/// smallest eigenvalue, flipped to face `viewpoint`.
pub fn local_surface(
    index: &SpatialIndex,
    seed: usize,
    radius: f64,
    viewpoint: &Point3,
) -> Result<LocalSurface> {
    let pts = index.points();
    let centre = *pts.get(seed).ok_or(Error::IndexOutOfRange {
        index: seed,
        len: pts.len(),
    })?;
    let hood = index.radius_query(&centre, radius);
    let degenerate = Error::DegenerateNeighborhood {
        seed,
        neighbours: hood.len(),
    };
    if hood.len() < 3 {
        return Err(degenerate);
    }
    let n = hood.len() as f64;
    let mean = hood.iter().fold(Vec3::zeros(), |acc, &i| acc + pts[i].coords) / n;
    let mut cov = Matrix3::zeros();
    for &i in &hood {
        let d = pts[i].coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    if lambda[1] <= RANK_EPS {
        return Err(degenerate);
    }
    let mut normal: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
    if normal.dot(&(viewpoint - centre)) < 0.0 {
        normal = -normal;
    }
    let sum: f64 = lambda.iter().sum();
    Ok(LocalSurface {
        normal: Unit::new_normalize(normal),
        curvature: if sum > 0.0 { lambda[0] / sum } else { 0.0 },
        neighbours: hood.len(),
    })
}
