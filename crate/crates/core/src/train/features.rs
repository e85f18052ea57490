//! Per-point geometric descriptors fed to the predictor.

use ndarray::Array2;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::index::SpatialIndex;
use crate::normals::local_surface;

/// Descriptor width: height, normal (3), curvature, neighbour count,
/// distance to centroid.
pub const FEATURE_DIM: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "height",
    "normal_x",
    "normal_y",
    "normal_z",
    "curvature",
    "neighbours",
    "centroid_distance",
];

/// Descriptor matrix, one row per point. Points without a usable
/// neighbourhood get a zero normal and isotropic curvature 1/3.
pub fn point_features(cloud: &PointCloud, index: &SpatialIndex, table_height: f64, radius: f64) -> Array2<f64> {
    let centroid = cloud.centroid();
    let viewpoint = cloud.viewpoint();
    let rows: Vec<[f64; FEATURE_DIM]> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let (n, curvature, count) = match local_surface(index, i, radius, &viewpoint) {
                Ok(s) => (s.normal.into_inner(), s.curvature, s.neighbours),
                Err(_) => (Default::default(), 1.0 / 3.0, index.radius_query(p, radius).len()),
            };
            [
                p.z - table_height,
                n.x,
                n.y,
                n.z,
                curvature,
                count as f64,
                (p - centroid).norm(),
            ]
        })
        .collect();
    Array2::from_shape_vec((rows.len(), FEATURE_DIM), rows.into_iter().flatten().collect()).expect("row width is fixed")
}

/// Column means and standard deviations; constant columns get unit scale.
pub fn feature_stats<'a>(blocks: impl IntoIterator<Item = &'a Array2<f64>>) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; FEATURE_DIM];
    let mut sq = vec![0.0; FEATURE_DIM];
    let mut n = 0usize;
    for b in blocks {
        for row in b.rows() {
            for (k, &x) in row.iter().enumerate() {
                sum[k] += x;
                sq[k] += x * x;
            }
        }
        n += b.nrows();
    }
    if n == 0 {
        return (vec![0.0; FEATURE_DIM], vec![1.0; FEATURE_DIM]);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let std = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| {
            let var = (s / n as f64 - m * m).max(0.0);
            if var > 1e-18 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}
