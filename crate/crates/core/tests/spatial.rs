//! Spatial queries against brute force on arbitrary small clouds.

use proptest::prelude::*;

use multigrasp_core::fps::farthest_point_sampling;
use multigrasp_core::geometry::dist2;
use multigrasp_core::{Point3, SpatialIndex};

fn cloud() -> impl Strategy<Value = Vec<Point3>> {
    // a coarse lattice makes distance ties common
    prop::collection::vec((0i32..6, 0i32..6, 0i32..3), 1..120)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x as f64 * 0.01, y as f64 * 0.01, z as f64 * 0.01)).collect())
}

proptest! {
    #[test]
    fn knn_is_the_k_smallest_with_index_ties(pts in cloud(), q in (0.0..0.06f64, 0.0..0.06f64, 0.0..0.03f64), k in 1usize..20) {
        let q = Point3::new(q.0, q.1, q.2);
        let k = k.min(pts.len());
        let index = SpatialIndex::from_points(pts.clone()).unwrap();
        let mut want: Vec<usize> = (0..pts.len()).collect();
        want.sort_by(|&a, &b| dist2(&pts[a], &q).total_cmp(&dist2(&pts[b], &q)).then(a.cmp(&b)));
        want.truncate(k);
        prop_assert_eq!(index.knn(&q, k).unwrap(), want);
    }

    #[test]
    fn radius_query_is_inclusive(pts in cloud(), seed in 0usize..120, r in prop::sample::select(vec![0.0, 0.01, 0.02, 0.025, 0.05])) {
        let q = pts[seed % pts.len()];
        let index = SpatialIndex::from_points(pts.clone()).unwrap();
        let want: Vec<usize> = (0..pts.len()).filter(|&i| dist2(&pts[i], &q) <= r * r).collect();
        prop_assert_eq!(index.radius_query(&q, r), want);
    }

    #[test]
    fn fps_picks_are_distinct_and_prefix_stable(pts in cloud(), m in 1usize..30) {
        let all: Vec<usize> = (0..pts.len()).collect();
        let m = m.min(pts.len());
        let picks = farthest_point_sampling(&pts, &all, m).unwrap();
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), m);
        if m > 1 {
            prop_assert_eq!(farthest_point_sampling(&pts, &all, m - 1).unwrap(), picks[..m - 1].to_vec());
        }
    }
}
