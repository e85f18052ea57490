//! Deterministic greedy farthest point sampling.

use crate::cloud::centroid;
use crate::error::{Error, Result};
use crate::geometry::{dist2, Point3};

/// Select `m` indices from `subset` by greedy farthest point sampling.
///
/// The first pick is the subset point closest to the subset centroid; each
/// later pick maximises the distance to the already selected set. All ties
/// go to the lowest point index.
pub fn farthest_point_sampling(points: &[Point3], subset: &[usize], m: usize) -> Result<Vec<usize>> {
    Ok(fps_with_coverage(points, subset, m)?
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

/// Like [`farthest_point_sampling`], also returning for every pick its
/// distance to the previously selected set (infinite for the first pick).
pub fn fps_with_coverage(points: &[Point3], subset: &[usize], m: usize) -> Result<Vec<(usize, f64)>> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= points.len()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: points.len(),
        });
    }
    let mut cand: Vec<usize> = subset.to_vec();
    cand.sort_unstable();
    cand.dedup();
    if m > cand.len() {
        return Err(Error::SubsetTooSmall {
            requested: m,
            available: cand.len(),
        });
    }
    if m == 0 {
        return Ok(Vec::new());
    }

    let c = centroid(cand.iter().map(|&i| &points[i]));
    // `cand` is ascending, so strict comparison keeps the lowest index on ties
    let mut first = 0;
    let mut best = f64::INFINITY;
    for (slot, &i) in cand.iter().enumerate() {
        let d = dist2(&points[i], &c);
        if d < best {
            best = d;
            first = slot;
        }
    }

    let mut min_d2 = vec![f64::INFINITY; cand.len()];
    let mut taken = vec![false; cand.len()];
    let mut out = Vec::with_capacity(m);
    let mut pick = first;
    let mut pick_d2 = f64::INFINITY;
    for _ in 0..m {
        taken[pick] = true;
        out.push((cand[pick], pick_d2.sqrt()));
        let p = points[cand[pick]];
        let mut next = usize::MAX;
        let mut next_d2 = f64::NEG_INFINITY;
        for (slot, &i) in cand.iter().enumerate() {
            if taken[slot] {
                continue;
            }
            let d = dist2(&points[i], &p);
            if d < min_d2[slot] {
                min_d2[slot] = d;
            }
            if min_d2[slot] > next_d2 {
                next_d2 = min_d2[slot];
                next = slot;
            }
        }
        if next == usize::MAX {
            break;
        }
        pick = next;
        pick_d2 = next_d2;
    }
    Ok(out)
}
