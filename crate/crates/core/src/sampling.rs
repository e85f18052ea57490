//! Seed selection: fused objectness × graspness, thresholding and FPS.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fps::farthest_point_sampling;
use crate::grasp::Gripper;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub t_parallel: f64,
    pub t_vacuum: f64,
    pub m_parallel: usize,
    pub m_vacuum: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            t_parallel: 0.1,
            t_vacuum: 0.1,
            m_parallel: 1024,
            m_vacuum: 1024,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        for t in [self.t_parallel, self.t_vacuum] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("sampling threshold {t} outside [0, 1]")));
            }
        }
        if self.m_parallel == 0 || self.m_vacuum == 0 {
            return Err(Error::InvalidConfig("seed counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn threshold(&self, gripper: Gripper) -> f64 {
        match gripper {
            Gripper::Parallel => self.t_parallel,
            Gripper::Vacuum => self.t_vacuum,
        }
    }

    pub fn count(&self, gripper: Gripper) -> usize {
        match gripper {
            Gripper::Parallel => self.m_parallel,
            Gripper::Vacuum => self.m_vacuum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub gripper: Gripper,
    pub indices: Vec<usize>,
    pub fused_scores: Vec<f64>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn fuse_scores(objectness: &[f64], graspness: &[f64]) -> Result<Vec<f64>> {
    if objectness.len() != graspness.len() {
        return Err(Error::LengthMismatch {
            what: "graspness",
            got: graspness.len(),
            expected: objectness.len(),
        });
    }
    Ok(objectness.iter().zip(graspness).map(|(o, g)| o * g).collect())
}

/// Indices whose fused score is strictly above `threshold`.
pub fn candidates(fused: &[f64], threshold: f64) -> Vec<usize> {
    (0..fused.len()).filter(|&i| fused[i] > threshold).collect()
}

/// Candidates above `threshold`, reduced to at most `m` by farthest point
/// sampling. An empty result is not an error.
pub fn select_seeds(cloud: &PointCloud, fused: &[f64], threshold: f64, m: usize, gripper: Gripper) -> Result<SeedSet> {
    if fused.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "fused scores",
            got: fused.len(),
            expected: cloud.len(),
        });
    }
    let cand = candidates(fused, threshold);
    let indices = if cand.len() <= m {
        cand
    } else {
        farthest_point_sampling(cloud.points(), &cand, m)?
    };
    let fused_scores = indices.iter().map(|&i| fused[i]).collect();
    Ok(SeedSet {
        gripper,
        indices,
        fused_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist2, Point3};
    use proptest::prelude::*;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0))
            .collect();
        PointCloud::new(pts, Point3::new(0.0, 0.0, 1.0)).unwrap()
    }

    fn min_pairwise(points: &[Point3], idx: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                best = best.min(dist2(&points[i], &points[j]));
            }
        }
        best.sqrt()
    }

    #[test]
    fn fusion_examples() {
        assert_eq!(fuse_scores(&[0.8], &[0.5]).unwrap(), vec![0.4]);
        assert_eq!(fuse_scores(&[0.0, 1.0], &[0.9, 0.3]).unwrap()[0], 0.0);
        assert!(fuse_scores(&[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn below_threshold_gives_empty_set() {
        let cloud = plane(50, 1);
        let s = select_seeds(&cloud, &[0.05; 50], 0.1, 1024, Gripper::Vacuum).unwrap();
        assert!(s.is_empty());
        let at = select_seeds(&cloud, &[0.1; 50], 0.1, 1024, Gripper::Vacuum).unwrap();
        assert!(at.is_empty(), "ties at the threshold are excluded");
    }

    #[test]
    fn few_candidates_are_all_returned() {
        let cloud = plane(100, 2);
        let mut fused = vec![0.0; 100];
        for i in (0..100).step_by(10) {
            fused[i] = 0.7;
        }
        let s = select_seeds(&cloud, &fused, 0.1, 1024, Gripper::Parallel).unwrap();
        assert_eq!(s.indices, (0..100).step_by(10).collect::<Vec<_>>());
        assert!(s.fused_scores.iter().all(|&f| f == 0.7));
    }

    #[test]
    fn fps_spreads_better_than_random() {
        let cloud = plane(5000, 3);
        let fused = vec![0.9; 5000];
        let seeds = select_seeds(&cloud, &fused, 0.1, 1024, Gripper::Parallel).unwrap();
        let fps_gap = min_pairwise(cloud.points(), &seeds.indices);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut random: Vec<f64> = (0..20)
            .map(|_| min_pairwise(cloud.points(), &sample(&mut rng, 5000, 1024).into_vec()))
            .collect();
        random.sort_by(f64::total_cmp);
        assert!(fps_gap >= random[10], "{fps_gap} vs {}", random[10]);
    }

    proptest! {
        #[test]
        fn seeds_respect_threshold_and_monotonicity(
            scores in proptest::collection::vec(0.0f64..1.0, 1..200),
            t1 in 0.0f64..1.0,
            dt in 0.0f64..0.5,
            c in 0.1f64..4.0,
        ) {
            let cloud = plane(scores.len(), 9);
            let s = select_seeds(&cloud, &scores, t1, 16, Gripper::Vacuum).unwrap();
            prop_assert!(s.indices.iter().all(|&i| scores[i] > t1));
            let mut uniq = s.indices.clone();
            uniq.sort_unstable();
            uniq.dedup();
            prop_assert_eq!(uniq.len(), s.indices.len());
            let low = candidates(&scores, t1);
            let high = candidates(&scores, t1 + dt);
            prop_assert!(high.iter().all(|i| low.contains(i)));
            // (o, g, t) -> (c·o, g, c·t) keeps the candidate set
            let ones = vec![1.0; scores.len()];
            let scaled_o: Vec<f64> = ones.iter().map(|o| o * c).collect();
            let base = candidates(&fuse_scores(&ones, &scores).unwrap(), t1);
            let scaled = candidates(&fuse_scores(&scaled_o, &scores).unwrap(), c * t1);
            prop_assert_eq!(base, scaled);
        }
    }
}
