//! Labels and the end-to-end pipeline on one small generated scene.

use std::sync::OnceLock;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multigrasp_core::labels::build_label_maps;
use multigrasp_core::scene::{generate_ground_truth, generate_scene, GroundTruthConfig, SynthConfig};
use multigrasp_core::train::{build_training_scene, train, DatasetConfig, TrainConfig};
use multigrasp_core::{run_pipeline, GraspHead, Gripper, LabelConfig, PipelineConfig, PointCloud, Scene};

fn scene() -> &'static Scene {
    static SCENE: OnceLock<Scene> = OnceLock::new();
    SCENE.get_or_init(|| {
        let (cloud, annotation) = generate_scene(42, 3, &SynthConfig::default()).unwrap();
        let ground_truth = generate_ground_truth(&annotation, &GroundTruthConfig::default()).unwrap();
        Scene { cloud, annotation, ground_truth }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn labels_follow_point_permutations(seed in any::<u64>()) {
        let s = scene();
        let cfg = LabelConfig::default();
        let base = build_label_maps(&s.cloud, &s.annotation, &s.ground_truth, &cfg).unwrap();
        let mut order: Vec<usize> = (0..s.cloud.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cloud = PointCloud::new(order.iter().map(|&i| *s.cloud.point(i)).collect(), s.cloud.viewpoint()).unwrap();
        let mut ann = s.annotation.clone();
        ann.per_point_object_id = order.iter().map(|&i| s.annotation.per_point_object_id[i]).collect();
        let permuted = build_label_maps(&cloud, &ann, &s.ground_truth, &cfg).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert_eq!(permuted.objectness[j], base.objectness[i]);
            prop_assert!((permuted.parallel[j] - base.parallel[i]).abs() < 1e-12);
            prop_assert!((permuted.vacuum[j] - base.vacuum[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn fallback_pipeline_ranks_object_grasps() {
    let s = scene();
    let cfg = PipelineConfig::default();
    let out = run_pipeline(s, &GraspHead::Fallback, &Gripper::BOTH, &cfg).unwrap();
    assert_eq!(out.results.len(), 2);
    for r in &out.results {
        assert!(!r.grasps.is_empty(), "{:?} found nothing", r.gripper);
        assert!(r.grasps.len() <= cfg.top_k);
        assert!(r.grasps.windows(2).all(|w| w[0].score() >= w[1].score()));
        for g in &r.grasps {
            assert_eq!(g.gripper(), r.gripper);
            let seed = g.seed().expect("pipeline grasps carry their seed");
            assert_ne!(s.annotation.per_point_object_id[seed], 0);
        }
    }
}

#[test]
fn single_gripper_requests_are_independent() {
    let s = scene();
    let cfg = PipelineConfig::default();
    let both = run_pipeline(s, &GraspHead::Fallback, &Gripper::BOTH, &cfg).unwrap();
    let vac = run_pipeline(s, &GraspHead::Fallback, &[Gripper::Vacuum], &cfg).unwrap();
    assert_eq!(vac.results.len(), 1);
    assert_eq!(vac.result(Gripper::Vacuum), both.result(Gripper::Vacuum));
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let dataset = DatasetConfig::default();
    let scenes = vec![build_training_scene(scene(), &dataset).unwrap()];
    let cfg = TrainConfig { epochs: 8, rng_seed: 3, ..Default::default() };
    let a = train(&scenes, dataset.head_layout(), &cfg).unwrap();
    let b = train(&scenes, dataset.head_layout(), &cfg).unwrap();
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.log.len(), 8);
    assert!(a.log[7].total() < a.log[0].total(), "{:?}", a.log.iter().map(|l| l.total()).collect::<Vec<_>>());

    let learned = GraspHead::Learned(Box::new(a.model));
    let out = run_pipeline(scene(), &learned, &Gripper::BOTH, &PipelineConfig::default()).unwrap();
    assert!(out.maps.validate().is_ok());
}
