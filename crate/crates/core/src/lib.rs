//! Multi-gripper grasp detection on point clouds: synthetic scenes with
//! analytic grasp oracles, graspness labels, seed sampling, parallel-jaw and
//! suction pose refinement, a small multitask predictor, and benchmark
//! metrics.

pub mod cloud;
pub mod error;
pub mod eval;
pub mod export;
pub mod fps;
pub mod geometry;
pub mod grasp;
pub mod index;
pub mod labels;
pub mod normals;
pub mod pipeline;
pub mod ply;
pub mod refine;
pub mod sampling;
pub mod scene;
pub mod train;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geometry::{Isometry3, Point3, UnitVector3, Vec3};
pub use grasp::{Grasp, Gripper, ParallelGrasp, VacuumGrasp};
pub use index::SpatialIndex;
pub use labels::{GraspnessMaps, LabelConfig, MapRole};
pub use pipeline::{run_pipeline, GraspHead, PipelineConfig, PipelineOutput};
pub use sampling::{SamplingConfig, SeedSet};
pub use scene::{GroundTruthGrasp, Scene, SceneAnnotation};
pub use train::{MlpModel, TrainConfig};
pub use eval::EvalConfig;
