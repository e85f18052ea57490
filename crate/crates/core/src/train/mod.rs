//! Per-point predictor, its losses and the multitask training loop.

pub mod dataset;
pub mod features;
pub mod losses;
pub mod mlp;
pub mod optim;
pub mod pcgrad;
pub mod trainer;

pub use dataset::{build_training_scene, validate_dataset, DatasetConfig, TrainingScene};
pub use features::{feature_stats, point_features, FEATURE_DIM, FEATURE_NAMES};
pub use losses::{
    cross_entropy, loss_objectness, loss_parallel_graspness, loss_refiner, loss_vacuum, sigmoid, smooth_l1,
    weighted_bce, RefinerLoss, RefinerPrediction, RefinerTarget, RefinerWeights,
};
pub use mlp::{Checkpoint, Forward, HeadLayout, MlpModel, CHECKPOINT_SCHEMA_VERSION};
pub use optim::{cosine_lr, Adam};
pub use pcgrad::{mean_gradient, pcgrad, pcgrad_with_orders, project_conflicting, random_orders};
pub use trainer::{
    combine, init_model, task_gradients, train, write_log_csv, Batch, EpochLog, TaskGradients, TrainConfig, TrainOutput,
};
