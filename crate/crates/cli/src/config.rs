//! Run configuration: TOML file sections layered over built-in defaults;
//! command-line flags are applied on top by each subcommand.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use multigrasp_core::scene::{GroundTruthConfig, SynthConfig};
use multigrasp_core::train::DatasetConfig;
use multigrasp_core::{EvalConfig, PipelineConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base seed for scene synthesis.
    pub seed: u64,
    pub synth: SynthConfig,
    pub ground_truth: GroundTruthConfig,
    pub pipeline: PipelineConfig,
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthConfig::default(),
            ground_truth: GroundTruthConfig::default(),
            pipeline: PipelineConfig::default(),
            dataset: DatasetSection::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub refiner_samples: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { refiner_samples: DatasetConfig::default().refiner_samples }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// Label and refine settings come from the pipeline section so that
    /// training targets and inference agree.
    pub fn dataset(&self) -> DatasetConfig {
        DatasetConfig {
            refiner_samples: self.dataset.refiner_samples,
            labels: self.pipeline.labels.clone(),
            refine: self.pipeline.refine.clone(),
        }
    }
}
