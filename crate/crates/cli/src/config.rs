use std::path::{Path, PathBuf};

use lc_intent_core::dataset::DatasetConfig;
use lc_intent_core::ingest::SceneConfig;
use lc_intent_core::kinematics::KinematicsConfig;
use lc_intent_core::model::ModelConfigs;
use lc_intent_core::pipeline::PipelineConfig;
use lc_intent_core::preprocess::PreprocessConfig;
use lc_intent_core::synthgen::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Trajectory CSV, or a directory holding `trajectories.csv` and
    /// optionally a synthetic `manifest.json`.
    pub corpus: Option<PathBuf>,
    /// Directory written by `dataset`.
    pub samples: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub tree_counts: Vec<usize>,
    pub window_lengths: Vec<usize>,
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            tree_counts: (1..=10).map(|i| i * 20).collect(),
            window_lengths: (1..=6).map(|i| i * 30).collect(),
            repeats: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { repeats: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub scene: SceneConfig,
    pub preprocess: PreprocessConfig,
    pub kinematics: KinematicsConfig,
    pub dataset: DatasetConfig,
    pub models: ModelConfigs,
    pub synth: SynthConfig,
    pub sweep: SweepConfig,
    pub bench: BenchConfig,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("config: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::validation(format!("config {}: {e}", path.display())))
    }

    /// Push the run seed into every component seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.dataset.rng_seed = seed;
        self.models.gbdt.rng_seed = seed;
        self.models.svm.rng_seed = seed;
        self.models.lstm.rng_seed = seed;
        self.synth.rng_seed = seed;
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            scene: self.scene.clone(),
            preprocess: self.preprocess.clone(),
            kinematics: self.kinematics.clone(),
            dataset: self.dataset.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.pipeline().validate().map_err(Failure::from_core)?;
        self.models.validate().map_err(Failure::from_core)?;
        if self.sweep.repeats < 1 {
            return Err(Failure::validation("invalid value for `sweep.repeats`: must be >= 1"));
        }
        if self.bench.repeats < 1 {
            return Err(Failure::validation("invalid value for `bench.repeats`: must be >= 1"));
        }
        if self.sweep.tree_counts.is_empty() || self.sweep.tree_counts.contains(&0) {
            return Err(Failure::validation("invalid value for `sweep.tree_counts`: must be non-empty and >= 1"));
        }
        if self.sweep.window_lengths.is_empty() || self.sweep.window_lengths.contains(&0) {
            return Err(Failure::validation(
                "invalid value for `sweep.window_lengths`: must be non-empty and >= 1",
            ));
        }
        Ok(())
    }
}
