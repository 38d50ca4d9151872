//! Pipeline configuration: one TOML file holding geometry, STFT layout,
//! dataset spec and training settings. Command-line flags override file
//! values, which override the defaults here.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mixclust_core::dsp::StftConfig;
use mixclust_core::model::NetConfig;
use mixclust_core::model::TrainConfig;
use mixclust_core::spatial::Geometry;

use crate::checkpoint::{parse_cell, parse_target};
use crate::dataset::DatasetSpec;
use crate::error::{AppError, Result};
use crate::manifest::GenderGroup;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub mic_distance_m: f64,
    pub speed_of_sound_mps: f64,
    pub min_angle_separation_deg: f64,
    pub room_half_extent_m: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            mic_distance_m: 0.01,
            speed_of_sound_mps: 343.0,
            min_angle_separation_deg: 10.0,
            room_half_extent_m: 3.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StftSection {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftSection {
    fn default() -> Self {
        StftSection {
            fft_size: 512,
            hop: 128,
            sample_rate: 16000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub n_sources: usize,
    pub gender_group: String,
    pub train: usize,
    pub eval: usize,
    pub test: usize,
    pub clip_seconds: f64,
    /// "synthetic" or a path to a directory of WAVs.
    pub corpus: String,
    pub synthetic_speakers_per_gender: u32,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            n_sources: 2,
            gender_group: "fm".into(),
            train: 200,
            eval: 20,
            test: 50,
            clip_seconds: 2.0,
            corpus: "synthetic".into(),
            synthetic_speakers_per_gender: 8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub target: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub cell: String,
    pub dropout: f64,
    pub row_normalize: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_clip: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            target: "bpd".into(),
            learning_rate: 5e-4,
            epochs: 10,
            batch_size: 1,
            hidden: 32,
            embed_dim: 16,
            layers: 1,
            cell: "gru".into(),
            dropout: 0.3,
            row_normalize: true,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: Option<String>,
    pub threads: Option<usize>,
    pub geometry: GeometrySection,
    pub stft: StftSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| AppError::Config(format!("cannot serialize config: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Ok(Geometry::new(
            self.geometry.mic_distance_m,
            self.geometry.speed_of_sound_mps,
            self.stft.sample_rate,
            self.geometry.min_angle_separation_deg,
            self.geometry.room_half_extent_m,
        )?)
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        Ok(StftConfig::new(
            self.stft.fft_size,
            self.stft.hop,
            self.stft.sample_rate,
        )?)
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            n_sources: self.dataset.n_sources,
            gender_group: GenderGroup::parse(&self.dataset.gender_group)?,
            train: self.dataset.train,
            eval: self.dataset.eval,
            test: self.dataset.test,
            clip_seconds: self.dataset.clip_seconds,
        })
    }

    pub fn net_config(&self) -> Result<NetConfig> {
        Ok(NetConfig {
            in_features: self.stft.fft_size / 2 + 1,
            hidden: self.train.hidden,
            embed_dim: self.train.embed_dim,
            layers: self.train.layers,
            cell: parse_cell(&self.train.cell)?,
            dropout: self.train.dropout,
            row_normalize: self.train.row_normalize,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            target_kind: parse_target(&self.train.target)?,
            learning_rate: self.train.learning_rate,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            epsilon: self.train.epsilon,
            grad_clip: self.train.grad_clip,
        })
    }
}
