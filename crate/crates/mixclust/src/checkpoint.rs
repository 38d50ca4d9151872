//! Versioned binary checkpoint: magic, a JSON config block, then named
//! little-endian f64 parameter tensors. Round-trips bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mixclust_core::dsp::StftConfig;
use mixclust_core::masks::TargetKind;
use mixclust_core::model::{CellKind, EmbeddingNetwork, NetConfig, TrainConfig};

use crate::error::{AppError, Result};

const MAGIC: &[u8; 4] = b"MXCK";
const VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StftSettings {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl StftSettings {
    pub fn to_config(&self) -> Result<StftConfig> {
        Ok(StftConfig::new(self.fft_size, self.hop, self.sample_rate)?)
    }

    pub fn from_config(cfg: &StftConfig) -> Self {
        StftSettings {
            fft_size: cfg.fft_size,
            hop: cfg.hop,
            sample_rate: cfg.sample_rate,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetSettings {
    pub in_features: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub cell: String,
    pub dropout: f64,
    pub row_normalize: bool,
}

pub fn parse_cell(name: &str) -> Result<CellKind> {
    match name {
        "gru" => Ok(CellKind::Gru),
        "lstm" => Ok(CellKind::Lstm),
        other => Err(AppError::Config(format!("unknown cell kind '{other}'"))),
    }
}

pub fn cell_name(kind: CellKind) -> &'static str {
    match kind {
        CellKind::Gru => "gru",
        CellKind::Lstm => "lstm",
    }
}

impl NetSettings {
    pub fn to_config(&self) -> Result<NetConfig> {
        Ok(NetConfig {
            in_features: self.in_features,
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            layers: self.layers,
            cell: parse_cell(&self.cell)?,
            dropout: self.dropout,
            row_normalize: self.row_normalize,
        })
    }

    pub fn from_config(cfg: &NetConfig) -> Self {
        NetSettings {
            in_features: cfg.in_features,
            hidden: cfg.hidden,
            embed_dim: cfg.embed_dim,
            layers: cfg.layers,
            cell: cell_name(cfg.cell).to_string(),
            dropout: cfg.dropout,
            row_normalize: cfg.row_normalize,
        }
    }
}

pub fn parse_target(name: &str) -> Result<TargetKind> {
    match name {
        "ds" => Ok(TargetKind::Ds),
        "bpd" => Ok(TargetKind::Bpd),
        "rpd" => Ok(TargetKind::Rpd),
        other => Err(AppError::Config(format!("unknown target kind '{other}'"))),
    }
}

pub fn target_name(kind: TargetKind) -> &'static str {
    match kind {
        TargetKind::Ds => "ds",
        TargetKind::Bpd => "bpd",
        TargetKind::Rpd => "rpd",
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainSettings {
    pub target: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_clip: f64,
}

impl TrainSettings {
    pub fn to_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            target_kind: parse_target(&self.target)?,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            grad_clip: self.grad_clip,
        })
    }

    pub fn from_config(cfg: &TrainConfig) -> Self {
        TrainSettings {
            target: target_name(cfg.target_kind).to_string(),
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            grad_clip: cfg.grad_clip,
        }
    }
}

/// Everything a checkpoint carries besides the parameters themselves.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub stft: StftSettings,
    pub net: NetSettings,
    pub train: TrainSettings,
    pub dataset_fingerprint: u64,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub network: EmbeddingNetwork,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.meta)?;
        out.extend_from_slice(&(config.len() as u32).to_le_bytes());
        out.extend_from_slice(&config);

        let layout = self.network.param_layout();
        out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
        for spec in &layout {
            let name = spec.name.as_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(spec.rows as u32).to_le_bytes());
            out.extend_from_slice(&(spec.cols as u32).to_le_bytes());
            for &v in &self.network.params()[spec.offset..spec.offset + spec.len()] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = fs::read(path)
            .map_err(|e| AppError::Input(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let bad = |msg: &str| AppError::Input(format!("{}: {msg}", path.display()));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > bytes.len() {
                return Err(bad("truncated checkpoint"));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let cfg_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let meta: CheckpointMeta = serde_json::from_slice(take(cfg_len)?)?;
        let net_cfg = meta.net.to_config()?;

        let tensor_count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut tensors: std::collections::HashMap<String, Vec<f64>> = std::collections::HashMap::new();
        for _ in 0..tensor_count {
            let name_len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(name_len)?.to_vec())
                .map_err(|_| bad("tensor name is not UTF-8"))?;
            let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let n = rows * cols;
            let raw = take(n * 8)?;
            let mut data = Vec::with_capacity(n);
            for chunk in raw.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
            tensors.insert(name, data);
        }

        // Rebuild the flat vector through the layout implied by the config.
        let probe = EmbeddingNetwork::from_params(
            net_cfg,
            vec![0.0; {
                let mut r = mixclust_core::rng::stream(0, "probe");
                EmbeddingNetwork::init(net_cfg, &mut r)
                    .map_err(AppError::Core)?
                    .num_params()
            }],
        )
        .map_err(AppError::Core)?;
        let mut params = vec![0.0; probe.num_params()];
        for spec in probe.param_layout() {
            let data = tensors
                .remove(&spec.name)
                .ok_or_else(|| bad(&format!("missing tensor {}", spec.name)))?;
            if data.len() != spec.len() {
                return Err(bad(&format!("tensor {} has wrong size", spec.name)));
            }
            params[spec.offset..spec.offset + spec.len()].copy_from_slice(&data);
        }
        if !tensors.is_empty() {
            return Err(bad("checkpoint carries unknown tensors"));
        }
        let network = EmbeddingNetwork::from_params(net_cfg, params).map_err(AppError::Core)?;
        Ok(Checkpoint { meta, network })
    }
}

/// Loss history CSV written next to a checkpoint.
pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in history.iter().enumerate() {
        out.push_str(&format!("{i},{loss}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixclust_core::rng::stream;
    use tempfile::tempdir;

    fn sample_checkpoint() -> Checkpoint {
        let net_cfg = NetConfig {
            in_features: 9,
            hidden: 4,
            embed_dim: 3,
            layers: 2,
            cell: CellKind::Lstm,
            dropout: 0.4,
            row_normalize: true,
        };
        let network = EmbeddingNetwork::init(net_cfg, &mut stream(3, "init")).unwrap();
        Checkpoint {
            meta: CheckpointMeta {
                stft: StftSettings {
                    fft_size: 512,
                    hop: 128,
                    sample_rate: 16000,
                },
                net: NetSettings::from_config(&net_cfg),
                train: TrainSettings::from_config(&TrainConfig::default()),
                dataset_fingerprint: 0xdead_beef,
                loss_history: vec![10.5, 3.25, 1.0625],
            },
            network,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.mxck");
        let ckpt = sample_checkpoint();
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.meta, ckpt.meta);
        let a: Vec<u64> = ckpt.network.params().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = loaded.network.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        // Saving the loaded checkpoint reproduces the file byte for byte.
        let path2 = dir.path().join("model2.mxck");
        loaded.save(&path2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.mxck");
        fs::write(&path, b"MXCKgarbage").unwrap();
        assert!(Checkpoint::load(&path).is_err());
        fs::write(&path, b"NOPE").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
