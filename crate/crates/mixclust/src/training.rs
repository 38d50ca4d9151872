//! Manifest-driven training: load the train split's clips into memory,
//! build targets, run the core trainer, and materialize a checkpoint plus
//! its loss-history CSV. On divergence the last good state is written
//! before the error propagates.

use std::path::Path;

use mixclust_core::dsp::{StftConfig, Waveform};
use mixclust_core::masks::TargetKind;
use mixclust_core::model::{
    build_example, train_examples, train_examples_from, ClipData, NetConfig, TrainConfig,
    TrainError, TrainExample,
};
use mixclust_core::rng;

use crate::checkpoint::{Checkpoint, CheckpointMeta, NetSettings, StftSettings, TrainSettings};
use crate::error::{AppError, Result};
use crate::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::wav::read_wav;

/// Load one manifest entry as an in-memory training clip.
pub fn load_clip(
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    need_references: bool,
    sample_rate: u32,
) -> Result<ClipData> {
    let mix = read_wav(&manifest.resolve(&entry.mixture_path))?;
    if mix.sample_rate != sample_rate {
        return Err(AppError::Input(format!(
            "{} is at {} Hz, pipeline runs at {sample_rate} Hz",
            entry.mixture_path, mix.sample_rate
        )));
    }
    if mix.channels.len() < 2 {
        return Err(AppError::Input(format!(
            "{} is not a stereo mixture",
            entry.mixture_path
        )));
    }
    let references = if need_references {
        let mut refs: Vec<Waveform> = Vec::with_capacity(entry.source_paths.len());
        for rel in &entry.source_paths {
            let r = read_wav(&manifest.resolve(rel))?;
            refs.push(Waveform::new(r.channels[0].clone(), r.sample_rate));
        }
        Some(refs)
    } else {
        None
    };
    Ok(ClipData {
        mic1: Waveform::new(mix.channels[0].clone(), mix.sample_rate),
        mic2: Some(Waveform::new(mix.channels[1].clone(), mix.sample_rate)),
        references,
        n_sources: entry.n_sources,
    })
}

pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub diverged: bool,
}

/// Train on the manifest's train split. `resume` continues from an existing
/// checkpoint's parameters with a fresh optimizer.
pub fn train_from_manifest(
    manifest: &DatasetManifest,
    stft_cfg: &StftConfig,
    net_cfg: NetConfig,
    train_cfg: &TrainConfig,
    resume: Option<Checkpoint>,
    out_path: &Path,
) -> Result<TrainOutput> {
    let entries = manifest.split_entries(Split::Train);
    if entries.is_empty() {
        return Err(AppError::Config("manifest has no train split".into()));
    }
    let need_refs = train_cfg.target_kind == TargetKind::Ds;

    use rayon::prelude::*;
    let examples: Vec<Result<TrainExample>> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let clip = load_clip(manifest, entry, need_refs, stft_cfg.sample_rate)?;
            let mut kmeans_rng = rng::stream_indexed(train_cfg.seed, "kmeans", i as u64);
            build_example(&clip, train_cfg.target_kind, stft_cfg, &mut kmeans_rng)
                .map_err(AppError::Core)
        })
        .collect();
    let examples: Vec<TrainExample> = examples.into_iter().collect::<Result<Vec<_>>>()?;

    let meta = |history: Vec<f64>| CheckpointMeta {
        stft: StftSettings::from_config(stft_cfg),
        net: NetSettings::from_config(&net_cfg),
        train: TrainSettings::from_config(train_cfg),
        dataset_fingerprint: manifest.fingerprint(),
        loss_history: history,
    };

    let outcome = match resume {
        Some(ckpt) => {
            let resumed_cfg = ckpt.meta.net.to_config()?;
            if resumed_cfg != net_cfg {
                return Err(AppError::Config(
                    "resume checkpoint disagrees with the requested network config".into(),
                ));
            }
            train_examples_from(ckpt.network, &examples, train_cfg)
        }
        None => train_examples(&examples, net_cfg, train_cfg),
    };

    match outcome {
        Ok(model) => {
            let checkpoint = Checkpoint {
                meta: meta(model.loss_history.clone()),
                network: model.network,
            };
            checkpoint.save(out_path)?;
            crate::checkpoint::write_loss_history(
                &loss_csv_path(out_path),
                &checkpoint.meta.loss_history,
            )?;
            Ok(TrainOutput {
                checkpoint,
                diverged: false,
            })
        }
        Err(TrainError::Diverged {
            message,
            last_good,
            epoch,
        }) => {
            // Keep the last finite state on disk, then report the failure.
            let checkpoint = Checkpoint {
                meta: meta(last_good.loss_history.clone()),
                network: last_good.network,
            };
            checkpoint.save(out_path)?;
            crate::checkpoint::write_loss_history(
                &loss_csv_path(out_path),
                &checkpoint.meta.loss_history,
            )?;
            Err(AppError::Runtime(format!(
                "training diverged at epoch {epoch} ({message}); last good checkpoint kept at {}",
                out_path.display()
            )))
        }
        Err(TrainError::Invalid(e)) => Err(AppError::Core(e)),
    }
}

pub fn loss_csv_path(ckpt_path: &Path) -> std::path::PathBuf {
    let mut os = ckpt_path.as_os_str().to_owned();
    os.push(".loss.csv");
    std::path::PathBuf::from(os)
}
