//! In-memory training loop: one clip per step, full-sequence backpropagation
//! through time, Adam with global-norm clipping. Dataset loading and
//! checkpoint files live in the companion crate; this module consumes clips
//! that are already in memory.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::clustering::KmeansOptions;
use crate::dsp::{stft, Spectrogram, StftConfig, Waveform};
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::features::normalized_phase_difference;
use crate::masks::{bpd_mask_with, dominant_source_mask, PartitionTarget, TargetKind};
use crate::mat::Mat;
use crate::math;
use crate::rng;

use super::adam::{clip_global_norm, Adam};
use super::loss::{dc_loss, dc_loss_grad};
use super::net::{EmbeddingNetwork, Mode, NetConfig};

/// Silence floor used when deriving phase-difference training targets.
pub const TARGET_SILENCE_FLOOR_DB: f64 = -60.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub target_kind: TargetKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Clips per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            target_kind: TargetKind::Bpd,
            learning_rate: 5e-4,
            epochs: 10,
            batch_size: 1,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(invalid_config!("learning rate must be non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid_config!("epochs and batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid_config!("betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One training clip in memory. BPD/RPD need the second channel; DS needs
/// the weighted per-source references.
#[derive(Clone, Debug)]
pub struct ClipData {
    pub mic1: Waveform,
    pub mic2: Option<Waveform>,
    pub references: Option<Vec<Waveform>>,
    pub n_sources: usize,
}

/// Log-magnitude input features, mean/variance normalized per clip;
/// one row per frame.
pub fn log_magnitude_features(spec: &Spectrogram) -> Mat {
    let f = spec.freq_bins();
    let t = spec.frames();
    let mut m = Mat::zeros(t, f);
    for frame in 0..t {
        let row = m.row_mut(frame);
        let col = spec.frame(frame);
        for (dst, c) in row.iter_mut().zip(col.iter()) {
            *dst = math::log(c.abs() + 1e-8);
        }
    }
    let n = (f * t) as f64;
    let mean = m.as_slice().iter().sum::<f64>() / n;
    let var = m.as_slice().iter().map(|&x| math::sq(x - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / math::sqrt(var).max(1e-8);
    for x in m.as_mut_slice() {
        *x = (*x - mean) * inv_std;
    }
    m
}

/// Features plus target for one clip.
pub struct TrainExample {
    pub features: Mat,
    pub target: PartitionTarget,
}

/// Build the (X, Y) pair for a clip under the configured target kind.
/// Targets use every bin; the silence floor only shapes feature validity
/// for the phase-difference kinds.
pub fn build_example(
    clip: &ClipData,
    kind: TargetKind,
    cfg: &StftConfig,
    kmeans_rng: &mut ChaCha8Rng,
) -> Result<TrainExample> {
    let m1 = stft(&clip.mic1, cfg)?;
    let features = log_magnitude_features(&m1);
    let target = match kind {
        TargetKind::Ds => {
            let refs = clip.references.as_ref().ok_or_else(|| {
                Error::InvalidConfig(String::from(
                    "dominant-source targets need per-source references",
                ))
            })?;
            if refs.len() != clip.n_sources {
                return Err(invalid_input!(
                    "{} references for {} sources",
                    refs.len(),
                    clip.n_sources
                ));
            }
            let specs: Vec<Spectrogram> = refs
                .iter()
                .map(|r| stft(r, cfg))
                .collect::<Result<Vec<_>>>()?;
            // References are already weighted source images, so the argmax
            // runs with unit weights.
            let weights = alloc::vec![1.0; specs.len()];
            let mask = dominant_source_mask(&specs, &weights)?;
            PartitionTarget::from_mask(TargetKind::Ds, &mask)
        }
        TargetKind::Bpd => {
            let mic2 = clip.mic2.as_ref().ok_or_else(|| {
                Error::InvalidConfig(String::from("phase-difference targets need two channels"))
            })?;
            let m2 = stft(mic2, cfg)?;
            let npd = normalized_phase_difference(&m1, &m2, TARGET_SILENCE_FLOOR_DB)?;
            let mask = bpd_mask_with(&npd, clip.n_sources, &KmeansOptions::default(), kmeans_rng)?;
            PartitionTarget::from_mask(TargetKind::Bpd, &mask)
        }
        TargetKind::Rpd => {
            let mic2 = clip.mic2.as_ref().ok_or_else(|| {
                Error::InvalidConfig(String::from("phase-difference targets need two channels"))
            })?;
            let m2 = stft(mic2, cfg)?;
            let npd = normalized_phase_difference(&m1, &m2, TARGET_SILENCE_FLOOR_DB)?;
            PartitionTarget::rpd(&npd, cfg.sample_rate)
        }
    };
    Ok(TrainExample { features, target })
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub network: EmbeddingNetwork,
    /// Mean loss per epoch.
    pub loss_history: Vec<f64>,
}

/// Divergence carries the last finite state so callers can keep it.
#[derive(Debug)]
pub enum TrainError {
    Invalid(Error),
    Diverged {
        message: String,
        last_good: TrainedModel,
        epoch: usize,
    },
}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        TrainError::Invalid(e)
    }
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::Invalid(e) => write!(f, "{e}"),
            TrainError::Diverged { message, epoch, .. } => {
                write!(f, "diverged at epoch {epoch}: {message}")
            }
        }
    }
}

/// Train on pre-built examples. Deterministic in (examples, configs, seed).
pub fn train_examples(
    examples: &[TrainExample],
    net_cfg: NetConfig,
    cfg: &TrainConfig,
) -> core::result::Result<TrainedModel, TrainError> {
    let mut init_rng = rng::stream(cfg.seed, "init");
    let net = EmbeddingNetwork::init(net_cfg, &mut init_rng).map_err(TrainError::Invalid)?;
    train_examples_from(net, examples, cfg)
}

/// Continue training from an existing network (checkpoint resumption);
/// the optimizer state starts fresh.
pub fn train_examples_from(
    mut net: EmbeddingNetwork,
    examples: &[TrainExample],
    cfg: &TrainConfig,
) -> core::result::Result<TrainedModel, TrainError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(TrainError::Invalid(Error::InvalidInput(String::from(
            "no training examples",
        ))));
    }
    let mut opt = Adam::new(
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
        net.num_params(),
    );
    let mut history: Vec<f64> = Vec::with_capacity(cfg.epochs);
    let mut snapshot = net.clone();

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut grads_acc: Option<Vec<f64>> = None;
        let mut in_batch = 0usize;
        for (clip_idx, example) in examples.iter().enumerate() {
            let mut dropout_rng = rng::stream_indexed(
                cfg.seed,
                "dropout",
                (epoch * examples.len() + clip_idx) as u64,
            );
            let (v, cache) = net
                .forward(&example.features, Mode::Train, Some(&mut dropout_rng))
                .map_err(TrainError::Invalid)?;
            let loss = dc_loss(&v, &example.target).map_err(TrainError::Invalid)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    message: alloc::format!("non-finite loss on clip {clip_idx}"),
                    last_good: TrainedModel {
                        network: snapshot,
                        loss_history: history,
                    },
                    epoch,
                });
            }
            epoch_loss += loss;
            let d_v = dc_loss_grad(&v, &example.target).map_err(TrainError::Invalid)?;
            let grads = net
                .backward(cache.as_ref().unwrap(), &d_v)
                .map_err(TrainError::Invalid)?;
            match &mut grads_acc {
                None => grads_acc = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(grads.iter()) {
                        *a += g;
                    }
                }
            }
            in_batch += 1;
            let last = clip_idx + 1 == examples.len();
            if in_batch == cfg.batch_size || last {
                let mut grads = grads_acc.take().unwrap();
                if in_batch > 1 {
                    let inv = 1.0 / in_batch as f64;
                    for g in grads.iter_mut() {
                        *g *= inv;
                    }
                }
                clip_global_norm(&mut grads, cfg.grad_clip);
                opt.step(net.params_mut(), &grads);
                in_batch = 0;
            }
        }
        let mean_loss = epoch_loss / examples.len() as f64;
        if !net.params().iter().all(|p| p.is_finite()) {
            return Err(TrainError::Diverged {
                message: String::from("non-finite parameters after update"),
                last_good: TrainedModel {
                    network: snapshot,
                    loss_history: history,
                },
                epoch,
            });
        }
        history.push(mean_loss);
        snapshot = net.clone();
    }
    Ok(TrainedModel {
        network: net,
        loss_history: history,
    })
}

/// Build examples from raw clips, then train. K-means target construction
/// draws from the "kmeans" sub-stream of the training seed, indexed by clip.
pub fn train_clips(
    clips: &[ClipData],
    stft_cfg: &StftConfig,
    net_cfg: NetConfig,
    cfg: &TrainConfig,
) -> core::result::Result<TrainedModel, TrainError> {
    let mut examples = Vec::with_capacity(clips.len());
    for (i, clip) in clips.iter().enumerate() {
        let mut kmeans_rng = rng::stream_indexed(cfg.seed, "kmeans", i as u64);
        examples.push(build_example(
            clip,
            cfg.target_kind,
            stft_cfg,
            &mut kmeans_rng,
        )?);
    }
    train_examples(&examples, net_cfg, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cell::CellKind;
    use crate::spatial::{render_stereo_mixture, weighted_source_image, Geometry, Scene};
    use crate::synth::{Gender, Voice};

    fn small_net(f: usize) -> NetConfig {
        NetConfig {
            in_features: f,
            hidden: 8,
            embed_dim: 4,
            layers: 1,
            cell: CellKind::Gru,
            dropout: 0.3,
            row_normalize: true,
        }
    }

    fn make_clips(count: usize, seed: u64, len: usize) -> Vec<ClipData> {
        let geom = Geometry::default_16k();
        let mut scene_rng = rng::stream(seed, "scene");
        (0..count)
            .map(|i| {
                let scene = crate::spatial::sample_scene(&mut scene_rng, 2, &geom).unwrap();
                let va = Voice::new(seed, Gender::Female, i as u32);
                let vb = Voice::new(seed, Gender::Male, i as u32);
                let sources = [
                    va.utterance(i as u64, len, 16000),
                    vb.utterance(i as u64, len, 16000),
                ];
                let mix = render_stereo_mixture(&sources, &scene, &[]).unwrap();
                let references = sources
                    .iter()
                    .zip(scene.weights.iter())
                    .map(|(s, &w)| weighted_source_image(s, w))
                    .collect();
                ClipData {
                    mic1: mix.mic1,
                    mic2: Some(mix.mic2),
                    references: Some(references),
                    n_sources: 2,
                }
            })
            .collect()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_init() {
        let cfg = StftConfig::default_16k();
        let clips = make_clips(1, 1, 4096);
        let train_cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 1,
            seed: 7,
            ..TrainConfig::default()
        };
        let model = train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg).unwrap();
        let mut init_rng = rng::stream(7, "init");
        let fresh = EmbeddingNetwork::init(small_net(cfg.freq_bins()), &mut init_rng).unwrap();
        assert_eq!(model.network.params(), fresh.params());
        assert_eq!(model.loss_history.len(), 1);
    }

    #[test]
    fn bpd_training_halves_the_loss() {
        let cfg = StftConfig::default_16k();
        let clips = make_clips(8, 2, 4096);
        let train_cfg = TrainConfig {
            target_kind: TargetKind::Bpd,
            learning_rate: 1e-3,
            epochs: 20,
            seed: 3,
            ..TrainConfig::default()
        };
        let model = train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg).unwrap();
        let first = model.loss_history[0];
        let last = *model.loss_history.last().unwrap();
        assert!(
            last < 0.5 * first,
            "loss went {first} -> {last} over {} epochs",
            model.loss_history.len()
        );
    }

    #[test]
    fn rpd_training_reduces_the_loss() {
        let cfg = StftConfig::default_16k();
        let clips = make_clips(8, 4, 4096);
        let train_cfg = TrainConfig {
            target_kind: TargetKind::Rpd,
            learning_rate: 1e-3,
            epochs: 12,
            seed: 5,
            ..TrainConfig::default()
        };
        let model = train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg).unwrap();
        let first = model.loss_history[0];
        let last = *model.loss_history.last().unwrap();
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn ds_without_references_is_a_config_error() {
        let cfg = StftConfig::default_16k();
        let mut clips = make_clips(1, 6, 4096);
        clips[0].references = None;
        let train_cfg = TrainConfig {
            target_kind: TargetKind::Ds,
            epochs: 1,
            ..TrainConfig::default()
        };
        match train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg) {
            Err(TrainError::Invalid(Error::InvalidConfig(_))) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn divergence_reports_the_last_good_state() {
        let cfg = StftConfig::default_16k();
        let clips = make_clips(1, 8, 4096);
        let net_cfg = NetConfig {
            row_normalize: false,
            dropout: 0.0,
            ..small_net(cfg.freq_bins())
        };
        let train_cfg = TrainConfig {
            target_kind: TargetKind::Bpd,
            learning_rate: 1e80,
            epochs: 6,
            seed: 9,
            ..TrainConfig::default()
        };
        match train_clips(&clips, &cfg, net_cfg, &train_cfg) {
            Err(TrainError::Diverged { last_good, .. }) => {
                assert!(last_good.network.params().iter().all(|p| p.is_finite()));
            }
            other => panic!("expected divergence, got {:?}", other.map(|m| m.loss_history)),
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = StftConfig::default_16k();
        let clips = make_clips(2, 10, 4096);
        let train_cfg = TrainConfig {
            epochs: 2,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg).unwrap();
        let b = train_clips(&clips, &cfg, small_net(cfg.freq_bins()), &train_cfg).unwrap();
        assert_eq!(a.network.params(), b.network.params());
        assert_eq!(a.loss_history, b.loss_history);
    }
}
