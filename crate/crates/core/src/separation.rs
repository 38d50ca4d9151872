//! Monophonic inference: embed the mixture, K-means the embedding rows into
//! the expected number of sources, mask the mixture STFT and resynthesize.
//! Only one channel ever enters this path.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::clustering::{kmeans, KmeansOptions};
use crate::dsp::{istft_with_len, stft, StftConfig, Waveform};
use crate::error::{invalid_input, Result};
use crate::masks::{apply_mask, BinaryMask};
use crate::model::{log_magnitude_features, EmbeddingNetwork, Mode};

#[derive(Clone, Debug)]
pub struct SeparationResult {
    pub sources: Vec<Waveform>,
    pub mask: BinaryMask,
    /// K-means inertia over the embedding rows; a clustering-quality signal.
    pub embedding_inertia: f64,
}

/// Separate `mixture` into `n_sources` waveforms of the input's length.
/// The mixture must be mono at the model's sample rate; callers holding
/// stereo material must pick a channel explicitly.
pub fn separate(
    network: &EmbeddingNetwork,
    stft_cfg: &StftConfig,
    mixture: &Waveform,
    n_sources: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SeparationResult> {
    separate_with(
        network,
        stft_cfg,
        mixture,
        n_sources,
        &KmeansOptions::default(),
        rng,
    )
}

pub fn separate_with(
    network: &EmbeddingNetwork,
    stft_cfg: &StftConfig,
    mixture: &Waveform,
    n_sources: usize,
    kmeans_opts: &KmeansOptions,
    rng: &mut ChaCha8Rng,
) -> Result<SeparationResult> {
    if n_sources == 0 || n_sources > u8::MAX as usize {
        return Err(invalid_input!("n_sources must be in [1, 255]"));
    }
    if mixture.sample_rate != stft_cfg.sample_rate {
        return Err(invalid_input!(
            "mixture is at {} Hz but the model expects {} Hz",
            mixture.sample_rate,
            stft_cfg.sample_rate
        ));
    }
    let spec = stft(mixture, stft_cfg)?;
    let features = log_magnitude_features(&spec);
    let (embedding, _) = network.forward(&features, Mode::Infer, None)?;
    let clustering = kmeans(&embedding, n_sources, kmeans_opts, rng)?;

    let assignments: Vec<u8> = clustering.assignments.iter().map(|&a| a as u8).collect();
    let mask = BinaryMask::new(assignments, spec.freq_bins(), spec.frames(), n_sources)?;
    let masked = apply_mask(&spec, &mask)?;
    let sources = masked
        .iter()
        .map(|s| istft_with_len(s, mixture.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparationResult {
        sources,
        mask,
        embedding_inertia: clustering.inertia,
    })
}
