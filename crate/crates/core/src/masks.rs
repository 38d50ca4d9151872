//! Binary time-frequency masks and the three training-target variants:
//! the dominant-source oracle mask, the unsupervised binary phase-difference
//! mask from K-means over NPD values, and the raw phase-difference column.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::clustering::{kmeans_1d, KmeansOptions};
use crate::dsp::Spectrogram;
use crate::error::{invalid_input, Result};
use crate::features::NpdMap;
use crate::mat::Mat;

/// Total assignment of every STFT bin to one of `n_sources`, stored in
/// vectorization order (bin fastest, frame slowest), one byte per bin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    assignments: Vec<u8>,
    freq_bins: usize,
    frames: usize,
    n_sources: usize,
}

impl BinaryMask {
    pub fn new(assignments: Vec<u8>, freq_bins: usize, frames: usize, n_sources: usize) -> Result<Self> {
        if assignments.len() != freq_bins * frames {
            return Err(invalid_input!("mask length disagrees with F*T"));
        }
        if n_sources == 0 || n_sources > u8::MAX as usize {
            return Err(invalid_input!("n_sources must be in [1, 255]"));
        }
        if assignments.iter().any(|&a| a as usize >= n_sources) {
            return Err(invalid_input!("assignment out of range"));
        }
        Ok(BinaryMask {
            assignments,
            freq_bins,
            frames,
            n_sources,
        })
    }

    #[inline]
    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> usize {
        self.assignments[frame * self.freq_bins + bin] as usize
    }

    /// Flat view in vectorization order.
    #[inline]
    pub fn assignments(&self) -> &[u8] {
        &self.assignments
    }

    pub fn matches_shape(&self, spec: &Spectrogram) -> bool {
        self.freq_bins == spec.freq_bins() && self.frames == spec.frames()
    }

    /// Compact binary encoding: LE u32 F, LE u32 T, u8 N, then one byte per
    /// bin in vectorization order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(9 + self.assignments.len());
        out.extend_from_slice(&(self.freq_bins as u32).to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.push(self.n_sources as u8);
        out.extend_from_slice(&self.assignments);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 {
            return Err(invalid_input!("mask blob too short"));
        }
        let f = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n = bytes[8] as usize;
        let body = &bytes[9..];
        if body.len() != f * t {
            return Err(invalid_input!("mask blob length disagrees with header"));
        }
        BinaryMask::new(body.to_vec(), f, t, n)
    }
}

/// Training target in vectorized form: a one-hot L×N matrix for the mask
/// kinds, or the raw L×1 phase-difference column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Ds,
    Bpd,
    Rpd,
}

#[derive(Clone, Debug)]
pub enum TargetData {
    /// One-hot rows stored as the hot column index per row.
    OneHot { assignments: Vec<u8>, classes: usize },
    /// Raw feature column.
    Column(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct PartitionTarget {
    pub kind: TargetKind,
    pub data: TargetData,
    rows: usize,
}

impl PartitionTarget {
    pub fn from_mask(kind: TargetKind, mask: &BinaryMask) -> Self {
        debug_assert!(matches!(kind, TargetKind::Ds | TargetKind::Bpd));
        PartitionTarget {
            kind,
            rows: mask.assignments().len(),
            data: TargetData::OneHot {
                assignments: mask.assignments().to_vec(),
                classes: mask.n_sources(),
            },
        }
    }

    /// A raw feature column used directly as the target.
    pub fn column(values: Vec<f64>) -> Self {
        PartitionTarget {
            kind: TargetKind::Rpd,
            rows: values.len(),
            data: TargetData::Column(values),
        }
    }

    /// The raw phase-difference column, expressed in samples of delay so the
    /// target affinities have a usable scale; invalid bins impute 0.
    pub fn rpd(npd: &NpdMap, sample_rate: u32) -> Self {
        let fs = sample_rate as f64;
        let column: Vec<f64> = npd
            .values()
            .iter()
            .zip(npd.valid().iter())
            .map(|(&v, &ok)| if ok { v * fs } else { 0.0 })
            .collect();
        PartitionTarget {
            kind: TargetKind::Rpd,
            rows: column.len(),
            data: TargetData::Column(column),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of target columns C.
    #[inline]
    pub fn cols(&self) -> usize {
        match &self.data {
            TargetData::OneHot { classes, .. } => *classes,
            TargetData::Column(_) => 1,
        }
    }

    /// Densify to an L×C matrix (tests and small problems only).
    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols());
        match &self.data {
            TargetData::OneHot { assignments, .. } => {
                for (r, &a) in assignments.iter().enumerate() {
                    m.set(r, a as usize, 1.0);
                }
            }
            TargetData::Column(col) => {
                for (r, &v) in col.iter().enumerate() {
                    m.set(r, 0, v);
                }
            }
        }
        m
    }
}

/// Oracle mask: each bin goes to the source with the largest weighted
/// magnitude; ties break toward the lowest source index.
pub fn dominant_source_mask(sources: &[Spectrogram], weights: &[f64]) -> Result<BinaryMask> {
    if sources.is_empty() || sources.len() != weights.len() {
        return Err(invalid_input!("need one weight per source spectrogram"));
    }
    if sources.len() > u8::MAX as usize {
        return Err(invalid_input!("too many sources for a byte mask"));
    }
    let first = &sources[0];
    for s in sources {
        if !s.same_shape(first) {
            return Err(invalid_input!("source spectrograms disagree in shape"));
        }
    }
    let f = first.freq_bins();
    let t = first.frames();
    let mut assignments = vec![0u8; f * t];
    for frame in 0..t {
        for bin in 0..f {
            let mut best = 0usize;
            let mut best_mag = f64::NEG_INFINITY;
            for (j, s) in sources.iter().enumerate() {
                let m = weights[j] * s.get(bin, frame).abs();
                if m > best_mag {
                    best_mag = m;
                    best = j;
                }
            }
            assignments[frame * f + bin] = best as u8;
        }
    }
    BinaryMask::new(assignments, f, t, sources.len())
}

/// Unsupervised mask: K-means over the valid NPD values with k = n_sources.
/// Invalid bins go to the centroid nearest an imputed value of zero, and
/// cluster labels are canonicalized by ascending centroid delay.
pub fn bpd_mask(npd: &NpdMap, n_sources: usize, rng: &mut ChaCha8Rng) -> Result<BinaryMask> {
    bpd_mask_with(npd, n_sources, &KmeansOptions::default(), rng)
}

pub fn bpd_mask_with(
    npd: &NpdMap,
    n_sources: usize,
    opts: &KmeansOptions,
    rng: &mut ChaCha8Rng,
) -> Result<BinaryMask> {
    if n_sources == 0 || n_sources > u8::MAX as usize {
        return Err(invalid_input!("n_sources must be in [1, 255]"));
    }
    let valid_values = npd.valid_values();
    if valid_values.len() < n_sources {
        return Err(invalid_input!(
            "{} valid bins cannot seed {n_sources} clusters",
            valid_values.len()
        ));
    }
    let result = kmeans_1d(&valid_values, n_sources, opts, rng)?;

    // Relabel clusters by ascending centroid so labels mean "smallest delay
    // first" regardless of seeding.
    let mut by_value: Vec<usize> = (0..n_sources).collect();
    by_value.sort_by(|&a, &b| result.centroids.get(a, 0).total_cmp(&result.centroids.get(b, 0)));
    let mut relabel = vec![0u8; n_sources];
    for (new, &old) in by_value.iter().enumerate() {
        relabel[old] = new as u8;
    }

    let nearest_to = |v: f64| -> u8 {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..n_sources {
            let d = crate::math::sq(v - result.centroids.get(c, 0));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        relabel[best]
    };
    let zero_label = nearest_to(0.0);

    let mut assignments = vec![0u8; npd.num_bins()];
    let mut cursor = 0usize;
    for (i, (&ok, a)) in npd.valid().iter().zip(assignments.iter_mut()).enumerate() {
        let _ = i;
        if ok {
            *a = relabel[result.assignments[cursor]];
            cursor += 1;
        } else {
            *a = zero_label;
        }
    }
    BinaryMask::new(assignments, npd.freq_bins(), npd.frames(), n_sources)
}

/// Split a mixture spectrogram into per-source spectrograms. The outputs
/// partition the input: each bin is copied into exactly one output.
pub fn apply_mask(mixture: &Spectrogram, mask: &BinaryMask) -> Result<Vec<Spectrogram>> {
    if !mask.matches_shape(mixture) {
        return Err(invalid_input!("mask and spectrogram shapes disagree"));
    }
    let mut outputs: Vec<Spectrogram> =
        (0..mask.n_sources()).map(|_| Spectrogram::zeros(mixture.config, mixture.frames())).collect();
    for frame in 0..mixture.frames() {
        for bin in 0..mixture.freq_bins() {
            let s = mask.get(bin, frame);
            outputs[s].set(bin, frame, mixture.get(bin, frame));
        }
    }
    Ok(outputs)
}

/// Fraction of bins on which two masks agree, maximized over label
/// permutations (labels are arbitrary), optionally restricted to bins whose
/// energy is at least `energy_floor` of their frame's total.
pub fn mask_agreement(
    a: &BinaryMask,
    b: &BinaryMask,
    energy: Option<(&Spectrogram, f64)>,
) -> Result<f64> {
    if a.freq_bins() != b.freq_bins() || a.frames() != b.frames() || a.n_sources() != b.n_sources()
    {
        return Err(invalid_input!("masks disagree in shape or source count"));
    }
    let n = a.n_sources();
    if n > 4 {
        return Err(invalid_input!("agreement supports up to 4 sources"));
    }
    let f = a.freq_bins();
    let considered: Vec<usize> = match energy {
        None => (0..a.assignments().len()).collect(),
        Some((spec, floor)) => {
            if !a.matches_shape(spec) {
                return Err(invalid_input!("energy spectrogram shape disagrees"));
            }
            let mut keep = Vec::new();
            for frame in 0..spec.frames() {
                let total: f64 = (0..f).map(|bin| spec.get(bin, frame).norm_sq()).sum();
                if total <= 0.0 {
                    continue;
                }
                for bin in 0..f {
                    if spec.get(bin, frame).norm_sq() >= floor * total {
                        keep.push(frame * f + bin);
                    }
                }
            }
            keep
        }
    };
    if considered.is_empty() {
        return Ok(1.0);
    }
    let mut best = 0usize;
    for perm in crate::eval::permutations(n) {
        let hits = considered
            .iter()
            .filter(|&&i| perm[a.assignments()[i] as usize] == b.assignments()[i] as usize)
            .count();
        best = best.max(hits);
    }
    Ok(best as f64 / considered.len() as f64)
}
