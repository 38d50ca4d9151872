//! Normalized phase difference between the two microphone channels: the
//! per-bin inter-channel phase angle divided by the angular frequency, which
//! turns phase into an inter-mic delay estimate in seconds. With the mic
//! spacing capped at one sample of travel time the angle never wraps, so the
//! principal value is the true value.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::Spectrogram;
use crate::error::{invalid_input, Result};
use crate::math;

/// Per-bin delay estimates plus a validity map. Entries are invalid on the
/// DC row (no phase reference) and where both channels sit below the silence
/// floor relative to the loudest bin of their frame.
#[derive(Clone, Debug)]
pub struct NpdMap {
    values: Vec<f64>,
    valid: Vec<bool>,
    freq_bins: usize,
    frames: usize,
}

impl NpdMap {
    #[inline]
    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn num_bins(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn value(&self, bin: usize, frame: usize) -> f64 {
        self.values[frame * self.freq_bins + bin]
    }

    #[inline]
    pub fn is_valid(&self, bin: usize, frame: usize) -> bool {
        self.valid[frame * self.freq_bins + bin]
    }

    /// Flat views in vectorization order (bin fastest).
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid delay estimates only.
    pub fn valid_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.valid.iter())
            .filter_map(|(&v, &ok)| ok.then_some(v))
            .collect()
    }
}

/// Seconds-of-delay estimate per STFT bin: angle(M1·conj(M2)) / omega with
/// omega in radians/second. `silence_floor_db` is relative to each frame's
/// loudest bin; quieter bins carry numerical-noise phase and are marked
/// invalid rather than reported.
pub fn normalized_phase_difference(
    m1: &Spectrogram,
    m2: &Spectrogram,
    silence_floor_db: f64,
) -> Result<NpdMap> {
    if !m1.same_shape(m2) || m1.config != m2.config {
        return Err(invalid_input!("channel spectrograms disagree in shape or config"));
    }
    let f = m1.freq_bins();
    let t = m1.frames();
    let floor_gain = math::pow(10.0, silence_floor_db / 20.0);
    let mut values = vec![0.0; f * t];
    let mut valid = vec![false; f * t];

    for frame in 0..t {
        let a = m1.frame(frame);
        let b = m2.frame(frame);
        let mut frame_max = 0.0f64;
        for bin in 0..f {
            frame_max = frame_max.max(a[bin].abs()).max(b[bin].abs());
        }
        let floor = frame_max * floor_gain;
        for bin in 1..f {
            let (ma, mb) = (a[bin].abs(), b[bin].abs());
            if frame_max == 0.0 || (ma < floor && mb < floor) {
                continue;
            }
            let omega = m1.config.bin_omega(bin);
            let angle = (a[bin] * b[bin].conj()).arg();
            let idx = frame * f + bin;
            values[idx] = angle / omega;
            valid[idx] = true;
        }
    }
    Ok(NpdMap {
        values,
        valid,
        freq_bins: f,
        frames: t,
    })
}

/// Median of the valid delay estimates weighted by per-bin channel energy.
pub fn energy_weighted_median(npd: &NpdMap, m1: &Spectrogram, m2: &Spectrogram) -> Option<f64> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for frame in 0..npd.frames() {
        for bin in 0..npd.freq_bins() {
            if npd.is_valid(bin, frame) {
                let w = m1.get(bin, frame).norm_sq() + m2.get(bin, frame).norm_sq();
                pairs.push((npd.value(bin, frame), w));
            }
        }
    }
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= total / 2.0 {
            return Some(*v);
        }
    }
    pairs.last().map(|p| p.0)
}

/// Counts of valid NPD values over [-range, +range] seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + i as f64 * width, self.lo + (i + 1) as f64 * width)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Moving-average smoothing with an odd window width.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        debug_assert!(window % 2 == 1);
        let half = window / 2;
        let n = self.counts.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(n);
                self.counts[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
            })
            .collect()
    }
}

/// Strictly-greater-than-both-neighbours maxima; edges count against a
/// virtual minus-infinity neighbour.
pub fn local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { values[i + 1] };
            values[i] > left && values[i] > right
        })
        .count()
}

/// Histogram of valid NPD values. `range_s` is the half-width in seconds;
/// values outside [-range, +range] are not counted. An all-invalid map gives
/// all-zero counts, not an error.
pub fn npd_histogram(npd: &NpdMap, bin_count: usize, range_s: f64) -> Result<Histogram> {
    if bin_count < 2 {
        return Err(invalid_input!("histogram needs at least 2 bins"));
    }
    if !(range_s > 0.0) {
        return Err(invalid_input!("histogram range must be positive"));
    }
    let (lo, hi) = (-range_s, range_s);
    let mut counts = vec![0u64; bin_count];
    let width = (hi - lo) / bin_count as f64;
    for (&v, &ok) in npd.values().iter().zip(npd.valid().iter()) {
        if !ok || v < lo || v > hi {
            continue;
        }
        let idx = ((v - lo) / width) as usize;
        counts[idx.min(bin_count - 1)] += 1;
    }
    Ok(Histogram { lo, hi, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::Complex;
    use crate::dsp::{stft, StftConfig, Waveform};
    use crate::spatial::{render_stereo_mixture, Geometry, Scene};
    use crate::synth::{Gender, Voice};
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(seed: u64, frames: usize) -> Spectrogram {
        let cfg = StftConfig::default_16k();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Spectrogram::zeros(cfg, frames);
        for v in s.as_mut_slice() {
            *v = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        s
    }

    use crate::dsp::Spectrogram;

    #[test]
    fn identical_channels_give_zero_delay() {
        let s = random_spec(1, 5);
        let npd = normalized_phase_difference(&s, &s, -60.0).unwrap();
        assert!(npd.valid_count() > 0);
        for frame in 0..npd.frames() {
            for bin in 0..npd.freq_bins() {
                if npd.is_valid(bin, frame) {
                    assert_eq!(npd.value(bin, frame), 0.0);
                }
            }
        }
    }

    #[test]
    fn dc_row_is_invalid() {
        let s = random_spec(2, 3);
        let npd = normalized_phase_difference(&s, &s, -60.0).unwrap();
        for frame in 0..npd.frames() {
            assert!(!npd.is_valid(0, frame));
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = random_spec(3, 4);
        let b = random_spec(3, 5);
        assert!(normalized_phase_difference(&a, &b, -60.0).is_err());
    }

    #[test]
    fn scale_invariance() {
        let a = random_spec(4, 4);
        let b = random_spec(5, 4);
        let base = normalized_phase_difference(&a, &b, -60.0).unwrap();
        let c = Complex::new(-1.3, 2.1);
        let mut ac = a.clone();
        let mut bc = b.clone();
        for v in ac.as_mut_slice() {
            *v = *v * c;
        }
        for v in bc.as_mut_slice() {
            *v = *v * c;
        }
        let scaled = normalized_phase_difference(&ac, &bc, -60.0).unwrap();
        for i in 0..base.num_bins() {
            assert_eq!(base.valid()[i], scaled.valid()[i]);
            if base.valid()[i] {
                assert!(math::fabs(base.values()[i] - scaled.values()[i]) < 1e-12);
            }
        }
    }

    #[test]
    fn anti_symmetry() {
        let a = random_spec(6, 4);
        let b = random_spec(7, 4);
        let fwd = normalized_phase_difference(&a, &b, -60.0).unwrap();
        let rev = normalized_phase_difference(&b, &a, -60.0).unwrap();
        for i in 0..fwd.num_bins() {
            if fwd.valid()[i] {
                assert!(math::fabs(fwd.values()[i] + rev.values()[i]) < 1e-12);
            }
        }
    }

    /// A pure tone at an exact bin center makes the phase ratio exact in
    /// every bin that carries the tone's energy.
    #[test]
    fn planted_delay_is_recovered_per_bin() {
        let geom = Geometry::default_16k();
        let cfg = StftConfig::default_16k();
        let delay = 20e-6;
        let angle = geom.angle_for_delay(delay).unwrap();
        let scene = Scene::from_polar(&geom, &[angle], &[1.0]).unwrap();
        let freq = cfg.bin_hz(200); // 6250 Hz
        let src = Waveform::new(
            (0..16000)
                .map(|t| math::cos(math::TAU * freq * t as f64 / 16000.0))
                .collect(),
            16000,
        );
        let mix = render_stereo_mixture(&[src], &scene, &[]).unwrap();
        let m1 = stft(&mix.mic1, &cfg).unwrap();
        let m2 = stft(&mix.mic2, &cfg).unwrap();
        // A floor this high keeps only tone-centered bins valid; leakage
        // bins next to the tone report the neighbouring row's frequency
        // ratio instead of the planted delay.
        let npd = normalized_phase_difference(&m1, &m2, -3.0).unwrap();
        assert!(npd.valid_count() > 0);
        for frame in 0..npd.frames() {
            for bin in 0..npd.freq_bins() {
                if npd.is_valid(bin, frame) {
                    assert!(
                        math::fabs(npd.value(bin, frame) - delay) < 1e-7,
                        "bin {bin} frame {frame}: {}",
                        npd.value(bin, frame)
                    );
                }
            }
        }
    }

    #[test]
    fn planted_delay_weighted_median_within_two_percent() {
        let geom = Geometry::default_16k();
        let cfg = StftConfig::default_16k();
        for (i, &delay_us) in [-25.0, -15.0, -5.0, 5.0, 15.0, 25.0].iter().enumerate() {
            let delay = delay_us * 1e-6;
            let angle = geom.angle_for_delay(delay).unwrap();
            let scene = Scene::from_polar(&geom, &[angle], &[1.0]).unwrap();
            // Broadband material puts content at every row's center, so the
            // per-bin delay estimates concentrate tightly on the truth.
            let src = crate::synth::noise_source(i as u64, 32000, 16000);
            let mix = render_stereo_mixture(&[src], &scene, &[]).unwrap();
            let m1 = stft(&mix.mic1, &cfg).unwrap();
            let m2 = stft(&mix.mic2, &cfg).unwrap();
            let npd = normalized_phase_difference(&m1, &m2, -60.0).unwrap();
            let med = energy_weighted_median(&npd, &m1, &m2).unwrap();
            assert!(
                math::fabs(med - delay) <= 0.02 * math::fabs(delay),
                "delay {delay_us} us: median {med}"
            );
        }
    }

    #[test]
    fn planted_delay_voice_median_close() {
        let geom = Geometry::default_16k();
        let cfg = StftConfig::default_16k();
        let delay = 20e-6;
        let angle = geom.angle_for_delay(delay).unwrap();
        let scene = Scene::from_polar(&geom, &[angle], &[1.0]).unwrap();
        let voice = Voice::new(31, Gender::Female, 2);
        let src = voice.utterance(0, 32000, 16000);
        let mix = render_stereo_mixture(&[src], &scene, &[]).unwrap();
        let m1 = stft(&mix.mic1, &cfg).unwrap();
        let m2 = stft(&mix.mic2, &cfg).unwrap();
        let npd = normalized_phase_difference(&m1, &m2, -60.0).unwrap();
        let med = energy_weighted_median(&npd, &m1, &m2).unwrap();
        // Harmonic material lands between coarse low rows, so the median is
        // looser than for broadband sources.
        assert!(math::fabs(med - delay) <= 0.05 * delay, "median {med}");
    }

    #[test]
    fn two_speaker_histogram_has_two_modes() {
        let geom = Geometry::default_16k();
        let cfg = StftConfig::default_16k();
        let scene = Scene::from_polar(&geom, &[30.0, 120.0], &[1.5, 1.5]).unwrap();
        let va = Voice::new(8, Gender::Female, 0);
        let vb = Voice::new(8, Gender::Male, 0);
        let sources = [va.utterance(0, 32000, 16000), vb.utterance(0, 32000, 16000)];
        let mix = render_stereo_mixture(&sources, &scene, &[]).unwrap();
        let m1 = stft(&mix.mic1, &cfg).unwrap();
        let m2 = stft(&mix.mic2, &cfg).unwrap();
        let npd = normalized_phase_difference(&m1, &m2, -30.0).unwrap();
        let hist = npd_histogram(&npd, 41, 1.2 * geom.max_delay_s()).unwrap();
        let peaks = local_maxima(&hist.smoothed(3));
        assert_eq!(peaks, 2, "histogram: {:?}", hist.counts);
    }

    #[test]
    fn zero_map_gives_single_spike() {
        let s = random_spec(9, 3);
        let npd = normalized_phase_difference(&s, &s, -60.0).unwrap();
        let hist = npd_histogram(&npd, 11, 1e-5).unwrap();
        let nonzero: Vec<usize> = hist
            .counts
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c > 0).then_some(i))
            .collect();
        assert_eq!(nonzero.len(), 1);
        let (lo, hi) = hist.bin_edges(nonzero[0]);
        assert!(lo <= 0.0 && 0.0 <= hi);
    }

    #[test]
    fn invalid_everywhere_gives_zero_counts() {
        let cfg = StftConfig::default_16k();
        let s = Spectrogram::zeros(cfg, 4);
        let npd = normalized_phase_difference(&s, &s, -60.0).unwrap();
        assert_eq!(npd.valid_count(), 0);
        let hist = npd_histogram(&npd, 11, 1e-5).unwrap();
        assert_eq!(hist.total(), 0);
        assert!(energy_weighted_median(&npd, &s, &s).is_none());
    }
}
