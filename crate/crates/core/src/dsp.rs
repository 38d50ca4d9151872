//! STFT analysis/synthesis. Square-root Hann analysis and synthesis windows
//! with hop dividing the FFT size give constant overlap-add, so masked
//! resynthesis is exact on the covered interval.

use alloc::vec;
use alloc::vec::Vec;

use crate::complex::Complex;
use crate::error::{invalid_config, invalid_input, Result};
use crate::fft;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    SqrtHann,
}

/// STFT geometry. `fft_size` is a power of two, `hop` divides it and
/// `fft_size >= 2*hop`, which guarantees the COLA property checked in `new`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl StftConfig {
    pub fn new(fft_size: usize, hop: usize, sample_rate: u32) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 4 {
            return Err(invalid_config!("fft_size {fft_size} must be a power of two >= 4"));
        }
        if hop == 0 || fft_size % hop != 0 {
            return Err(invalid_config!("hop {hop} must divide fft_size {fft_size}"));
        }
        if fft_size < 2 * hop {
            return Err(invalid_config!("fft_size must be at least twice the hop"));
        }
        if sample_rate == 0 {
            return Err(invalid_config!("sample_rate must be positive"));
        }
        let cfg = StftConfig {
            fft_size,
            hop,
            window: Window::SqrtHann,
            sample_rate,
        };
        cfg.check_cola()?;
        Ok(cfg)
    }

    /// 16 kHz, 512-point FFT, 128 hop: 257 frequency rows for 2 s clips.
    pub fn default_16k() -> Self {
        StftConfig::new(512, 128, 16000).expect("default config is valid")
    }

    /// Number of frequency rows of the one-sided spectrum.
    #[inline]
    pub fn freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames fully inside a signal of `len` samples (no centering).
    #[inline]
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.fft_size {
            0
        } else {
            (len - self.fft_size) / self.hop + 1
        }
    }

    /// Center frequency of row `bin` in Hz.
    #[inline]
    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    /// Angular frequency of row `bin` in radians/second.
    #[inline]
    pub fn bin_omega(&self, bin: usize) -> f64 {
        math::TAU * self.bin_hz(bin)
    }

    pub fn analysis_window(&self) -> Vec<f64> {
        let n = self.fft_size as f64;
        (0..self.fft_size)
            .map(|i| math::sqrt(0.5 - 0.5 * math::cos(math::TAU * i as f64 / n)))
            .collect()
    }

    /// The squared window must overlap-add to a constant at this hop.
    fn check_cola(&self) -> Result<()> {
        let w = self.analysis_window();
        let overlaps = self.fft_size / self.hop;
        let expected = overlaps as f64 / 2.0;
        for n in 0..self.hop {
            let mut acc = 0.0;
            for m in 0..overlaps {
                acc += math::sq(w[n + m * self.hop]);
            }
            if math::fabs(acc - expected) > 1e-9 {
                return Err(invalid_config!(
                    "window does not satisfy COLA at hop {}",
                    self.hop
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Waveform::new(vec![0.0; len], sample_rate)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            math::sqrt(self.energy() / self.len() as f64)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|s| s.is_finite())
    }
}

/// Complex time-frequency matrix, stored column-major so that `bins` is the
/// vectorization used by mask targets and embeddings: index = frame*F + bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex>,
    freq_bins: usize,
    frames: usize,
    pub config: StftConfig,
}

impl Spectrogram {
    pub fn zeros(config: StftConfig, frames: usize) -> Self {
        let freq_bins = config.freq_bins();
        Spectrogram {
            bins: vec![Complex::ZERO; freq_bins * frames],
            freq_bins,
            frames,
            config,
        }
    }

    #[inline]
    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Total number of bins F·T.
    #[inline]
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> Complex {
        self.bins[frame * self.freq_bins + bin]
    }

    #[inline]
    pub fn set(&mut self, bin: usize, frame: usize, v: Complex) {
        self.bins[frame * self.freq_bins + bin] = v;
    }

    #[inline]
    pub fn frame(&self, frame: usize) -> &[Complex] {
        &self.bins[frame * self.freq_bins..(frame + 1) * self.freq_bins]
    }

    #[inline]
    pub fn frame_mut(&mut self, frame: usize) -> &mut [Complex] {
        &mut self.bins[frame * self.freq_bins..(frame + 1) * self.freq_bins]
    }

    /// Flat view in vectorization order (bin fastest, frame slowest).
    #[inline]
    pub fn as_slice(&self) -> &[Complex] {
        &self.bins
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.bins
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.freq_bins == other.freq_bins && self.frames == other.frames
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sq()).sum()
    }
}

/// Analysis STFT. Frames lie fully inside the signal; no centering padding.
pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    if x.len() < cfg.fft_size {
        return Err(invalid_input!(
            "signal of {} samples is shorter than one frame ({})",
            x.len(),
            cfg.fft_size
        ));
    }
    if !x.is_finite() {
        return Err(invalid_input!("signal contains non-finite samples"));
    }
    let window = cfg.analysis_window();
    let frames = cfg.num_frames(x.len());
    let f = cfg.freq_bins();
    let mut spec = Spectrogram::zeros(*cfg, frames);
    let mut buf = vec![Complex::ZERO; cfg.fft_size];

    for m in 0..frames {
        let start = m * cfg.hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(x.samples[start + i] * window[i], 0.0);
        }
        fft::fft(&mut buf);
        spec.frame_mut(m).copy_from_slice(&buf[..f]);
    }
    Ok(spec)
}

/// Overlap-add synthesis with the analysis window reused for synthesis.
/// Normalizes by the accumulated squared-window envelope, so an unmodified
/// spectrogram reconstructs the covered samples exactly.
pub fn istft(spec: &Spectrogram) -> Result<Waveform> {
    let cfg = &spec.config;
    let f = cfg.freq_bins();
    if spec.freq_bins != f {
        return Err(invalid_input!(
            "spectrogram has {} rows but config implies {}",
            spec.freq_bins,
            f
        ));
    }
    if spec.frames == 0 {
        return Ok(Waveform::new(Vec::new(), cfg.sample_rate));
    }
    let window = cfg.analysis_window();
    let out_len = cfg.fft_size + (spec.frames - 1) * cfg.hop;
    let mut num = vec![0.0; out_len];
    let mut den = vec![0.0; out_len];
    let mut buf = vec![Complex::ZERO; cfg.fft_size];

    for m in 0..spec.frames {
        let frame = spec.frame(m);
        buf[..f].copy_from_slice(frame);
        // Rebuild the redundant negative frequencies by conjugate symmetry.
        for k in f..cfg.fft_size {
            buf[k] = frame[cfg.fft_size - k].conj();
        }
        fft::ifft(&mut buf);
        let start = m * cfg.hop;
        for i in 0..cfg.fft_size {
            num[start + i] += window[i] * buf[i].re;
            den[start + i] += window[i] * window[i];
        }
    }

    let samples = num
        .iter()
        .zip(den.iter())
        .map(|(&n, &d)| if d > 1e-12 { n / d } else { 0.0 })
        .collect();
    Ok(Waveform::new(samples, cfg.sample_rate))
}

/// `istft` followed by zero-padding or truncation to exactly `len` samples.
pub fn istft_with_len(spec: &Spectrogram, len: usize) -> Result<Waveform> {
    let mut w = istft(spec)?;
    w.samples.resize(len, 0.0);
    Ok(w)
}
