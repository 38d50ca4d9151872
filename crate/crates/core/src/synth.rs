//! Built-in synthetic source material: vowel-like harmonic voices with
//! vibrato, formant resonances, syllabic amplitude modulation and
//! resonator-filtered noise bursts. Keeps the repository self-contained
//! when no speech corpus is mounted. A voice identity pins the fundamental
//! (by gender band), formant layout and vibrato; each utterance then draws
//! its own phases, drift and burst pattern.
//!
//! Formants concentrate each voice's energy in a few bands of its own,
//! which keeps simultaneous voices mostly disjoint across time-frequency
//! bins, the regime binary masking needs.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::Waveform;
use crate::math;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn tag(&self) -> &'static str {
        match self {
            Gender::Female => "f",
            Gender::Male => "m",
        }
    }

    /// Fundamental-frequency band in Hz.
    pub fn f0_range(&self) -> (f64, f64) {
        match self {
            Gender::Female => (165.0, 255.0),
            Gender::Male => (90.0, 155.0),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Formant {
    center_hz: f64,
    bandwidth_hz: f64,
    gain: f64,
}

/// A deterministic synthetic voice.
#[derive(Clone, Debug)]
pub struct Voice {
    pub id: String,
    pub gender: Gender,
    f0_hz: f64,
    vibrato_hz: f64,
    vibrato_depth: f64,
    formants: [Formant; 3],
    noise_level: f64,
    noise_center_hz: f64,
    seed: u64,
}

impl Voice {
    /// Voice `index` of `gender` derived from the corpus seed. Ids look like
    /// TIMIT speaker codes ("f012"), which the gender grouping keys off.
    pub fn new(corpus_seed: u64, gender: Gender, index: u32) -> Voice {
        let seed = rng::sub_seed_indexed(
            corpus_seed,
            match gender {
                Gender::Female => "voice-f",
                Gender::Male => "voice-m",
            },
            index as u64,
        );
        let mut r = rng::stream(seed, "identity");
        let (lo, hi) = gender.f0_range();
        let f0_hz = r.gen_range(lo..hi);
        let formants = [
            Formant {
                center_hz: r.gen_range(280.0..900.0),
                bandwidth_hz: r.gen_range(80.0..180.0),
                gain: 1.0,
            },
            Formant {
                center_hz: r.gen_range(1000.0..2400.0),
                bandwidth_hz: r.gen_range(120.0..260.0),
                gain: r.gen_range(0.35..0.8),
            },
            Formant {
                center_hz: r.gen_range(2600.0..4200.0),
                bandwidth_hz: r.gen_range(180.0..380.0),
                gain: r.gen_range(0.1..0.3),
            },
        ];
        Voice {
            id: alloc::format!("{}{index:03}", gender.tag()),
            gender,
            f0_hz,
            vibrato_hz: r.gen_range(4.0..6.5),
            vibrato_depth: r.gen_range(0.004..0.012),
            formants,
            noise_level: r.gen_range(0.03..0.07),
            noise_center_hz: r.gen_range(2500.0..6000.0),
            seed,
        }
    }

    pub fn f0_hz(&self) -> f64 {
        self.f0_hz
    }

    fn formant_gain(&self, f: f64) -> f64 {
        let mut g = 0.02; // spectral floor so low partials survive
        for fm in &self.formants {
            let d = (f - fm.center_hz) / fm.bandwidth_hz;
            g += fm.gain / (1.0 + d * d);
        }
        g
    }

    /// Render utterance `utterance` of this voice: `len` samples at `rate`.
    /// Deterministic in (voice, utterance index). Every 0.5 s window carries
    /// energy, so all sources stay active throughout a clip.
    pub fn utterance(&self, utterance: u64, len: usize, rate: u32) -> Waveform {
        let mut r = rng::stream_indexed(self.seed, "utterance", utterance);
        let fs = rate as f64;
        let max_f = (0.42 * fs).min(5200.0);
        let n_harm = ((max_f / self.f0_hz) as usize).clamp(1, 48);

        let amps: Vec<f64> = (1..=n_harm)
            .map(|k| {
                let f = k as f64 * self.f0_hz;
                math::pow(k as f64, -0.5) * self.formant_gain(f) * r.gen_range(0.8..1.0)
            })
            .collect();
        let phases: Vec<f64> = (0..n_harm).map(|_| r.gen_range(0.0..math::TAU)).collect();
        let vib_phase = r.gen_range(0.0..math::TAU);
        let drift = r.gen_range(-0.02..0.02);
        // Syllable-like modulation: fast enough that every half-second
        // window contains a strong stretch.
        let syllable_hz = r.gen_range(2.2..4.5);
        let syllable_phase = r.gen_range(0.0..math::TAU);
        let wander_hz = r.gen_range(0.3..0.9);
        let wander_phase = r.gen_range(0.0..math::TAU);

        let mut samples = Vec::with_capacity(len);
        let mut phase_acc = 0.0; // integral of the instantaneous f0
        let clip_secs = (len as f64 / fs).max(1e-9);
        for t in 0..len {
            let time = t as f64 / fs;
            let f_inst = self.f0_hz
                * (1.0
                    + self.vibrato_depth * math::sin(math::TAU * self.vibrato_hz * time + vib_phase)
                    + drift * time / clip_secs);
            phase_acc += math::TAU * f_inst / fs;
            let mut v = 0.0;
            for (k, (&a, &p)) in amps.iter().zip(phases.iter()).enumerate() {
                v += a * math::sin((k + 1) as f64 * phase_acc + p);
            }
            let syllable =
                0.45 + 0.55 * math::sq(math::sin(math::TAU * syllable_hz * time + syllable_phase));
            let wander = 0.8 + 0.2 * math::sin(math::TAU * wander_hz * time + wander_phase);
            samples.push(v * syllable * wander);
        }

        // Narrowband noise bursts through a two-pole resonator, sitting in
        // the voice's own noise band.
        let n_bursts = (r.gen_range(3..8) * len / rate as usize).max(1);
        let mut noise = alloc::vec![0.0; len];
        for _ in 0..n_bursts {
            let burst_len = r.gen_range((rate / 50) as usize..(rate / 10) as usize);
            let start = r.gen_range(0..len.saturating_sub(burst_len).max(1));
            for i in 0..burst_len.min(len - start) {
                let ramp = math::sin(math::PI * i as f64 / burst_len as f64);
                noise[start + i] += ramp * r.gen_range(-1.0..1.0);
            }
        }
        resonate(&mut noise, self.noise_center_hz, 0.97, fs);

        let tone_rms = rms(&samples);
        let noise_rms = rms(&noise).max(1e-12);
        let noise_gain = self.noise_level * tone_rms / noise_rms;
        for (s, n) in samples.iter_mut().zip(noise.iter()) {
            *s += noise_gain * n;
        }

        // Normalize to a fixed RMS so mixture weights dominate loudness.
        let gain = 0.1 / rms(&samples).max(1e-12);
        for s in samples.iter_mut() {
            *s *= gain;
        }
        Waveform::new(samples, rate)
    }
}

/// In-place two-pole resonator: concentrates white noise around
/// `center_hz` with pole radius `radius`.
fn resonate(x: &mut [f64], center_hz: f64, radius: f64, fs: f64) {
    let omega = math::TAU * center_hz / fs;
    let a1 = 2.0 * radius * math::cos(omega);
    let a2 = -radius * radius;
    let mut y1 = 0.0;
    let mut y2 = 0.0;
    for v in x.iter_mut() {
        let y = *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        math::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
    }
}

/// White noise source at fixed RMS; useful as broadband test material.
pub fn noise_source(seed: u64, len: usize, rate: u32) -> Waveform {
    let mut r = rng::stream(seed, "noise-source");
    let mut samples: Vec<f64> = (0..len).map(|_| r.gen_range(-1.0..1.0)).collect();
    let gain = 0.1 / rms(&samples).max(1e-12);
    for s in samples.iter_mut() {
        *s *= gain;
    }
    Waveform::new(samples, rate)
}
