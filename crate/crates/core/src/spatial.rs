//! Anechoic two-microphone scene model. Sources are far-field plane waves
//! hitting a closely spaced mic pair, so each source contributes a pure
//! per-source delay and gain. Delays are applied in the frequency domain as
//! phase ramps over the full-length DFT, which realizes exact fractional
//! delays; circular edge effects stay confined to under one sample.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::complex::Complex;
use crate::dsp::Waveform;
use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::fft;
use crate::math;

/// Microphone-pair geometry and the sampling constraints for scenes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub mic_distance_m: f64,
    pub speed_of_sound_mps: f64,
    pub sample_rate: u32,
    pub min_angle_separation_deg: f64,
    pub room_half_extent_m: f64,
}

impl Geometry {
    pub fn new(
        mic_distance_m: f64,
        speed_of_sound_mps: f64,
        sample_rate: u32,
        min_angle_separation_deg: f64,
        room_half_extent_m: f64,
    ) -> Result<Self> {
        let g = Geometry {
            mic_distance_m,
            speed_of_sound_mps,
            sample_rate,
            min_angle_separation_deg,
            room_half_extent_m,
        };
        g.validate()?;
        Ok(g)
    }

    /// 1 cm pair at 16 kHz in a 3 m room, 10 degrees minimum separation.
    pub fn default_16k() -> Self {
        Geometry {
            mic_distance_m: 0.01,
            speed_of_sound_mps: 343.0,
            sample_rate: 16000,
            min_angle_separation_deg: 10.0,
            room_half_extent_m: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mic_distance_m <= 0.0 || self.speed_of_sound_mps <= 0.0 {
            return Err(invalid_config!(
                "mic distance and speed of sound must be positive"
            ));
        }
        if self.sample_rate == 0 {
            return Err(invalid_config!("sample rate must be positive"));
        }
        // Keeps the inter-mic delay at or below one sample, which in turn
        // keeps the phase difference unwrapped across the whole band.
        let max_delay_samples =
            self.mic_distance_m * self.sample_rate as f64 / self.speed_of_sound_mps;
        if max_delay_samples > 1.0 + 1e-12 {
            return Err(invalid_config!(
                "max inter-mic delay is {max_delay_samples:.3} samples; must be <= 1"
            ));
        }
        if self.min_angle_separation_deg <= 0.0 {
            return Err(invalid_config!("min angle separation must be positive"));
        }
        if self.room_half_extent_m <= 0.0 {
            return Err(invalid_config!("room half extent must be positive"));
        }
        Ok(())
    }

    /// Largest possible |delay| in seconds for this mic spacing.
    #[inline]
    pub fn max_delay_s(&self) -> f64 {
        self.mic_distance_m / self.speed_of_sound_mps
    }

    /// Source angle (degrees) whose far-field delay equals `delay_s`.
    pub fn angle_for_delay(&self, delay_s: f64) -> Result<f64> {
        let c = delay_s / self.max_delay_s();
        if !(-1.0..=1.0).contains(&c) {
            return Err(invalid_input!(
                "delay {delay_s} s exceeds the geometric maximum {}",
                self.max_delay_s()
            ));
        }
        Ok(math::atan2(math::sqrt(1.0 - c * c), c) * 180.0 / math::PI)
    }
}

/// One sampled mixture layout: positions, angles, per-source delays and
/// gains. Delay sign convention: positive delay means the source reaches
/// microphone 2 later than microphone 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub positions: Vec<(f64, f64)>,
    pub angles_deg: Vec<f64>,
    pub delays_s: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Scene {
    /// Build a scene from polar coordinates (angles in degrees from the mic
    /// axis, radii in meters). Delays follow the far-field endfire rule
    /// delay = (d/c)·cos(angle); weights decay with inverse distance and are
    /// normalized to sum to one.
    pub fn from_polar(geom: &Geometry, angles_deg: &[f64], radii_m: &[f64]) -> Result<Scene> {
        if angles_deg.is_empty() || angles_deg.len() != radii_m.len() {
            return Err(invalid_input!(
                "angles and radii must be non-empty and equal length"
            ));
        }
        if radii_m
            .iter()
            .any(|&r| r <= 0.0 || r > geom.room_half_extent_m)
        {
            return Err(invalid_input!("radii must lie in (0, room_half_extent]"));
        }
        let positions: Vec<(f64, f64)> = angles_deg
            .iter()
            .zip(radii_m.iter())
            .map(|(&a, &r)| {
                let rad = a * math::PI / 180.0;
                (r * math::cos(rad), r * math::sin(rad))
            })
            .collect();
        let delays_s: Vec<f64> = angles_deg
            .iter()
            .map(|&a| geom.max_delay_s() * math::cos(a * math::PI / 180.0))
            .collect();
        let inv_sum: f64 = radii_m.iter().map(|&r| 1.0 / r).sum();
        let weights: Vec<f64> = radii_m.iter().map(|&r| (1.0 / r) / inv_sum).collect();
        let scene = Scene {
            positions,
            angles_deg: angles_deg.to_vec(),
            delays_s,
            weights,
        };
        scene.validate(geom)?;
        Ok(scene)
    }

    pub fn n_sources(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        let n = self.n_sources();
        if n == 0 {
            return Err(invalid_input!("scene has no sources"));
        }
        if self.positions.len() != n || self.delays_s.len() != n || self.weights.len() != n {
            return Err(invalid_input!("scene field lengths disagree"));
        }
        for i in 0..n {
            for j in i + 1..n {
                let sep = math::fabs(self.angles_deg[i] - self.angles_deg[j]);
                if sep <= geom.min_angle_separation_deg {
                    return Err(invalid_input!(
                        "sources {i} and {j} are {sep:.2} degrees apart; need more than {}",
                        geom.min_angle_separation_deg
                    ));
                }
            }
        }
        let weight_sum: f64 = self.weights.iter().sum();
        if math::fabs(weight_sum - 1.0) > 1e-9 || self.weights.iter().any(|&w| w <= 0.0) {
            return Err(invalid_input!("weights must be positive and sum to one"));
        }
        let max = geom.max_delay_s() + 1e-15;
        if self.delays_s.iter().any(|&d| math::fabs(d) > max) {
            return Err(invalid_input!("a delay exceeds the geometric maximum"));
        }
        Ok(())
    }
}

/// Rejection attempts before a scene draw is declared infeasible.
const MAX_SCENE_ATTEMPTS: usize = 10_000;

/// Draw a scene: angles uniform over [0, 180) degrees, redrawn until every
/// pair is separated by more than the configured minimum; radii uniform over
/// [room_half_extent/4, room_half_extent].
pub fn sample_scene(rng: &mut ChaCha8Rng, n_sources: usize, geom: &Geometry) -> Result<Scene> {
    if n_sources == 0 {
        return Err(invalid_input!("n_sources must be at least 1"));
    }
    geom.validate()?;
    let r_lo = geom.room_half_extent_m / 4.0;
    let r_hi = geom.room_half_extent_m;
    for _ in 0..MAX_SCENE_ATTEMPTS {
        let angles: Vec<f64> = (0..n_sources).map(|_| rng.gen_range(0.0..180.0)).collect();
        let separated = (0..n_sources).all(|i| {
            (i + 1..n_sources)
                .all(|j| math::fabs(angles[i] - angles[j]) > geom.min_angle_separation_deg)
        });
        if !separated {
            continue;
        }
        let radii: Vec<f64> = (0..n_sources).map(|_| rng.gen_range(r_lo..r_hi)).collect();
        return Scene::from_polar(geom, &angles, &radii);
    }
    Err(Error::InfeasibleScene(alloc::format!(
        "could not place {n_sources} sources more than {} degrees apart",
        geom.min_angle_separation_deg
    )))
}

/// Both microphone signals for one scene.
#[derive(Clone, Debug)]
pub struct StereoMixture {
    pub mic1: Waveform,
    pub mic2: Waveform,
    pub scene: Scene,
    pub source_ids: Vec<String>,
}

/// Delay `x` by `delay_s` seconds (negative advances) via a phase ramp over
/// a zero-padded full-length DFT.
pub fn fractional_delay(x: &Waveform, delay_s: f64) -> Waveform {
    if delay_s == 0.0 || x.is_empty() {
        return x.clone();
    }
    let len = x.len();
    let padded = fft::next_pow2(len + 8);
    let mut buf = fft::real_fft_padded(&x.samples, padded);
    let half = padded / 2;
    let df = x.sample_rate as f64 / padded as f64;
    for k in 1..half {
        let ramp = Complex::from_polar(1.0, -math::TAU * (k as f64 * df) * delay_s);
        buf[k] = buf[k] * ramp;
        buf[padded - k] = buf[k].conj();
    }
    // The Nyquist multiplier must stay real for a real output.
    buf[half] = buf[half].scale(math::cos(math::PI * x.sample_rate as f64 * delay_s));
    fft::ifft(&mut buf);
    Waveform::new(buf[..len].iter().map(|c| c.re).collect(), x.sample_rate)
}

/// Render the two-mic mixture: mic 1 is the weighted sum of the sources,
/// mic 2 the weighted sum of the per-source delayed copies.
pub fn render_stereo_mixture(
    sources: &[Waveform],
    scene: &Scene,
    source_ids: &[String],
) -> Result<StereoMixture> {
    if sources.len() != scene.n_sources() {
        return Err(invalid_input!(
            "{} sources provided for a {}-source scene",
            sources.len(),
            scene.n_sources()
        ));
    }
    let len = sources[0].len();
    let rate = sources[0].sample_rate;
    if len == 0 {
        return Err(invalid_input!("sources must be non-empty"));
    }
    for s in sources {
        if s.len() != len || s.sample_rate != rate {
            return Err(invalid_input!("sources must share length and sample rate"));
        }
        if !s.is_finite() {
            return Err(invalid_input!("source contains non-finite samples"));
        }
    }
    let mut mic1 = vec![0.0; len];
    let mut mic2 = vec![0.0; len];
    for (i, src) in sources.iter().enumerate() {
        let a = scene.weights[i];
        for (m, &s) in mic1.iter_mut().zip(src.samples.iter()) {
            *m += a * s;
        }
        let delayed = fractional_delay(src, scene.delays_s[i]);
        for (m, &s) in mic2.iter_mut().zip(delayed.samples.iter()) {
            *m += a * s;
        }
    }
    let ids = if source_ids.len() == sources.len() {
        source_ids.to_vec()
    } else {
        (0..sources.len())
            .map(|i| alloc::format!("src{i}"))
            .collect()
    };
    Ok(StereoMixture {
        mic1: Waveform::new(mic1, rate),
        mic2: Waveform::new(mic2, rate),
        scene: scene.clone(),
        source_ids: ids,
    })
}

/// The weighted source image as seen by microphone 1; this is the clean
/// reference used for dataset materialization and SDR scoring.
pub fn weighted_source_image(source: &Waveform, weight: f64) -> Waveform {
    Waveform::new(
        source.samples.iter().map(|&s| weight * s).collect(),
        source.sample_rate,
    )
}
