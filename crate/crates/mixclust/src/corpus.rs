//! Source material providers. The synthetic corpus keeps the pipeline
//! self-contained; the directory corpus ingests real speech laid out as
//! one WAV per utterance with TIMIT-style speaker names (leading 'f'/'m').

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mixclust_core::dsp::Waveform;
use mixclust_core::rng;
use mixclust_core::synth::{Gender, Voice};

use crate::error::{AppError, Result};
use crate::wav::read_wav;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpeakerId(pub String);

pub trait SourceProvider {
    fn speakers(&self, gender: Gender) -> Vec<SpeakerId>;

    /// A `len`-sample utterance for `speaker`, deterministic in
    /// `utterance_seed`. Rates must match exactly; nothing resamples.
    fn utterance(
        &self,
        speaker: &SpeakerId,
        utterance_seed: u64,
        len: usize,
        rate: u32,
    ) -> Result<Waveform>;
}

/// Deterministic harmonic voices, as many per gender as configured.
pub struct SyntheticCorpus {
    seed: u64,
    per_gender: u32,
}

impl SyntheticCorpus {
    pub fn new(seed: u64, per_gender: u32) -> Self {
        SyntheticCorpus { seed, per_gender }
    }

    fn voice_for(&self, speaker: &SpeakerId) -> Result<Voice> {
        let name = &speaker.0;
        let (gender, idx) = parse_speaker_name(name)?;
        if idx >= self.per_gender {
            return Err(AppError::Input(format!("unknown synthetic speaker {name}")));
        }
        Ok(Voice::new(self.seed, gender, idx))
    }
}

fn parse_speaker_name(name: &str) -> Result<(Gender, u32)> {
    let gender = match name.chars().next() {
        Some('f') | Some('F') => Gender::Female,
        Some('m') | Some('M') => Gender::Male,
        _ => {
            return Err(AppError::Input(format!(
                "speaker '{name}' does not start with f/m"
            )))
        }
    };
    let idx: u32 = name[1..]
        .parse()
        .map_err(|_| AppError::Input(format!("speaker '{name}' has no numeric suffix")))?;
    Ok((gender, idx))
}

impl SourceProvider for SyntheticCorpus {
    fn speakers(&self, gender: Gender) -> Vec<SpeakerId> {
        (0..self.per_gender)
            .map(|i| SpeakerId(format!("{}{i:03}", gender.tag())))
            .collect()
    }

    fn utterance(
        &self,
        speaker: &SpeakerId,
        utterance_seed: u64,
        len: usize,
        rate: u32,
    ) -> Result<Waveform> {
        Ok(self.voice_for(speaker)?.utterance(utterance_seed, len, rate))
    }
}

/// Directory of WAV files. Layout: either `<speaker>/<utt>.wav` or flat
/// `<speaker>_<utt>.wav`; speaker names start with 'f' or 'm'.
pub struct WavDirCorpus {
    speakers: BTreeMap<String, Vec<PathBuf>>,
}

impl WavDirCorpus {
    pub fn scan(root: &Path) -> Result<Self> {
        let mut speakers: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        let rd = std::fs::read_dir(root)
            .map_err(|e| AppError::Input(format!("cannot read corpus {}: {e}", root.display())))?;
        for entry in rd {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                let speaker = entry.file_name().to_string_lossy().to_string();
                for sub in std::fs::read_dir(&path)? {
                    let sub = sub?.path();
                    if sub.extension().is_some_and(|e| e == "wav") {
                        speakers.entry(speaker.clone()).or_default().push(sub);
                    }
                }
            } else if path.extension().is_some_and(|e| e == "wav") {
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let speaker = stem.split('_').next().unwrap_or(&stem).to_string();
                speakers.entry(speaker).or_default().push(path);
            }
        }
        for files in speakers.values_mut() {
            files.sort();
        }
        if speakers.is_empty() {
            return Err(AppError::Input(format!(
                "no WAV files under {}",
                root.display()
            )));
        }
        for name in speakers.keys() {
            parse_gender(name)?;
        }
        Ok(WavDirCorpus { speakers })
    }
}

fn parse_gender(name: &str) -> Result<Gender> {
    match name.chars().next() {
        Some('f') | Some('F') => Ok(Gender::Female),
        Some('m') | Some('M') => Ok(Gender::Male),
        _ => Err(AppError::Input(format!(
            "corpus speaker '{name}' must start with f or m to carry a gender"
        ))),
    }
}

impl SourceProvider for WavDirCorpus {
    fn speakers(&self, gender: Gender) -> Vec<SpeakerId> {
        self.speakers
            .keys()
            .filter(|name| parse_gender(name).ok() == Some(gender))
            .map(|name| SpeakerId(name.clone()))
            .collect()
    }

    fn utterance(
        &self,
        speaker: &SpeakerId,
        utterance_seed: u64,
        len: usize,
        rate: u32,
    ) -> Result<Waveform> {
        use rand::Rng;
        let files = self
            .speakers
            .get(&speaker.0)
            .ok_or_else(|| AppError::Input(format!("unknown speaker {}", speaker.0)))?;
        let mut r = rng::stream_indexed(utterance_seed, "wav-utt", 0);
        let file = &files[r.gen_range(0..files.len())];
        let content = read_wav(file)?;
        if content.sample_rate != rate {
            return Err(AppError::Input(format!(
                "{} is at {} Hz, pipeline runs at {rate} Hz (no resampling)",
                file.display(),
                content.sample_rate
            )));
        }
        let mut mono = content.channels[0].clone();
        if mono.is_empty() {
            return Err(AppError::Input(format!("{} is empty", file.display())));
        }
        // Tile short files, then cut a random window of the target length.
        while mono.len() < len {
            let take = (len - mono.len()).min(mono.len());
            let copy: Vec<f64> = mono[..take].to_vec();
            mono.extend_from_slice(&copy);
        }
        let start = if mono.len() > len {
            r.gen_range(0..=mono.len() - len)
        } else {
            0
        };
        let mut cut: Vec<f64> = mono[start..start + len].to_vec();
        let rms = (cut.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
        if rms > 1e-9 {
            let gain = 0.1 / rms;
            for v in cut.iter_mut() {
                *v *= gain;
            }
        }
        Ok(Waveform::new(cut, rate))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wav::{write_wav, SampleFormat, WavContent};
    use tempfile::tempdir;

    #[test]
    fn synthetic_corpus_lists_and_renders() {
        let corpus = SyntheticCorpus::new(7, 3);
        let f = corpus.speakers(Gender::Female);
        assert_eq!(f.len(), 3);
        assert_eq!(f[0].0, "f000");
        let u = corpus.utterance(&f[1], 5, 4000, 16000).unwrap();
        assert_eq!(u.len(), 4000);
        let again = corpus.utterance(&f[1], 5, 4000, 16000).unwrap();
        assert_eq!(u.samples, again.samples);
    }

    #[test]
    fn wav_dir_corpus_scans_flat_layout() {
        let dir = tempdir().unwrap();
        for name in ["f001_a.wav", "f001_b.wav", "m001_a.wav"] {
            let w = WavContent {
                channels: vec![(0..8000).map(|i| (i as f64 * 0.01).sin() * 0.4).collect()],
                sample_rate: 16000,
            };
            write_wav(&dir.path().join(name), &w, SampleFormat::Float32).unwrap();
        }
        let corpus = WavDirCorpus::scan(dir.path()).unwrap();
        assert_eq!(corpus.speakers(Gender::Female).len(), 1);
        assert_eq!(corpus.speakers(Gender::Male).len(), 1);
        let u = corpus
            .utterance(&SpeakerId("f001".into()), 3, 12000, 16000)
            .unwrap();
        assert_eq!(u.len(), 12000);
        // Rate mismatch is an error, not a resample.
        assert!(corpus
            .utterance(&SpeakerId("f001".into()), 3, 1000, 8000)
            .is_err());
    }

    #[test]
    fn ungendered_speaker_names_are_rejected() {
        let dir = tempdir().unwrap();
        let w = WavContent {
            channels: vec![vec![0.1; 100]],
            sample_rate: 16000,
        };
        write_wav(&dir.path().join("x001_a.wav"), &w, SampleFormat::Float32).unwrap();
        assert!(WavDirCorpus::scan(dir.path()).is_err());
    }
}
