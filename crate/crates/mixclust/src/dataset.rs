//! Dataset materialization: sample scenes, render stereo mixtures and
//! weighted per-source references, write WAVs, assemble the manifest.
//! Splits never share speakers. Generation is deterministic in the seed and
//! parallel across clips, each of which derives its own sub-seed.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use mixclust_core::rng;
use mixclust_core::spatial::{render_stereo_mixture, sample_scene, weighted_source_image, Geometry};
use mixclust_core::synth::Gender;

use crate::corpus::{SourceProvider, SpeakerId};
use crate::error::{AppError, Result};
use crate::manifest::{DatasetManifest, GenderGroup, ManifestEntry, Split};
use crate::wav::{write_wav, SampleFormat, WavContent};

#[derive(Clone, Debug)]
pub struct DatasetSpec {
    pub n_sources: usize,
    pub gender_group: GenderGroup,
    pub train: usize,
    pub eval: usize,
    pub test: usize,
    pub clip_seconds: f64,
}

impl DatasetSpec {
    fn counts(&self) -> [(Split, usize); 3] {
        [
            (Split::Train, self.train),
            (Split::Eval, self.eval),
            (Split::Test, self.test),
        ]
    }

    /// Worst-case speakers of each gender one clip can demand.
    fn per_clip_demand(&self) -> (usize, usize) {
        match self.gender_group {
            GenderGroup::F => (self.n_sources, 0),
            GenderGroup::M => (0, self.n_sources),
            GenderGroup::Fm => {
                let max_one_side = self.n_sources.saturating_sub(1).max(1);
                (max_one_side, max_one_side)
            }
        }
    }
}

/// Per-split speaker pools, disjoint by construction.
struct SpeakerPools {
    female: Vec<Vec<SpeakerId>>,
    male: Vec<Vec<SpeakerId>>,
}

fn split_index(split: Split) -> usize {
    match split {
        Split::Train => 0,
        Split::Eval => 1,
        Split::Test => 2,
    }
}

fn partition_speakers(
    corpus: &dyn SourceProvider,
    spec: &DatasetSpec,
    seed: u64,
) -> Result<SpeakerPools> {
    let (need_f, need_m) = spec.per_clip_demand();
    let active: Vec<bool> = spec.counts().iter().map(|(_, c)| *c > 0).collect();

    let mut pools = SpeakerPools {
        female: vec![Vec::new(), Vec::new(), Vec::new()],
        male: vec![Vec::new(), Vec::new(), Vec::new()],
    };
    for (gender, need, out) in [
        (Gender::Female, need_f, &mut pools.female),
        (Gender::Male, need_m, &mut pools.male),
    ] {
        if need == 0 {
            continue;
        }
        let mut speakers = corpus.speakers(gender);
        let total_needed: usize = active.iter().filter(|a| **a).count() * need;
        if speakers.len() < total_needed {
            return Err(AppError::Config(format!(
                "corpus has {} {} speakers but disjoint splits need at least {total_needed}",
                speakers.len(),
                gender.tag()
            )));
        }
        // Deterministic shuffle.
        let mut r = rng::stream(seed, match gender {
            Gender::Female => "speakers-f",
            Gender::Male => "speakers-m",
        });
        for i in (1..speakers.len()).rev() {
            let j = r.gen_range(0..=i);
            speakers.swap(i, j);
        }
        let mut cursor = 0usize;
        for (idx, is_active) in active.iter().enumerate() {
            if *is_active {
                out[idx] = speakers[cursor..cursor + need].to_vec();
                cursor += need;
            }
        }
        // Spread leftovers across active splits for variety.
        let mut target = 0usize;
        while cursor < speakers.len() {
            if active[target % 3] {
                out[target % 3].push(speakers[cursor].clone());
                cursor += 1;
            }
            target += 1;
        }
    }
    Ok(pools)
}

/// Gender of each source in one clip, honoring the group and pool sizes.
fn plan_genders(
    spec: &DatasetSpec,
    f_pool: usize,
    m_pool: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Gender>> {
    let n = spec.n_sources;
    match spec.gender_group {
        GenderGroup::F => Ok(vec![Gender::Female; n]),
        GenderGroup::M => Ok(vec![Gender::Male; n]),
        GenderGroup::Fm => {
            if f_pool == 0 || m_pool == 0 || f_pool + m_pool < n {
                return Err(AppError::Config(
                    "mixed-gender clips need speakers of both genders".into(),
                ));
            }
            for _ in 0..1000 {
                let plan: Vec<Gender> = (0..n)
                    .map(|_| {
                        if rng.gen::<bool>() {
                            Gender::Female
                        } else {
                            Gender::Male
                        }
                    })
                    .collect();
                let f = plan.iter().filter(|g| **g == Gender::Female).count();
                let m = n - f;
                if f >= 1 && m >= 1 && f <= f_pool && m <= m_pool {
                    return Ok(plan);
                }
            }
            Err(AppError::Config("could not draw a feasible gender plan".into()))
        }
    }
}

pub fn generate_dataset(
    corpus: &(dyn SourceProvider + Sync),
    spec: &DatasetSpec,
    geom: &Geometry,
    sample_rate: u32,
    out_dir: &Path,
    seed: u64,
) -> Result<DatasetManifest> {
    if spec.n_sources == 0 {
        return Err(AppError::Config("n_sources must be at least 1".into()));
    }
    if spec.clip_seconds <= 0.0 {
        return Err(AppError::Config("clip_seconds must be positive".into()));
    }
    geom.validate()?;
    let clip_len = (spec.clip_seconds * sample_rate as f64).round() as usize;
    let pools = partition_speakers(corpus, spec, seed)?;

    for (split, count) in spec.counts() {
        if count > 0 {
            fs::create_dir_all(out_dir.join("wav").join(split.tag()))?;
        }
    }

    let mut jobs: Vec<(Split, usize)> = Vec::new();
    for (split, count) in spec.counts() {
        for idx in 0..count {
            jobs.push((split, idx));
        }
    }

    let entries: Vec<Result<ManifestEntry>> = jobs
        .par_iter()
        .map(|&(split, idx)| {
            generate_clip(
                corpus, spec, geom, sample_rate, clip_len, out_dir, seed, split, idx, &pools,
            )
        })
        .collect();

    let mut manifest = DatasetManifest {
        entries: Vec::with_capacity(entries.len()),
        base_dir: out_dir.to_path_buf(),
    };
    for e in entries {
        manifest.entries.push(e?);
    }
    manifest.check_disjoint_speakers()?;
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[allow(clippy::too_many_arguments)]
fn generate_clip(
    corpus: &(dyn SourceProvider + Sync),
    spec: &DatasetSpec,
    geom: &Geometry,
    sample_rate: u32,
    clip_len: usize,
    out_dir: &Path,
    seed: u64,
    split: Split,
    idx: usize,
    pools: &SpeakerPools,
) -> Result<ManifestEntry> {
    let clip_seed = rng::sub_seed_indexed(seed, split.tag(), idx as u64);
    let mut scene_rng = rng::stream(clip_seed, "scene");
    let scene = sample_scene(&mut scene_rng, spec.n_sources, geom)?;

    let si = split_index(split);
    let f_pool = &pools.female[si];
    let m_pool = &pools.male[si];
    let mut cast_rng = rng::stream(clip_seed, "cast");
    let genders = plan_genders(spec, f_pool.len(), m_pool.len(), &mut cast_rng)?;

    // Distinct speakers per clip, drawn without replacement per gender.
    let mut f_avail: Vec<&SpeakerId> = f_pool.iter().collect();
    let mut m_avail: Vec<&SpeakerId> = m_pool.iter().collect();
    let mut speakers: Vec<SpeakerId> = Vec::with_capacity(spec.n_sources);
    for g in &genders {
        let avail = match g {
            Gender::Female => &mut f_avail,
            Gender::Male => &mut m_avail,
        };
        if avail.is_empty() {
            return Err(AppError::Config(format!(
                "not enough distinct {} speakers in the {} split",
                g.tag(),
                split.tag()
            )));
        }
        let pick = cast_rng.gen_range(0..avail.len());
        speakers.push(avail.swap_remove(pick).clone());
    }

    let mut utt_rng = rng::stream(clip_seed, "utterance");
    let sources: Vec<_> = speakers
        .iter()
        .map(|s| corpus.utterance(s, utt_rng.gen::<u64>(), clip_len, sample_rate))
        .collect::<Result<Vec<_>>>()?;

    let ids: Vec<String> = speakers.iter().map(|s| s.0.clone()).collect();
    let mix = render_stereo_mixture(&sources, &scene, &ids)?;

    let id = format!("{}-{idx:06}", split.tag());
    let rel_mix = format!("wav/{}/{id}.wav", split.tag());
    write_wav(
        &out_dir.join(&rel_mix),
        &WavContent::stereo(&mix.mic1, &mix.mic2),
        SampleFormat::Float32,
    )?;

    let mut source_paths = Vec::with_capacity(spec.n_sources);
    for (i, src) in sources.iter().enumerate() {
        let reference = weighted_source_image(src, scene.weights[i]);
        let rel = format!("wav/{}/{id}.src{i}.wav", split.tag());
        write_wav(
            &out_dir.join(&rel),
            &WavContent::mono(&reference),
            SampleFormat::Float32,
        )?;
        source_paths.push(rel);
    }

    Ok(ManifestEntry {
        id,
        mixture_path: rel_mix,
        source_paths,
        angles: scene.angles_deg.clone(),
        delays_us: scene.delays_s.iter().map(|d| d * 1e6).collect(),
        weights: scene.weights.clone(),
        split,
        gender_group: spec.gender_group,
        n_sources: spec.n_sources,
        seed: clip_seed,
        speakers: ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SyntheticCorpus;
    use mixclust_core::dsp::Waveform;
    use tempfile::tempdir;

    fn quick_spec() -> DatasetSpec {
        DatasetSpec {
            n_sources: 2,
            gender_group: GenderGroup::Fm,
            train: 4,
            eval: 1,
            test: 2,
            clip_seconds: 0.5,
        }
    }

    #[test]
    fn counts_and_disjoint_speakers() {
        let dir = tempdir().unwrap();
        let corpus = SyntheticCorpus::new(3, 6);
        let manifest = generate_dataset(
            &corpus,
            &quick_spec(),
            &Geometry::default_16k(),
            16000,
            dir.path(),
            7,
        )
        .unwrap();
        assert_eq!(manifest.entries.len(), 7);
        assert_eq!(manifest.split_entries(Split::Train).len(), 4);
        assert_eq!(manifest.split_entries(Split::Test).len(), 2);
        manifest.check_disjoint_speakers().unwrap();
        assert!(dir.path().join("manifest.jsonl").exists());
    }

    #[test]
    fn mixture_equals_sum_of_references() {
        let dir = tempdir().unwrap();
        let corpus = SyntheticCorpus::new(4, 6);
        let manifest = generate_dataset(
            &corpus,
            &quick_spec(),
            &Geometry::default_16k(),
            16000,
            dir.path(),
            11,
        )
        .unwrap();
        let entry = &manifest.entries[0];
        let mix = crate::wav::read_wav(&manifest.resolve(&entry.mixture_path)).unwrap();
        assert_eq!(mix.channels.len(), 2);
        let mut acc = vec![0.0f64; mix.frames()];
        for rel in &entry.source_paths {
            let r = crate::wav::read_wav(&manifest.resolve(rel)).unwrap();
            for (a, &v) in acc.iter_mut().zip(r.channels[0].iter()) {
                *a += v;
            }
        }
        let mic1 = Waveform::new(mix.channels[0].clone(), 16000);
        let sum = Waveform::new(acc, 16000);
        let mut err = 0.0;
        for (a, b) in mic1.samples.iter().zip(sum.samples.iter()) {
            err += (a - b) * (a - b);
        }
        let rel = (err / mic1.energy().max(1e-30)).sqrt();
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn generation_is_byte_deterministic() {
        let corpus = SyntheticCorpus::new(5, 6);
        let dirs = [tempdir().unwrap(), tempdir().unwrap()];
        for dir in &dirs {
            generate_dataset(
                &corpus,
                &quick_spec(),
                &Geometry::default_16k(),
                16000,
                dir.path(),
                13,
            )
            .unwrap();
        }
        let entry = "wav/train/train-000002.wav";
        let a = std::fs::read(dirs[0].path().join(entry)).unwrap();
        let b = std::fs::read(dirs[1].path().join(entry)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_speakers_is_a_config_error() {
        let dir = tempdir().unwrap();
        let corpus = SyntheticCorpus::new(3, 1); // one speaker per gender
        let spec = DatasetSpec {
            n_sources: 3,
            gender_group: GenderGroup::F,
            ..quick_spec()
        };
        match generate_dataset(
            &corpus,
            &spec,
            &Geometry::default_16k(),
            16000,
            dir.path(),
            7,
        ) {
            Err(AppError::Config(_)) => {}
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn clip_lengths_are_exact() {
        let dir = tempdir().unwrap();
        let corpus = SyntheticCorpus::new(6, 6);
        let spec = DatasetSpec {
            clip_seconds: 0.75,
            train: 1,
            eval: 0,
            test: 0,
            ..quick_spec()
        };
        let manifest = generate_dataset(
            &corpus,
            &spec,
            &Geometry::default_16k(),
            16000,
            dir.path(),
            17,
        )
        .unwrap();
        let mix = crate::wav::read_wav(&manifest.resolve(&manifest.entries[0].mixture_path)).unwrap();
        assert_eq!(mix.frames(), 12000);
    }
}
