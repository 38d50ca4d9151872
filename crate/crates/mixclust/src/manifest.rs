//! Dataset manifest: one JSON object per line, one mixture per object.
//! Paths are stored relative to the manifest's directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            "test" => Ok(Split::Test),
            other => Err(AppError::Input(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenderGroup {
    F,
    M,
    Fm,
}

impl GenderGroup {
    pub fn tag(&self) -> &'static str {
        match self {
            GenderGroup::F => "f",
            GenderGroup::M => "m",
            GenderGroup::Fm => "fm",
        }
    }

    pub fn parse(s: &str) -> Result<GenderGroup> {
        match s {
            "f" => Ok(GenderGroup::F),
            "m" => Ok(GenderGroup::M),
            "fm" => Ok(GenderGroup::Fm),
            other => Err(AppError::Input(format!("unknown gender group '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub mixture_path: String,
    pub source_paths: Vec<String>,
    pub angles: Vec<f64>,
    pub delays_us: Vec<f64>,
    pub weights: Vec<f64>,
    pub split: Split,
    pub gender_group: GenderGroup,
    pub n_sources: usize,
    pub seed: u64,
    pub speakers: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory the relative paths resolve against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DatasetManifest> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Input(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| {
                AppError::Input(format!("manifest line {}: {e}", lineno + 1))
            })?;
            entries.push(entry);
        }
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(DatasetManifest { entries, base_dir })
    }

    pub fn split_entries(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    /// No speaker identity may appear in more than one split.
    pub fn check_disjoint_speakers(&self) -> Result<()> {
        let mut owner: HashMap<&str, Split> = HashMap::new();
        for entry in &self.entries {
            for speaker in &entry.speakers {
                match owner.get(speaker.as_str()) {
                    None => {
                        owner.insert(speaker, entry.split);
                    }
                    Some(s) if *s == entry.split => {}
                    Some(s) => {
                        return Err(AppError::Input(format!(
                            "speaker {speaker} appears in both {} and {}",
                            s.tag(),
                            entry.split.tag()
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Entry whose mixture path or id matches, if any.
    pub fn find_mixture(&self, needle: &Path) -> Option<&ManifestEntry> {
        let needle_name = needle.file_name()?.to_string_lossy().to_string();
        self.entries.iter().find(|e| {
            e.id == needle_name
                || Path::new(&e.mixture_path).file_name().map(|n| n.to_string_lossy().to_string())
                    == Some(needle_name.clone())
        })
    }

    /// FNV-1a over the serialized entries; ties checkpoints to datasets.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for entry in &self.entries {
            if let Ok(line) = serde_json::to_string(entry) {
                for b in line.as_bytes() {
                    h ^= *b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn entry(id: &str, split: Split, speakers: &[&str]) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            mixture_path: format!("wav/{id}.wav"),
            source_paths: vec![format!("wav/{id}.src0.wav")],
            angles: vec![45.0],
            delays_us: vec![20.6],
            weights: vec![1.0],
            split,
            gender_group: GenderGroup::Fm,
            n_sources: 1,
            seed: 7,
            speakers: speakers.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let manifest = DatasetManifest {
            entries: vec![
                entry("train-0", Split::Train, &["f000"]),
                entry("test-0", Split::Test, &["f001"]),
            ],
            base_dir: dir.path().to_path_buf(),
        };
        manifest.save(&path).unwrap();
        let loaded = DatasetManifest::load(&path).unwrap();
        assert_eq!(loaded.entries.len(), 2);
        assert_eq!(loaded.entries[0].id, "train-0");
        assert_eq!(loaded.split_entries(Split::Test).len(), 1);
        assert_eq!(loaded.base_dir, dir.path());
    }

    #[test]
    fn speaker_overlap_is_detected() {
        let manifest = DatasetManifest {
            entries: vec![
                entry("train-0", Split::Train, &["f000"]),
                entry("test-0", Split::Test, &["f000"]),
            ],
            base_dir: PathBuf::new(),
        };
        assert!(manifest.check_disjoint_speakers().is_err());
    }
}
