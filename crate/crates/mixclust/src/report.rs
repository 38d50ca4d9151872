//! Batch evaluation: score a method over a manifest split, resolve output
//! permutations, and emit the CSV report plus boxplot data.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use mixclust_core::clustering::KmeansOptions;
use mixclust_core::dsp::{istft_with_len, stft, StftConfig, Waveform};
use mixclust_core::eval::{box_stats, mean, median, quantile, resolve_permutation, sdr};
use mixclust_core::features::normalized_phase_difference;
use mixclust_core::masks::{apply_mask, bpd_mask_with, dominant_source_mask};
use mixclust_core::model::TARGET_SILENCE_FLOOR_DB;
use mixclust_core::rng;
use mixclust_core::separation::separate_with;

use crate::checkpoint::Checkpoint;
use crate::error::{AppError, Result};
use crate::manifest::{DatasetManifest, ManifestEntry, Split};
use crate::training::load_clip;

#[derive(Clone, Debug)]
pub enum EvalMethod {
    /// Trained model separating the first channel only.
    Model(Box<Checkpoint>),
    OracleDs,
    OracleBpd,
    Initial,
}

impl EvalMethod {
    pub fn label(&self) -> String {
        match self {
            EvalMethod::Model(ckpt) => match ckpt.meta.train.target.as_str() {
                "ds" => "DC DS".into(),
                "bpd" => "DC BPD".into(),
                "rpd" => "DC RPD".into(),
                other => format!("DC {other}"),
            },
            EvalMethod::OracleDs => "DS oracle".into(),
            EvalMethod::OracleBpd => "BPD oracle".into(),
            EvalMethod::Initial => "Initial".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub mixture_id: String,
    pub method: String,
    pub source_index: usize,
    pub sdr_db: f64,
    pub initial_sdr_db: f64,
    pub improvement_db: f64,
    pub n_sources: usize,
    pub gender_group: String,
}

#[derive(Clone, Debug)]
pub struct SdrReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
}

impl SdrReport {
    pub fn sdrs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sdr_db).collect()
    }

    pub fn improvements(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.improvement_db).collect()
    }

    pub fn median_sdr(&self) -> Option<f64> {
        median(&self.sdrs())
    }

    pub fn median_improvement(&self) -> Option<f64> {
        median(&self.improvements())
    }

    pub fn mean_improvement(&self) -> Option<f64> {
        mean(&self.improvements())
    }
}

/// Number of expected sources at separation time; defaults to each
/// mixture's own source count.
#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub split: Split,
    pub n_sources: Option<usize>,
    pub seed: u64,
    pub kmeans: KmeansOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            split: Split::Test,
            n_sources: None,
            seed: 0,
            kmeans: KmeansOptions::default(),
        }
    }
}

pub fn evaluate(
    method: &EvalMethod,
    manifest: &DatasetManifest,
    stft_cfg: &StftConfig,
    opts: &EvalOptions,
) -> Result<SdrReport> {
    let entries = manifest.split_entries(opts.split);
    if entries.is_empty() {
        return Err(AppError::Config(format!(
            "manifest has no {} split",
            opts.split.tag()
        )));
    }
    if let EvalMethod::Model(ckpt) = method {
        let expected = ckpt.meta.stft.to_config()?;
        if &expected != stft_cfg {
            return Err(AppError::Config(
                "checkpoint STFT settings disagree with the pipeline config".into(),
            ));
        }
    }
    let label = method.label();
    let rows: Vec<Result<Vec<ReportRow>>> = entries
        .par_iter()
        .map(|entry| evaluate_entry(method, &label, manifest, entry, stft_cfg, opts))
        .collect();
    let mut all = Vec::new();
    for r in rows {
        all.extend(r?);
    }
    Ok(SdrReport {
        method: label,
        rows: all,
    })
}

fn evaluate_entry(
    method: &EvalMethod,
    label: &str,
    manifest: &DatasetManifest,
    entry: &ManifestEntry,
    stft_cfg: &StftConfig,
    opts: &EvalOptions,
) -> Result<Vec<ReportRow>> {
    let clip = load_clip(manifest, entry, true, stft_cfg.sample_rate)?;
    let references = clip.references.as_ref().expect("references requested");
    let n_out = opts.n_sources.unwrap_or(entry.n_sources);
    if n_out != references.len() {
        return Err(AppError::Config(format!(
            "cannot score {} outputs against {} references for {}",
            n_out,
            references.len(),
            entry.id
        )));
    }
    let mic1 = &clip.mic1;

    // Per-source SDR of the raw mixture; the improvement baseline.
    let initial: Vec<f64> = references
        .iter()
        .map(|r| sdr(mic1, r))
        .collect::<mixclust_core::Result<Vec<_>>>()?;

    let estimates: Vec<Waveform> = match method {
        EvalMethod::Initial => vec![mic1.clone(); n_out],
        EvalMethod::Model(ckpt) => {
            let mut rng = rng::stream_indexed(opts.seed, "separate", fnv(entry.id.as_bytes()));
            let result = separate_with(
                &ckpt.network,
                stft_cfg,
                mic1,
                n_out,
                &opts.kmeans,
                &mut rng,
            )?;
            result.sources
        }
        EvalMethod::OracleDs => {
            let specs = references
                .iter()
                .map(|r| stft(r, stft_cfg))
                .collect::<mixclust_core::Result<Vec<_>>>()?;
            // References are weighted images, so the argmax uses unit weights.
            let mask = dominant_source_mask(&specs, &vec![1.0; specs.len()])?;
            let mix_spec = stft(mic1, stft_cfg)?;
            apply_mask(&mix_spec, &mask)?
                .iter()
                .map(|s| istft_with_len(s, mic1.len()))
                .collect::<mixclust_core::Result<Vec<_>>>()?
        }
        EvalMethod::OracleBpd => {
            let mic2 = clip
                .mic2
                .as_ref()
                .ok_or_else(|| AppError::Input("oracle BPD needs a stereo mixture".into()))?;
            let m1 = stft(mic1, stft_cfg)?;
            let m2 = stft(mic2, stft_cfg)?;
            let npd = normalized_phase_difference(&m1, &m2, TARGET_SILENCE_FLOOR_DB)?;
            let mut rng = rng::stream_indexed(opts.seed, "oracle-bpd", fnv(entry.id.as_bytes()));
            let mask = bpd_mask_with(&npd, n_out, &opts.kmeans, &mut rng)?;
            apply_mask(&m1, &mask)?
                .iter()
                .map(|s| istft_with_len(s, mic1.len()))
                .collect::<mixclust_core::Result<Vec<_>>>()?
        }
    };

    let alignment = resolve_permutation(&estimates, references)?;
    Ok((0..references.len())
        .map(|j| ReportRow {
            mixture_id: entry.id.clone(),
            method: label.to_string(),
            source_index: j,
            sdr_db: alignment.sdrs[j],
            initial_sdr_db: initial[j],
            improvement_db: alignment.sdrs[j] - initial[j],
            n_sources: entry.n_sources,
            gender_group: entry.gender_group.tag().to_string(),
        })
        .collect())
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// CSV with one row per (mixture, source).
pub fn write_report_csv(path: &Path, reports: &[SdrReport]) -> Result<()> {
    let mut out = String::from(
        "mixture_id,method,source_index,sdr_db,initial_sdr_db,improvement_db,n_sources,gender_group\n",
    );
    for report in reports {
        for r in &report.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.mixture_id,
                r.method,
                r.source_index,
                r.sdr_db,
                r.initial_sdr_db,
                r.improvement_db,
                r.n_sources,
                r.gender_group
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize)]
struct BoxData {
    median: f64,
    q1: f64,
    q3: f64,
    whisker_lo: f64,
    whisker_hi: f64,
    points: Vec<f64>,
}

/// Boxplot JSON: per-method absolute-SDR and improvement statistics.
pub fn write_boxplot_json(path: &Path, reports: &[SdrReport]) -> Result<()> {
    let mut methods: BTreeMap<String, BTreeMap<&'static str, BoxData>> = BTreeMap::new();
    for report in reports {
        let mut inner = BTreeMap::new();
        for (key, values) in [
            ("sdr_db", report.sdrs()),
            ("improvement_db", report.improvements()),
        ] {
            if let Some(stats) = box_stats(&values) {
                inner.insert(
                    key,
                    BoxData {
                        median: stats.median,
                        q1: stats.q1,
                        q3: stats.q3,
                        whisker_lo: stats.whisker_lo,
                        whisker_hi: stats.whisker_hi,
                        points: values,
                    },
                );
            }
        }
        methods.insert(report.method.clone(), inner);
    }
    fs::write(path, serde_json::to_string_pretty(&methods)?)?;
    Ok(())
}

/// Stdout summary: per gender group and overall.
pub fn summarize(report: &SdrReport) -> String {
    let mut out = String::new();
    let mut groups: BTreeMap<String, Vec<&ReportRow>> = BTreeMap::new();
    for row in &report.rows {
        groups.entry(row.gender_group.clone()).or_default().push(row);
        groups.entry("all".into()).or_default().push(row);
    }
    out.push_str(&format!(
        "{:<12} {:>6} {:>10} {:>10} {:>10} {:>12}\n",
        "group", "n", "med SDR", "IQR", "mean impr", "med impr"
    ));
    for (group, rows) in groups {
        let sdrs: Vec<f64> = rows.iter().map(|r| r.sdr_db).collect();
        let imps: Vec<f64> = rows.iter().map(|r| r.improvement_db).collect();
        let med = median(&sdrs).unwrap_or(f64::NAN);
        let iqr = quantile(&sdrs, 0.75).unwrap_or(f64::NAN) - quantile(&sdrs, 0.25).unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{:<12} {:>6} {:>10.2} {:>10.2} {:>10.2} {:>12.2}\n",
            group,
            rows.len(),
            med,
            iqr,
            mean(&imps).unwrap_or(f64::NAN),
            median(&imps).unwrap_or(f64::NAN),
        ));
    }
    out
}

/// Recompute boxplot data from an existing report CSV.
pub fn plot_data_from_csv(csv_path: &Path, out_path: &Path) -> Result<()> {
    let text = fs::read_to_string(csv_path)
        .map_err(|e| AppError::Input(format!("cannot read {}: {e}", csv_path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| AppError::Input("empty report".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| -> Result<usize> {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| AppError::Input(format!("report lacks column {name}")))
    };
    let method_col = find("method")?;
    let sdr_col = find("sdr_db")?;
    let imp_col = find("improvement_db")?;
    let mut by_method: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| AppError::Input(format!("report line {}: bad field", lineno + 2)))
        };
        by_method
            .entry(fields.get(method_col).unwrap_or(&"?").to_string())
            .or_default()
            .push((parse(sdr_col)?, parse(imp_col)?));
    }
    let reports: Vec<SdrReport> = by_method
        .into_iter()
        .map(|(method, pairs)| SdrReport {
            method: method.clone(),
            rows: pairs
                .iter()
                .map(|&(sdr_db, improvement_db)| ReportRow {
                    mixture_id: String::new(),
                    method: method.clone(),
                    source_index: 0,
                    sdr_db,
                    initial_sdr_db: sdr_db - improvement_db,
                    improvement_db,
                    n_sources: 0,
                    gender_group: String::new(),
                })
                .collect(),
        })
        .collect();
    write_boxplot_json(out_path, &reports)
}
