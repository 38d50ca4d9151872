//! Command-line surface: gen, inspect, train, separate, eval, plot-data.
//! Flag > config file > built-in default, and every subcommand is
//! deterministic given the same config and seed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mixclust_core::dsp::{stft, Waveform};
use mixclust_core::eval::median;
use mixclust_core::features::{local_maxima, normalized_phase_difference, npd_histogram};
use mixclust_core::masks::{bpd_mask_with, dominant_source_mask, mask_agreement};
use mixclust_core::rng;

use crate::checkpoint::Checkpoint;
use crate::config::PipelineConfig;
use crate::corpus::{SyntheticCorpus, WavDirCorpus};
use crate::dataset::generate_dataset;
use crate::error::{AppError, Result};
use crate::manifest::{DatasetManifest, Split};
use crate::report::{
    evaluate, plot_data_from_csv, summarize, write_boxplot_json, write_report_csv, EvalMethod,
    EvalOptions,
};
use crate::training::train_from_manifest;
use crate::wav::{read_wav, write_wav, SampleFormat, WavContent};

#[derive(Parser, Debug)]
#[command(
    name = "mixclust",
    about = "Self-supervised source separation: learn from two-mic mixtures, separate mono ones",
    version
)]
pub struct Cli {
    /// TOML pipeline config; flags override file values.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,

    /// Global seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Working directory for datasets, checkpoints and reports.
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Worker threads (0 = all cores). Falls back to MIXCLUST_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a mixture dataset with disjoint-speaker splits.
    Gen(GenArgs),
    /// Phase-difference histogram and mask agreement for one mixture.
    Inspect(InspectArgs),
    /// Train an embedding model on the dataset's train split.
    Train(TrainArgs),
    /// Separate a mono WAV into sources using a trained checkpoint.
    Separate(SeparateArgs),
    /// Score a method over a dataset split and write reports.
    Eval(EvalArgs),
    /// Recompute boxplot JSON from a report CSV.
    PlotData(PlotDataArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n_sources: Option<usize>,
    /// f, m or fm.
    #[arg(long)]
    pub genders: Option<String>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub eval: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub clip_seconds: Option<f64>,
    /// "synthetic" or a directory of speaker WAVs.
    #[arg(long)]
    pub corpus: Option<String>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Stereo mixture WAV.
    pub mixture: PathBuf,
    /// Manifest for mask-agreement context; defaults to the output dir's.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 101)]
    pub bins: usize,
    /// Histogram half-width in microseconds; defaults to 1.2x the
    /// geometric maximum delay.
    #[arg(long)]
    pub range_us: Option<f64>,
    #[arg(long, default_value_t = -60.0)]
    pub floor_db: f64,
    /// Histogram CSV path; defaults to <mixture>.npd.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// ds, bpd or rpd.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// gru or lstm.
    #[arg(long)]
    pub cell: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Continue from an existing checkpoint (fresh optimizer state).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Checkpoint path; defaults to <output-dir>/model-<target>.mxck.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SeparateArgs {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub n_sources: usize,
    /// Required for stereo inputs: which channel to separate.
    #[arg(long)]
    pub channel: Option<usize>,
    /// Defaults to the input's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// model, oracle-ds, oracle-bpd or initial.
    #[arg(long, default_value = "model")]
    pub method: String,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Override the number of sources to separate (defaults to each
    /// mixture's own count).
    #[arg(long)]
    pub n_sources: Option<usize>,
    /// Report path prefix; defaults to <output-dir>/report-<method>.
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotDataArgs {
    pub report: PathBuf,
    /// Defaults to <report>.boxplot.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Resolved global context.
pub struct Ctx {
    pub cfg: PipelineConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn manifest_path(&self, flag: &Option<PathBuf>) -> PathBuf {
        flag.clone()
            .unwrap_or_else(|| self.out_dir.join("manifest.jsonl"))
    }
}

pub fn build_context(cli: &Cli) -> Result<Ctx> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out_dir = cli
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    let threads = cli
        .threads
        .or(cfg.threads)
        .or_else(|| {
            std::env::var("MIXCLUST_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        // Ignore the error if a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(Ctx { cfg, out_dir })
}

pub fn run(cli: Cli) -> Result<()> {
    let mut ctx = build_context(&cli)?;
    match cli.command {
        Command::Gen(args) => cmd_gen(&mut ctx, args),
        Command::Inspect(args) => cmd_inspect(&ctx, args),
        Command::Train(args) => cmd_train(&mut ctx, args),
        Command::Separate(args) => cmd_separate(&ctx, args),
        Command::Eval(args) => cmd_eval(&ctx, args),
        Command::PlotData(args) => cmd_plot_data(args),
    }
}

fn cmd_gen(ctx: &mut Ctx, args: GenArgs) -> Result<()> {
    let d = &mut ctx.cfg.dataset;
    if let Some(v) = args.n_sources {
        d.n_sources = v;
    }
    if let Some(v) = args.genders {
        d.gender_group = v;
    }
    if let Some(v) = args.train {
        d.train = v;
    }
    if let Some(v) = args.eval {
        d.eval = v;
    }
    if let Some(v) = args.test {
        d.test = v;
    }
    if let Some(v) = args.clip_seconds {
        d.clip_seconds = v;
    }
    if let Some(v) = args.corpus {
        d.corpus = v;
    }
    let spec = ctx.cfg.dataset_spec()?;
    let geom = ctx.cfg.geometry()?;
    std::fs::create_dir_all(&ctx.out_dir)?;

    let manifest = match ctx.cfg.dataset.corpus.as_str() {
        "synthetic" => {
            let corpus = SyntheticCorpus::new(
                rng::sub_seed(ctx.cfg.seed, "corpus"),
                ctx.cfg.dataset.synthetic_speakers_per_gender,
            );
            generate_dataset(
                &corpus,
                &spec,
                &geom,
                ctx.cfg.stft.sample_rate,
                &ctx.out_dir,
                ctx.cfg.seed,
            )?
        }
        dir => {
            let corpus = WavDirCorpus::scan(Path::new(dir))?;
            generate_dataset(
                &corpus,
                &spec,
                &geom,
                ctx.cfg.stft.sample_rate,
                &ctx.out_dir,
                ctx.cfg.seed,
            )?
        }
    };
    println!(
        "wrote {} mixtures under {} (manifest.jsonl)",
        manifest.entries.len(),
        ctx.out_dir.display()
    );
    Ok(())
}

fn cmd_inspect(ctx: &Ctx, args: InspectArgs) -> Result<()> {
    let content = read_wav(&args.mixture)?;
    if content.channels.len() != 2 {
        return Err(AppError::Input(format!(
            "{} has {} channel(s); the phase-difference feature needs a stereo mixture",
            args.mixture.display(),
            content.channels.len()
        )));
    }
    let stft_cfg = ctx.cfg.stft_config()?;
    if content.sample_rate != stft_cfg.sample_rate {
        return Err(AppError::Input(format!(
            "{} is at {} Hz, pipeline runs at {} Hz",
            args.mixture.display(),
            content.sample_rate,
            stft_cfg.sample_rate
        )));
    }
    let geom = ctx.cfg.geometry()?;
    let mic1 = content.channel_waveform(0).unwrap();
    let mic2 = content.channel_waveform(1).unwrap();
    let m1 = stft(&mic1, &stft_cfg)?;
    let m2 = stft(&mic2, &stft_cfg)?;
    let npd = normalized_phase_difference(&m1, &m2, args.floor_db)?;

    let range_s = args
        .range_us
        .map(|us| us * 1e-6)
        .unwrap_or(1.2 * geom.max_delay_s());
    let hist = npd_histogram(&npd, args.bins, range_s)?;
    let out_path = args.out.unwrap_or_else(|| {
        let mut os = args.mixture.as_os_str().to_owned();
        os.push(".npd.csv");
        PathBuf::from(os)
    });
    let mut csv = String::from("bin_left_seconds,bin_right_seconds,count\n");
    for (i, count) in hist.counts.iter().enumerate() {
        let (lo, hi) = hist.bin_edges(i);
        csv.push_str(&format!("{lo},{hi},{count}\n"));
    }
    std::fs::write(&out_path, csv)?;
    let peaks = local_maxima(&hist.smoothed(3));
    println!(
        "histogram: {} valid bins, {} peaks after 3-bin smoothing -> {}",
        hist.total(),
        peaks,
        out_path.display()
    );

    // Mask agreement needs the manifest entry's references.
    let manifest_path = ctx.manifest_path(&args.manifest);
    if manifest_path.exists() {
        let manifest = DatasetManifest::load(&manifest_path)?;
        if let Some(entry) = manifest.find_mixture(&args.mixture) {
            let refs: Vec<Waveform> = entry
                .source_paths
                .iter()
                .map(|rel| {
                    read_wav(&manifest.resolve(rel))
                        .map(|c| Waveform::new(c.channels[0].clone(), c.sample_rate))
                })
                .collect::<Result<Vec<_>>>()?;
            let specs = refs
                .iter()
                .map(|r| stft(r, &stft_cfg))
                .collect::<mixclust_core::Result<Vec<_>>>()?;
            let ds = dominant_source_mask(&specs, &vec![1.0; specs.len()])?;
            let mut krng = rng::stream(ctx.cfg.seed, "inspect-kmeans");
            let bpd = bpd_mask_with(&npd, entry.n_sources, &Default::default(), &mut krng)?;
            let all = mask_agreement(&bpd, &ds, None)?;
            let energetic = mask_agreement(&bpd, &ds, Some((&m1, 0.01)))?;
            println!(
                "BPD vs DS agreement: {:.1}% overall, {:.1}% on bins with >=1% frame energy",
                100.0 * all,
                100.0 * energetic
            );
            println!(
                "planted delays (us): {:?}",
                entry
                    .delays_us
                    .iter()
                    .map(|d| (d * 100.0).round() / 100.0)
                    .collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}

fn cmd_train(ctx: &mut Ctx, args: TrainArgs) -> Result<()> {
    let t = &mut ctx.cfg.train;
    if let Some(v) = args.target {
        t.target = v;
    }
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.lr {
        t.learning_rate = v;
    }
    if let Some(v) = args.hidden {
        t.hidden = v;
    }
    if let Some(v) = args.embed_dim {
        t.embed_dim = v;
    }
    if let Some(v) = args.layers {
        t.layers = v;
    }
    if let Some(v) = args.cell {
        t.cell = v;
    }
    if let Some(v) = args.dropout {
        t.dropout = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    let stft_cfg = ctx.cfg.stft_config()?;
    let net_cfg = ctx.cfg.net_config()?;
    let train_cfg = ctx.cfg.train_config()?;

    let manifest = DatasetManifest::load(&ctx.manifest_path(&args.manifest))?;
    manifest.check_disjoint_speakers()?;
    let resume = match &args.resume {
        Some(path) => Some(Checkpoint::load(path)?),
        None => None,
    };
    let out_path = args.out.unwrap_or_else(|| {
        ctx.out_dir
            .join(format!("model-{}.mxck", ctx.cfg.train.target))
    });
    if let Some(parent) = out_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let output = train_from_manifest(&manifest, &stft_cfg, net_cfg, &train_cfg, resume, &out_path)?;
    let history = &output.checkpoint.meta.loss_history;
    println!(
        "trained {} epochs on {} clips; loss {:.4} -> {:.4}; checkpoint {}",
        history.len(),
        manifest.split_entries(Split::Train).len(),
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN),
        out_path.display()
    );
    Ok(())
}

fn cmd_separate(ctx: &Ctx, args: SeparateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let stft_cfg = ckpt.meta.stft.to_config()?;
    let content = read_wav(&args.input)?;
    let mixture = match (content.channels.len(), args.channel) {
        (0, _) => return Err(AppError::Input("input has no channels".into())),
        (1, _) => content.channel_waveform(0).unwrap(),
        (n, Some(c)) if c < n => content.channel_waveform(c).unwrap(),
        (n, Some(c)) => {
            return Err(AppError::Input(format!(
                "--channel {c} out of range for a {n}-channel file"
            )))
        }
        (n, None) => {
            return Err(AppError::Input(format!(
                "{} has {n} channels; separation is monophonic, pick one with --channel",
                args.input.display()
            )))
        }
    };
    let mut rng = rng::stream(ctx.cfg.seed, "separate");
    let result = mixclust_core::separation::separate(
        &ckpt.network,
        &stft_cfg,
        &mixture,
        args.n_sources,
        &mut rng,
    )?;
    let out_dir = args.out_dir.clone().unwrap_or_else(|| {
        args.input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    std::fs::create_dir_all(&out_dir)?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "mixture".into());
    for (i, source) in result.sources.iter().enumerate() {
        let path = out_dir.join(format!("{stem}.src{i}.wav"));
        write_wav(&path, &WavContent::mono(source), SampleFormat::Float32)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_eval(ctx: &Ctx, args: EvalArgs) -> Result<()> {
    let stft_cfg = ctx.cfg.stft_config()?;
    let manifest = DatasetManifest::load(&ctx.manifest_path(&args.manifest))?;
    let method = match args.method.as_str() {
        "model" | "checkpoint" => {
            let path = args.checkpoint.clone().ok_or_else(|| {
                AppError::Config("--method model needs --checkpoint".into())
            })?;
            EvalMethod::Model(Box::new(Checkpoint::load(&path)?))
        }
        "oracle-ds" => EvalMethod::OracleDs,
        "oracle-bpd" => EvalMethod::OracleBpd,
        "initial" => EvalMethod::Initial,
        other => {
            return Err(AppError::Config(format!(
                "unknown method '{other}' (use model, oracle-ds, oracle-bpd or initial)"
            )))
        }
    };
    let opts = EvalOptions {
        split: Split::parse(&args.split)?,
        n_sources: args.n_sources,
        seed: ctx.cfg.seed,
        kmeans: Default::default(),
    };
    let report = evaluate(&method, &manifest, &stft_cfg, &opts)?;
    print!("{}", summarize(&report));
    let prefix = args.out_prefix.clone().unwrap_or_else(|| {
        ctx.out_dir
            .join(format!("report-{}", args.method.replace(' ', "-")))
    });
    if let Some(parent) = prefix.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let csv_path = PathBuf::from(format!("{}.csv", prefix.display()));
    let box_path = PathBuf::from(format!("{}.boxplot.json", prefix.display()));
    write_report_csv(&csv_path, std::slice::from_ref(&report))?;
    write_boxplot_json(&box_path, std::slice::from_ref(&report))?;
    println!(
        "median SDR {:.2} dB, median improvement {:.2} dB -> {}",
        report.median_sdr().unwrap_or(f64::NAN),
        median(&report.improvements()).unwrap_or(f64::NAN),
        csv_path.display()
    );
    Ok(())
}

fn cmd_plot_data(args: PlotDataArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| {
        let mut os = args.report.as_os_str().to_owned();
        os.push(".boxplot.json");
        PathBuf::from(os)
    });
    plot_data_from_csv(&args.report, &out)?;
    println!("{}", out.display());
    Ok(())
}
