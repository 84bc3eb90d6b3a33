use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use geovid::corpus::{frame_images, lines_from_images, load_split, sequence_from_lines};
use geovid::eval::{evaluate, run_ablation, write_analysis, write_history};
use geovid::geometry::features::{Label, SequenceConfig};
use geovid::geometry::hough::HoughConfig;
use geovid::geometry::io::{read_json, read_segments, write_features, IntrinsicsSidecar};
use geovid::manifest::{Manifest, Split};
use geovid::model::{Model, ModelConfig};
use geovid::synthworld::dataset::{make_dataset, DatasetConfig, SplitFractions};
use geovid::synthworld::trajectory::JitterSpec;
use geovid::training::{pretrain_geometry_head, train_classifier, TrainConfig};

/// Vanishing-point geometry features and a geometry-aware transformer for
/// detecting temporally unstable (generated) video.
///
/// File formats are described in FORMATS.md.
#[derive(Parser)]
#[command(name = "geovid", version)]
struct Cli {
    /// Worker threads (default: all cores). Use 1 for bit-reproducible training.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset of smooth (real) and jittered (generated) sequences.
    Synth(SynthArgs),
    /// Build the feature sequence of one video from frame images or a segments file.
    Extract(ExtractArgs),
    /// Pretrain the geometry head on the real sequences of the train split.
    PretrainGeo(PretrainArgs),
    /// Train the classifier on top of a frozen geometry head.
    Train(TrainArgs),
    /// Score a split and write a metrics report.
    Eval(EvalArgs),
    /// Export per-sample VP trajectories, residual curves and plots.
    Analyze(AnalyzeArgs),
    /// Train and evaluate with one component disabled.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 280)]
    n_real: usize,
    #[arg(long, alias = "n-generated", default_value_t = 280)]
    n_fake: usize,
    #[arg(long, default_value_t = 40)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long, default_value_t = 480)]
    height: usize,
    /// Rotation random-walk step of generated samples, degrees per frame.
    #[arg(long, default_value_t = 2.0)]
    sigma_rot: f64,
    /// Translation random-walk step of generated samples, meters per frame.
    #[arg(long, default_value_t = 0.005)]
    sigma_trans: f64,
    /// Segment dropout probability (all samples).
    #[arg(long, default_value_t = 0.05)]
    dropout: f64,
    /// Endpoint noise in pixels (all samples).
    #[arg(long, default_value_t = 0.5)]
    sigma_px: f64,
    /// Fraction of the frame hidden by a random rectangle (all samples).
    #[arg(long, default_value_t = 0.0)]
    mask_ratio: f64,
    #[arg(long, default_value_t = 5.0 / 7.0)]
    train_frac: f64,
    #[arg(long, default_value_t = 1.0 / 7.0)]
    val_frac: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DomainArg {
    Real,
    Generated,
}

impl From<DomainArg> for Label {
    fn from(d: DomainArg) -> Label {
        match d {
            DomainArg::Real => Label::Real,
            DomainArg::Generated => Label::Generated,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// Directory of grayscale PNG/PGM frames, read in name order.
    #[arg(
        long,
        conflicts_with = "segments",
        required_unless_present = "segments"
    )]
    frames: Option<PathBuf>,
    /// Segments file (JSON Lines, one frame per line).
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Intrinsics sidecar (per-frame list or a single object).
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long, value_enum)]
    domain: DomainArg,
    /// Output feature file.
    #[arg(long)]
    out: PathBuf,
    /// Video id (default: output file stem).
    #[arg(long)]
    id: Option<String>,
    /// Edge threshold as a fraction of the maximum gradient magnitude.
    #[arg(long, default_value_t = 0.1)]
    edge_threshold: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainOverrides {
    /// Training config JSON; omitted fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainOverrides {
    fn resolve(&self, base: TrainConfig) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p, &base)?,
            None => base,
        };
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct PretrainArgs {
    /// Dataset directory (or manifest file).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    train: TrainOverrides,
    /// Model config JSON; omitted fields keep their defaults.
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Use at most this many real sequences.
    #[arg(long)]
    max_samples: Option<usize>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// History file (default: next to the checkpoint).
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint with a pretrained, frozen geometry head.
    #[arg(long)]
    geo_ckpt: PathBuf,
    #[command(flatten)]
    train: TrainOverrides,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value = "test")]
    split: Split,
}

#[derive(Clone, Copy, ValueEnum)]
enum Component {
    Gpe,
    Ga,
    Ema,
}

impl Component {
    fn name(self) -> &'static str {
        match self {
            Component::Gpe => "gpe",
            Component::Ga => "ga",
            Component::Ema => "ema",
        }
    }
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    geo_ckpt: PathBuf,
    #[arg(long, value_enum)]
    disable: Component,
    #[command(flatten)]
    train: TrainOverrides,
    /// Receives model.json, history.jsonl and report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

fn default_history(out: &Path) -> PathBuf {
    out.with_extension("history.jsonl")
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    Ok(Manifest::load(path)?)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = DatasetConfig {
        n_real: a.n_real,
        n_generated: a.n_fake,
        frames: a.frames,
        seed: a.seed,
        width: a.width,
        height: a.height,
        jitter: JitterSpec {
            sigma_rot_deg: a.sigma_rot,
            sigma_trans: a.sigma_trans,
            dropout: a.dropout,
            sigma_px: a.sigma_px,
            mask_ratio: a.mask_ratio,
        },
        split: SplitFractions {
            train: a.train_frac,
            val: a.val_frac,
        },
        ..DatasetConfig::default()
    };
    cfg.jitter.validate()?;
    let m = make_dataset(&a.out, &cfg)?;
    eprintln!("wrote {} samples to {}", m.samples.len(), a.out.display());
    Ok(())
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let frames = match (&a.frames, &a.segments) {
        (Some(dir), _) => {
            let paths = frame_images(dir)?;
            if paths.is_empty() {
                bail!("no PNG/PGM frames in {}", dir.display());
            }
            let cfg = HoughConfig {
                edge_threshold: a.edge_threshold,
                ..HoughConfig::default()
            };
            lines_from_images(&paths, &cfg)?
        }
        (None, Some(file)) => read_segments(file)?,
        (None, None) => bail!("one of --frames or --segments is required"),
    };
    let sidecar = IntrinsicsSidecar::read(&a.intrinsics)?;
    let id = match &a.id {
        Some(id) => id.clone(),
        None => a
            .out
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("video")
            .to_string(),
    };
    let mut seq_cfg = SequenceConfig::default();
    seq_cfg.vp.seed = a.seed;
    let seq = sequence_from_lines(&id, frames, &sidecar, a.domain.into(), &seq_cfg)?;
    write_features(&a.out, &seq)?;
    eprintln!("{}: {} frames -> {}", id, seq.len(), a.out.display());
    Ok(())
}

fn pretrain(a: &PretrainArgs) -> Result<()> {
    let cfg = a.train.resolve(TrainConfig::pretrain())?;
    let model_cfg: ModelConfig = match &a.model_config {
        Some(p) => read_json(p)?,
        None => ModelConfig::default(),
    };
    let m = load_manifest(&a.data)?;
    let mut data: Vec<_> = load_split(&m, Split::Train, &SequenceConfig::default())?
        .into_iter()
        .filter(|s| s.label == Label::Real)
        .collect();
    if let Some(n) = a.max_samples {
        data.truncate(n);
    }
    let out = pretrain_geometry_head(&data, &model_cfg, &cfg)?;
    out.model.save(&a.out)?;
    write_history(
        &a.history.clone().unwrap_or_else(|| default_history(&a.out)),
        &out.history,
    )?;
    eprintln!(
        "pretrained on {} sequences: loss {:.6e} -> {:.6e} ({:.1}x)",
        data.len(),
        out.initial_loss,
        out.final_loss,
        out.initial_loss / out.final_loss
    );
    Ok(())
}

fn load_train_val(
    data: &Path,
) -> Result<(
    Vec<geovid::geometry::FeatureSequence>,
    Vec<geovid::geometry::FeatureSequence>,
)> {
    let m = load_manifest(data)?;
    let sc = SequenceConfig::default();
    Ok((
        load_split(&m, Split::Train, &sc)?,
        load_split(&m, Split::Val, &sc)?,
    ))
}

fn train(a: &TrainArgs) -> Result<()> {
    let cfg = a.train.resolve(TrainConfig::classifier())?;
    let geo = Model::load(&a.geo_ckpt)?;
    let (tr, val) = load_train_val(&a.data)?;
    let out = train_classifier(&tr, &val, &geo, &cfg)?;
    out.model.save(&a.out)?;
    write_history(
        &a.history.clone().unwrap_or_else(|| default_history(&a.out)),
        &out.history,
    )?;
    let best = &out.history[out.best_epoch];
    eprintln!("best epoch {} (val auc {:?})", out.best_epoch, best.val_auc);
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let m = load_manifest(&a.data)?;
    let data = load_split(&m, a.split, &SequenceConfig::default())?;
    let report = evaluate(&model, &data)?;
    report.save(&a.report)?;
    eprintln!(
        "auc_roc {:.4}  ap {:.4}  f1 {:.4}",
        report.auc_roc, report.ap, report.f1
    );
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    let model = Model::load(&a.ckpt)?;
    let m = load_manifest(&a.data)?;
    let data = load_split(&m, a.split, &SequenceConfig::default())?;
    let samples = write_analysis(&model, &data, &a.out_dir)?;
    eprintln!(
        "analyzed {} samples into {}",
        samples.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn ablate(a: &AblateArgs) -> Result<()> {
    let cfg = a.train.resolve(TrainConfig::classifier())?;
    let geo = Model::load(&a.geo_ckpt)?;
    let m = load_manifest(&a.data)?;
    let sc = SequenceConfig::default();
    let tr = load_split(&m, Split::Train, &sc)?;
    let val = load_split(&m, Split::Val, &sc)?;
    let test = load_split(&m, Split::Test, &sc)?;
    let out = run_ablation(&tr, &val, &test, &geo, a.disable.name(), &cfg, &a.out_dir)?;
    let r = &out.report;
    eprintln!(
        "without {}: auc_roc {:.4}  ap {:.4}  f1 {:.4}",
        out.component, r.auc_roc, r.ap, r.f1
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::PretrainGeo(a) => pretrain(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Analyze(a) => analyze(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
