//! Command-line surface. Each subcommand returns its printed output so the
//! commands can be driven in-process as well as from the binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::director::{condition, Calibration, DirectorConfig, SignConvention, UpdateReport};
use crate::error::{Error, Result};
use crate::eval::{
    cosine_report, eval_end_to_end, eval_latent_modification, render_scores, render_training,
    run_training, sweep_entanglement, EvalConfig, SweepConfig,
};
use crate::io::{
    load_world_config, parse_conditioning, read_text, write_text, ModelBundleFile, WorldFile,
};
use crate::latent::sample_latents;
use crate::models::TrainingConfig;
use crate::world::build_world;

#[derive(Debug, Parser)]
#[command(name = "latent-steer", version, about = "Train latent attribute models and steer latents across them")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a synthetic world from a JSON config and save it.
    WorldInit {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train latent models on oracle labels and save the bundle.
    Train(TrainArgs),
    /// Sample a latent and move it to satisfy `--cond`.
    Generate(GenerateArgs),
    /// Score a bundle over random conditioning trials.
    Eval(EvalArgs),
    /// Accuracy versus configured entanglement of two binary attributes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// JSON training config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Export the world's exact models instead of training.
    #[arg(long)]
    pub ground_truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignMode {
    Corrected,
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationMode {
    Calibrated,
    PaperLiteral,
}

#[derive(Debug, Args)]
pub struct DirectorArgs {
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = SignMode::Corrected)]
    pub sign_mode: SignMode,
    #[arg(long, value_enum, default_value_t = CalibrationMode::Calibrated)]
    pub calibration: CalibrationMode,
    #[arg(long, default_value_t = 3)]
    pub max_redirects: usize,
}

impl DirectorArgs {
    fn config(&self) -> DirectorConfig {
        DirectorConfig {
            delta_margin: self.delta,
            sign_convention: match self.sign_mode {
                SignMode::Corrected => SignConvention::Corrected,
                SignMode::PaperLiteral => SignConvention::PaperLiteral,
            },
            continuous_calibration: match self.calibration {
                CalibrationMode::Calibrated => Calibration::Calibrated,
                CalibrationMode::PaperLiteral => Calibration::PaperLiteral,
            },
            multiclass_max_redirects: self.max_redirects,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub world: PathBuf,
    #[arg(long)]
    pub cond: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub director: DirectorArgs,
    /// Directory receiving before.pgm and after.pgm.
    #[arg(long)]
    pub dump_image: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Latent,
    End2end,
    Cosine,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Required for end2end mode.
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalMode::Latent)]
    pub mode: EvalMode,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repair rounds; 0 keeps the single-step update.
    #[arg(long, default_value_t = 0)]
    pub repair: usize,
    #[command(flatten)]
    pub director: DirectorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated configured cosines.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub cos: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub repair: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::WorldInit { config, out } => cmd_world_init(&config, &out),
        Command::Train(a) => cmd_train(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

pub fn cmd_world_init(config: &Path, out: &Path) -> Result<String> {
    let world = build_world(load_world_config(config)?)?;
    WorldFile::new(&world).save(out)?;
    let names: Vec<String> = world
        .config()
        .attributes
        .iter()
        .flat_map(|a| match a.direction_count() {
            1 => vec![a.name.clone()],
            _ => a.classes().iter().map(|c| format!("{}:{c}", a.name)).collect(),
        })
        .collect();
    let mut text = format!("wrote {}\nrealized entanglement:\n", out.display());
    text.push_str(&render_matrix(&names, &world.realized_entanglement()));
    Ok(text)
}

pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let world = WorldFile::load(&a.world)?;
    if a.ground_truth {
        let bundle = world.ground_truth_bundle()?;
        ModelBundleFile::new(&bundle, None).save(&a.out)?;
        return Ok(format!("wrote ground-truth bundle {}\n", a.out.display()));
    }
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<TrainingConfig>(&read_text(p)?)
            .map_err(|e| Error::json(format!("parsing {}", p.display()), e))?,
        None => TrainingConfig::default(),
    };
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.l2 {
        cfg.l2_penalty = v;
    }
    if let Some(v) = a.split {
        cfg.split_fraction = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let trained = run_training(&world, a.n, &cfg)?;
    ModelBundleFile::from_trained(&trained).save(&a.out)?;
    Ok(format!("{}wrote {}\n", render_training(&trained), a.out.display()))
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<String> {
    let bundle = ModelBundleFile::load(&a.bundle)?.to_bundle()?;
    let world = WorldFile::load(&a.world)?;
    if world.dim() != bundle.dim() {
        return Err(Error::DimensionMismatch {
            expected: world.dim(),
            found: bundle.dim(),
        });
    }
    let spec = parse_conditioning(&a.cond, bundle.attributes())?;
    let z = sample_latents(1, bundle.dim(), a.seed)?.remove(0);
    let report = condition(&z, &spec, &bundle, &a.director.config())?;
    let mut text = render_update(&report);
    if let Some(dir) = &a.dump_image {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (name, latent) in [("before.pgm", &report.z), ("after.pgm", &report.z_prime)] {
            let path = dir.join(name);
            write_text(&path, &world.generate_image(latent)?.to_pgm())?;
            let _ = writeln!(text, "wrote {}", path.display());
        }
    }
    Ok(text)
}

pub fn render_update(r: &UpdateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>20} {:>20}", "attribute", "before", "after");
    for (name, before) in &r.labels_before.discrete {
        let after = &r.labels_after.discrete[name];
        let _ = writeln!(out, "{name:<12} {before:>20} {after:>20}");
    }
    for (name, before) in &r.labels_before.continuous {
        let after = r.labels_after.continuous[name];
        let _ = writeln!(out, "{name:<12} {before:>20} {after:>20}");
    }
    out.push_str("signed distances:\n");
    for d in &r.distances {
        let _ = writeln!(out, "{:<12} {:>20} {:>20}", d.attribute, d.before, d.after);
    }
    for (name, moves) in &r.multiclass_moves {
        let _ = writeln!(out, "{name}: {moves} pairwise move(s)");
    }
    if r.is_identity() {
        out.push_str("z' = z\n");
    } else {
        let shift: f64 = r
            .z
            .as_slice()
            .iter()
            .zip(r.z_prime.as_slice())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        let _ = writeln!(out, "||z' - z|| = {shift}");
    }
    out
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let bundle = ModelBundleFile::load(&a.bundle)?.to_bundle()?;
    let cfg = EvalConfig {
        trials: a.trials,
        seed: a.seed,
        director: a.director.config(),
        repair_rounds: a.repair,
    };
    cfg.validate()?;
    let (mut text, csv) = match a.mode {
        EvalMode::Cosine => {
            let r = cosine_report(&bundle)?;
            (r.render(), r.to_csv()?)
        }
        EvalMode::Latent => {
            let s = eval_latent_modification(&bundle, &cfg)?;
            (render_scores("latent modification", &s), s.to_csv()?)
        }
        EvalMode::End2end => {
            let path = a
                .world
                .as_ref()
                .ok_or_else(|| Error::Config("end2end mode needs --world".into()))?;
            let world = WorldFile::load(path)?;
            let s = eval_end_to_end(&bundle, &world, &cfg)?;
            (render_scores("end to end", &s), s.to_csv()?)
        }
    };
    if let Some(out) = &a.out {
        write_text(out, &csv)?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(text)
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<String> {
    let cfg = SweepConfig {
        dim: a.dim,
        n_samples: a.n,
        trials: a.trials,
        seed: a.seed,
        repair_rounds: a.repair,
        ..Default::default()
    };
    if a.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let outcome = sweep_entanglement(&a.cos, &cfg);
    let csv = outcome.to_csv()?;
    let mut text = csv.clone();
    for e in &outcome.errors {
        let _ = writeln!(text, "cosine {}: {}", e.cosine, e.message);
    }
    if let Some(out) = &a.out {
        write_text(out, &csv)?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(text)
}

fn render_matrix(labels: &[String], m: &[Vec<f64>]) -> String {
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(7);
    let mut out = format!("{:width$}", "");
    for l in labels {
        let _ = write!(out, " {l:>width$}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(m) {
        let _ = write!(out, "{l:width$}");
        for v in row {
            let _ = write!(out, " {v:>width$.4}");
        }
        out.push('\n');
    }
    out
}
