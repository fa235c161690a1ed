use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corrmatch::studies::{outlier, partial, perturb, register, sweep, train};
use corrmatch::{Error, ExperimentConfig, Result, StudyOutput};
use corrmatch_core::learn::FeatureNet;

#[derive(Parser)]
#[command(
    name = "corrmatch",
    version,
    about = "Correspondence-matrix point-cloud registration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Alignment error vs. corrupted correspondences and rotation vectors.
    Perturb(Common),
    /// Accuracy per initial-misalignment bucket.
    Sweep(Common),
    /// The sweep with cropped source clouds.
    Partial(Common),
    /// Outlier-augmented correspondences with corrupted source points.
    Outlier(Common),
    /// Train the feature network; writes per-epoch CSV and a checkpoint.
    Train(Common),
    /// Register two XYZ files with a checkpoint; prints R row-major then t.
    Register {
        #[command(flatten)]
        common: Common,
        source: PathBuf,
        target: PathBuf,
        /// Overrides `checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(out) = &c.out {
        cfg.out_dir = out.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint(cfg: &ExperimentConfig) -> Result<Option<FeatureNet>> {
    cfg.checkpoint
        .as_ref()
        .map(FeatureNet::load)
        .transpose()
        .map_err(Error::from)
}

fn emit(cfg: &ExperimentConfig, out: &StudyOutput) -> Result<()> {
    for path in out.write(cfg, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn save_net(net: &FeatureNet, path: &Path) -> Result<()> {
    net.save(path)?;
    println!("{}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Perturb(c) => {
            let cfg = load_config(&c)?;
            emit(&cfg, &perturb::run_perturbation_study(&cfg)?)
        }
        Command::Sweep(c) => {
            let cfg = load_config(&c)?;
            let net = checkpoint(&cfg)?;
            emit(&cfg, &sweep::run_misalignment_sweep(&cfg, net.as_ref())?)
        }
        Command::Partial(c) => {
            let cfg = load_config(&c)?;
            let net = checkpoint(&cfg)?;
            let (out, trained) = partial::run_partial_experiment(&cfg, net.as_ref())?;
            emit(&cfg, &out)?;
            match trained {
                Some(n) => save_net(&n, &cfg.out_dir.join("partial.ckpt")),
                None => Ok(()),
            }
        }
        Command::Outlier(c) => {
            let cfg = load_config(&c)?;
            let net = checkpoint(&cfg)?;
            emit(&cfg, &outlier::run_outlier_experiment(&cfg, net.as_ref())?)
        }
        Command::Train(c) => {
            let cfg = load_config(&c)?;
            let (out, run) = train::run_training(&cfg)?;
            emit(&cfg, &out)?;
            // On divergence the last good network is still saved.
            save_net(&run.net, &cfg.out_dir.join("train.ckpt"))?;
            match run.failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
        Command::Register {
            common,
            source,
            target,
            checkpoint,
        } => {
            let cfg = load_config(&common)?;
            let ckpt = checkpoint
                .or(cfg.checkpoint)
                .ok_or_else(|| Error::Config("register needs a checkpoint".into()))?;
            let t = register::register_files(&source, &target, &ckpt)?;
            println!("{}", register::format_transform(&t));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
