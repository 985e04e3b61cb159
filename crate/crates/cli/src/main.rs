use std::path::PathBuf;
use std::process::ExitCode;

use cfvae_cli::pipeline::{cmd_ablation, cmd_audit, cmd_ingest, cmd_train, output_dir};
use cfvae_cli::{Arm, LoadedConfig, RunError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cfvae", version, about = "Train, audit and ablate causally constrained VAEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output (or, for `audit`, run) directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Load, split and archive the dataset.
    Ingest(Common),
    /// Train a model and write the run directory.
    Train(Common),
    /// Evaluate predictors on a trained run and write the audit report.
    Audit(Common),
    /// Run the ablation arms and write the comparison table.
    Ablation {
        #[command(flatten)]
        common: Common,
        /// Restrict to these arms (repeatable): full_features, no_constraints,
        /// constraints_tcr, cfvae.
        #[arg(long)]
        arm: Vec<Arm>,
    },
    /// Check a config without running anything.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(common: &Common) -> Result<LoadedConfig, RunError> {
    let cfg = LoadedConfig::from_path(&common.config)?;
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::ValidateConfig { config } => {
            LoadedConfig::from_path(&config)?;
            println!("{}: ok", config.display());
        }
        Command::Ingest(c) => {
            let cfg = load(&c)?;
            let out = output_dir(&cfg, c.out)?;
            let ds = cmd_ingest(&cfg, &out)?;
            println!("wrote {} rows to {}", ds.n_rows(), out.join("dataset").display());
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let out = output_dir(&cfg, c.out)?;
            let t = cmd_train(&cfg, &out)?;
            let first = t.report.history.first().map_or(f64::NAN, |b| b.total);
            let last = t.report.history.last().map_or(f64::NAN, |b| b.total);
            println!(
                "trained {} epochs in {:.1}s (total loss {first:.4} -> {last:.4}); run directory {}",
                t.report.history.len(),
                t.report.wall_clock_seconds,
                out.display()
            );
        }
        Command::Audit(c) => {
            let cfg = load(&c)?;
            let out = output_dir(&cfg, c.out)?;
            let report = cmd_audit(&cfg, &out)?;
            print!("{}", report.to_markdown());
        }
        Command::Ablation { common, arm } => {
            let cfg = load(&common)?;
            let out = output_dir(&cfg, common.out)?;
            let arms = (!arm.is_empty()).then_some(arm.as_slice());
            let table = cmd_ablation(&cfg, &out, arms)?;
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
