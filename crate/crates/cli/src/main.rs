use cglab::config::ExperimentConfig;
use cglab::dataset::Dataset;
use cglab::error::{CliError, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cglab",
    version,
    about = "Closure calibration experiments on coarse-grained QG turbulence"
)]
struct Cli {
    /// Experiment config (TOML); desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to a subdirectory of the config `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spin up the fine model and write a coarse-grained dataset.
    Generate,
    /// Train the configured closure on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Continue after the last completed curriculum phase.
        #[arg(long)]
        resume: bool,
    },
    /// Score curves, spectra, ΔE and long runs on validation data.
    Evaluate {
        #[arg(long)]
        validation: PathBuf,
        /// Trained checkpoint; only the no-closure baseline without it.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a theory suite: prop1, prop2, si-prop1 or scoring.
    Theory { suite: String },
    /// Render a report CSV as an SVG line chart.
    Plot {
        input: PathBuf,
        #[arg(long)]
        log: bool,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig, sub: &str) -> PathBuf {
    cli.out
        .clone()
        .unwrap_or_else(|| Path::new(&cfg.out).join(sub))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate => {
            let cfg = load_config(&cli)?;
            let out = out_dir(&cli, &cfg, &format!("data_seed{}", cfg.seed));
            let m = cglab::dataset::generate(&cfg, cfg.seed, &out)?;
            println!(
                "{}: {} snapshots, series sha256 {}",
                out.display(),
                m.count,
                m.series_sha256
            );
        }
        Command::Train { data, resume } => {
            let cfg = load_config(&cli)?;
            let out = out_dir(&cli, &cfg, "checkpoint");
            let ds = Dataset::open(data, &cfg)?;
            let t = cglab::train::train(&cfg, &ds, &out, *resume)?;
            for p in &t.phases {
                println!(
                    "phase {} w={} loss {:e} -> {:e}",
                    p.phase, p.window, p.initial_loss, p.final_loss
                );
            }
            println!("checkpoint written to {}", out.display());
        }
        Command::Evaluate {
            validation,
            checkpoint,
        } => {
            let cfg = load_config(&cli)?;
            let out = out_dir(&cli, &cfg, "evaluation");
            let report = cglab::evaluate::evaluate(&cfg, validation, checkpoint.as_deref())?;
            report.write(&out)?;
            print!("{}", report.summary_csv());
        }
        Command::Theory { suite } => {
            let cfg = load_config(&cli)?;
            let report = cglab::theory(suite, cfg.seed, cli.out.as_deref())?;
            print!("{}", report.to_text());
            if !report.passed() {
                let failed = report.checks.iter().filter(|c| !c.pass).count();
                return Err(CliError::ChecksFailed { failed });
            }
        }
        Command::Plot { input, log } => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| input.with_extension("svg"));
            cglab::plot::plot_file(input, &out, *log)?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
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
