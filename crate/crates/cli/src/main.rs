//! `scatterlab` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scatterlab::pipeline::config::{CampaignConfig, Mode};
use scatterlab::pipeline::{grid_dump, run, PipelineError};

#[derive(Parser)]
#[command(name = "scatterlab", version, about = "Binary-single scattering campaigns and flux-based outcome prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the chaotic absorptivity on a bi- or tri-variate grid.
    Absorptivity {
        #[command(flatten)]
        common: Common,
        /// Grid kind when the config does not fix the mode.
        #[arg(long, value_enum)]
        kind: Option<AbsorptivityKind>,
    },
    /// Simulate full disintegrations and histogram the chaotic escapes.
    Outcome(Common),
    /// Predict the outcome distribution from an absorptivity map.
    Predict(Common),
    /// Compare a prediction against a measured outcome histogram.
    Compare(Common),
    /// Write the configured grid to `<out>/grid.csv` without simulating.
    GridDump {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<AbsorptivityKind>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AbsorptivityKind {
    Bivariate,
    Trivariate,
}

impl AbsorptivityKind {
    fn mode(self) -> Mode {
        match self {
            AbsorptivityKind::Bivariate => Mode::AbsorptivityBivariate,
            AbsorptivityKind::Trivariate => Mode::AbsorptivityTrivariate,
        }
    }
}

#[derive(Args)]
struct Common {
    /// TOML campaign config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Multiplies the configured number of realizations.
    #[arg(long)]
    scale: Option<f64>,
    /// Worker threads, overriding the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

fn load(common: &Common, default_mode: Mode, allowed: &[Mode]) -> Result<CampaignConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(p) => CampaignConfig::load(p)?,
        None => CampaignConfig::new(default_mode),
    };
    if !allowed.contains(&cfg.mode) {
        return Err(PipelineError::Config(format!(
            "config mode {} does not fit this subcommand",
            cfg.mode
        )));
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = Some(w);
    }
    if let Some(f) = common.scale {
        cfg.scale(f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<ExitCode, PipelineError> {
    const ABSORPTIVITY: [Mode; 2] = [Mode::AbsorptivityBivariate, Mode::AbsorptivityTrivariate];
    let (common, cfg) = match &cli.command {
        Command::Absorptivity { common, kind } => {
            let mut cfg = load(common, Mode::AbsorptivityBivariate, &ABSORPTIVITY)?;
            if let Some(k) = kind {
                if common.config.is_some() && cfg.mode != k.mode() {
                    return Err(PipelineError::Config("--kind contradicts the config mode".into()));
                }
                cfg.mode = k.mode();
            }
            (common, cfg)
        }
        Command::Outcome(c) => (c, load(c, Mode::Outcome, &[Mode::Outcome])?),
        Command::Predict(c) => (c, load(c, Mode::Predict, &[Mode::Predict])?),
        Command::Compare(c) => (c, load(c, Mode::Compare, &[Mode::Compare])?),
        Command::GridDump { common, kind } => {
            let all = [ABSORPTIVITY[0], ABSORPTIVITY[1], Mode::Outcome, Mode::Predict, Mode::Compare];
            let mut cfg = load(common, Mode::AbsorptivityBivariate, &all)?;
            if let Some(k) = kind {
                cfg.mode = k.mode();
            }
            let n = grid_dump(&cfg, &common.out)?;
            if !common.quiet {
                eprintln!("{n} grid points written to {}", common.out.join("grid.csv").display());
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    let quiet = common.quiet;
    let started = std::time::Instant::now();
    let mut progress = |done: u64, total: u64| {
        if !quiet {
            eprintln!(
                "[{:>8.1}s] {done}/{total} realizations",
                started.elapsed().as_secs_f64()
            );
        }
    };
    let summary = run(&cfg, &common.out, &mut progress)?;
    print!("{}", summary.report);
    if summary.flag_limit_exceeded {
        eprintln!(
            "flagged fraction {} exceeds the configured limit {}",
            summary.flagged_fraction, cfg.max_flagged_fraction
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PipelineError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
