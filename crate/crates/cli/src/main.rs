use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fundcost_cli::{
    cmd_alm, cmd_classify, cmd_cost, cmd_validate, AlmMode, CliResult, CostMode, Failure, Format, Overrides,
    Report, RunConfig,
};

/// Maintenance cost of an externally financed fund.
#[derive(Debug, Parser)]
#[command(name = "fundcost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `[sim] seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated report times; overrides `[grid] times`.
    #[arg(long = "t", value_delimiter = ',')]
    times: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether the reserve is ruined in finite expected time.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Exit with code 3 when the classification is inconclusive.
        #[arg(long)]
        strict: bool,
    },
    /// Expected discounted injection cost.
    Cost {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "perpetual")]
        mode: CostMode,
        /// Use the general solvers even when closed forms apply.
        #[arg(long)]
        force_general: bool,
    },
    /// Asset-liability scheme.
    Alm {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "perpetual")]
        mode: AlmMode,
    },
    /// Cross-check closed forms, the ODE solver and simulation.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&Overrides {
        seed: common.seed,
        format: common.format,
        out: common.out.clone(),
        times: common.times.clone(),
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<(Report, RunConfig)> {
    Ok(match cli.command {
        Command::Classify { common, strict } => {
            let cfg = load(&common)?;
            (cmd_classify(&cfg, strict)?, cfg)
        }
        Command::Cost {
            common,
            mode,
            force_general,
        } => {
            let cfg = load(&common)?;
            (cmd_cost(&cfg, mode, force_general)?, cfg)
        }
        Command::Alm { common, mode } => {
            let cfg = load(&common)?;
            (cmd_alm(&cfg, mode)?, cfg)
        }
        Command::Validate { common } => {
            let cfg = load(&common)?;
            (cmd_validate(&cfg)?, cfg)
        }
    })
}

fn emit(report: &Report, cfg: &RunConfig) -> std::io::Result<()> {
    match &cfg.output.path {
        Some(p) => std::fs::write(p, &report.text),
        None => std::io::stdout().lock().write_all(report.text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((report, cfg)) => {
            if let Err(e) = emit(&report, &cfg) {
                eprintln!("error: cannot write report: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(report.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Failure::exit_code(&e) as u8)
        }
    }
}
