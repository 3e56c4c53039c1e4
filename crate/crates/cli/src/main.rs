//! `modred`: build, reduce, enrich and compare two-component models.
//!
//! Exit status: 0 on success, 2 when enrichment stops with modes still
//! flagged, 1 on error.

// `!(a > b)` comparisons are meant to treat NaN as failing.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{DbAction, Flags, Outcome};
use config::RunConfig;
use modred::bases::Method;
use modred::enrich::NormMode;
use modred::quality::PairingRule;

#[derive(Parser)]
#[command(name = "modred", version, about = "Reduced models of two-component structures")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "modred.toml")]
    config: PathBuf,
    /// Overrides `method` from the configuration.
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Skip the full-model solve; reports omit MAC fields.
    #[arg(long, global = true)]
    no_oracle: bool,
    /// Overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Indicator norm.
    #[arg(long, global = true, value_enum)]
    norm: Option<NormArg>,
    /// Mode pairing rule for MAC averages.
    #[arg(long, global = true, value_enum)]
    pairing: Option<PairingArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or ingest the components and write model files.
    Build,
    /// Build a reduction basis and score it.
    Reduce,
    /// Enrich a basis until the residual indicator is below tolerance.
    Enrich,
    /// Tabulate run reports, best MAC average first.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Coupling-vector database.
    Db {
        #[arg(value_enum)]
        action: DbArg,
        /// Database directory; defaults to `<output_dir>/database`.
        path: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Cb,
    Cross,
    Svd,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Paper,
    Flex,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairingArg {
    Greedy,
    Sorted,
}

#[derive(Clone, Copy, ValueEnum)]
enum DbArg {
    Save,
    Load,
    ReusePartial,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(m) = cli.method {
        cfg.method = match m {
            MethodArg::Cb => Method::Cb,
            MethodArg::Cross => Method::Cross,
            MethodArg::Svd => Method::Svd,
        };
    }
    if let Some(dir) = &cli.output {
        cfg.output_dir = dir.clone();
    }
    if let Some(n) = cli.norm {
        cfg.enrichment.norm = match n {
            NormArg::Paper => NormMode::Paper,
            NormArg::Flex => NormMode::Flex,
        };
    }
    if let Some(p) = cli.pairing {
        cfg.pairing = match p {
            PairingArg::Greedy => PairingRule::Greedy,
            PairingArg::Sorted => PairingRule::Sorted,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let flags = Flags { oracle: !cli.no_oracle };
    match &cli.command {
        Command::Compare { reports } => commands::compare(reports, cli.output.as_deref()),
        Command::Build => commands::build(&load_config(cli)?),
        Command::Reduce => commands::reduce(&load_config(cli)?, flags),
        Command::Enrich => commands::enrich(&load_config(cli)?, flags),
        Command::Db { action, path } => {
            let action = match action {
                DbArg::Save => DbAction::Save,
                DbArg::Load => DbAction::Load,
                DbArg::ReusePartial => DbAction::ReusePartial,
            };
            commands::db(&load_config(cli)?, action, path.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
