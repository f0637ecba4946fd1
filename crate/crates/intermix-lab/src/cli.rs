use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use intermix_core::inducing::InducingError;
use intermix_core::statistics::StatsError;
use intermix_core::torus_map::MapError;

use crate::commands::{self, Ctx, LabError};
use crate::config::{ConfigError, LabConfig};
use crate::output::{Format, RunSummary};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ACCEPTANCE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "intermix-lab",
    version,
    about = "Numerical laboratory for an intermittent area-preserving torus map"
)]
pub struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed (replaces `run.seeds`).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, env = "INTERMIX_LAB_THREADS", value_name = "N")]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Map identities, quasi-Hamiltonian drift and cone bands.
    Verify,
    /// Local stable and unstable manifolds and shooting residuals.
    Manifold(ManifoldArgs),
    /// Return-time tail table by quadrature.
    Tail,
    /// Passage laws in the fat and thin regions.
    Passage,
    /// Cell extents and areas.
    Cells(CellsArgs),
    /// Direct correlations and the tail-sum predictor.
    Corr(CorrArgs),
}

#[derive(Debug, Args)]
pub struct ManifoldArgs {
    /// Shooting abscissas, comma separated.
    #[arg(long)]
    pub x0: Option<String>,
    /// Half-width of the manifold graphs.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Vertex spacing along the graphs.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CellsArgs {
    /// Smallest cell index.
    #[arg(long)]
    pub k_min: Option<u64>,
    /// Largest cell index.
    #[arg(long)]
    pub k_max: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    /// Lags, as `a..b` or a comma list.
    #[arg(long)]
    pub lags: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Manifold(_) => "manifold",
            Command::Tail => "tail",
            Command::Passage => "passage",
            Command::Cells(_) => "cells",
            Command::Corr(_) => "corr",
        }
    }

    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        match self {
            Command::Manifold(a) => {
                if let Some(x) = &a.x0 {
                    v.push(("manifold.x0", x.clone()));
                }
                if let Some(x) = a.delta {
                    v.push(("manifold.width", x.to_string()));
                }
                if let Some(x) = a.step {
                    v.push(("manifold.step", x.to_string()));
                }
            }
            Command::Cells(a) => {
                if let Some(k) = a.k_min {
                    v.push(("cells.k_min", k.to_string()));
                }
                if let Some(k) = a.k_max {
                    v.push(("cells.k_max", k.to_string()));
                }
            }
            Command::Corr(a) => {
                if let Some(l) = &a.lags {
                    v.push(("corr.lags", l.clone()));
                }
            }
            _ => {}
        }
        v
    }
}

/// Config from file, `--set` overrides, subcommand flags and global flags, in that order.
pub fn resolve_config(cli: &Cli) -> Result<LabConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => LabConfig::from_file(p)?,
        None => LabConfig::default(),
    };
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    for (k, v) in cli.command.overrides() {
        cfg.set(k, &v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

/// Runs the subcommand on a pool of `workers` threads.
pub fn execute(cli: &Cli) -> Result<RunSummary> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let ctx = Ctx::new(cfg, cli.format)?;
    pool.install(|| match &cli.command {
        Command::Verify => commands::verify::run(&ctx),
        Command::Manifold(_) => commands::manifold::run(&ctx),
        Command::Tail => commands::tail::run(&ctx),
        Command::Passage => commands::passage::run(&ctx),
        Command::Cells(_) => commands::cells::run(&ctx),
        Command::Corr(_) => commands::corr::run(&ctx),
    })
}

pub fn exit_code_for_error(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() || cause.is::<MapError>() {
            return EXIT_CONFIG;
        }
        if let Some(le) = cause.downcast_ref::<LabError>() {
            return match le {
                LabError::MissingInput { .. } | LabError::Unsupported(_) => EXIT_CONFIG,
            };
        }
        match cause.downcast_ref::<InducingError>() {
            Some(InducingError::BudgetExceeded { .. } | InducingError::TimeoutExceeded { .. }) => return EXIT_BUDGET,
            Some(InducingError::InvalidInput(_)) => return EXIT_CONFIG,
            _ => {}
        }
        if let Some(StatsError::InvalidInput(_) | StatsError::SupportOverlapsGate | StatsError::RangeExceeded { .. }) =
            cause.downcast_ref::<StatsError>()
        {
            return EXIT_CONFIG;
        }
    }
    EXIT_ERROR
}

pub fn exit_code_for(summary: &RunSummary) -> i32 {
    if summary.partial {
        EXIT_BUDGET
    } else if summary.pass {
        EXIT_PASS
    } else {
        EXIT_ACCEPTANCE
    }
}

/// Parses arguments, runs, prints failing checks and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(s) => {
            for c in &s.checks {
                let status = if c.pass { "ok  " } else { "FAIL" };
                let measured = c.measured.map_or("n/a".to_string(), crate::output::fmt_float);
                println!("{status} {:<40} {measured:>14}  ({})", c.name, c.requirement);
            }
            if s.partial {
                eprintln!("{}: budget exhausted, outputs are partial", cli.command.name());
            }
            exit_code_for(&s)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code_for_error(&e)
        }
    }
}
