//! `ocdma`: code design, BER sweeps and adaptive-allocation simulation.
//!
//! Every command writes CSV with a header row (or, for `complexity`, a
//! single number). Failures print one JSON error record on stderr. The exit
//! code is 1 when some sweep point has no feasible design and 2 for any
//! other error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{FloatList, RunConfig, Sweep};

#[derive(Parser)]
#[command(
    name = "ocdma",
    version,
    about = "Optical CDMA code design and adaptive allocation"
)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significant digits for exact BER evaluation.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Default)]
struct System {
    /// Users: a list and/or ranges, e.g. `1,5:60:5`.
    #[arg(long = "N")]
    users: Option<Sweep>,
    /// Wavelengths (default 1).
    #[arg(long = "M")]
    wavelengths: Option<u32>,
}

#[derive(Args, Default)]
struct Search {
    /// BER thresholds, comma separated.
    #[arg(long = "pe-th")]
    pe_th: Option<FloatList>,
    /// brute, heuristic or power (default heuristic).
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "l-max")]
    l_max: Option<u32>,
    #[arg(long = "w-max")]
    w_max: Option<u32>,
    #[arg(long = "lambda-max")]
    lambda_max: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact and approximate single-class BER over a user sweep.
    Ber {
        #[command(flatten)]
        system: System,
        #[arg(long = "L")]
        length: Option<u32>,
        #[arg(long = "W")]
        weight: Option<u32>,
        #[arg(long)]
        lambda: Option<u32>,
    },
    /// Optimal code parameters over a users × threshold sweep.
    Design {
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        search: Search,
        /// Fixed code length for the power method.
        #[arg(long = "L")]
        length: Option<u32>,
    },
    /// Monte-Carlo gain of adaptive allocation, or replay of an event trace.
    Simulate {
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        search: Search,
        /// rate or power (default rate).
        #[arg(long)]
        mode: Option<String>,
        /// Activity probabilities, comma separated (default 0.5).
        #[arg(long = "p-active")]
        p_active: Option<FloatList>,
        #[arg(long)]
        intervals: Option<u64>,
        /// CSV trace of `time,user_id,activate|deactivate` messages.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Reallocation period for trace replay.
        #[arg(long)]
        period: Option<f64>,
    },
    /// Ratio of brute-force to heuristic search operations.
    Complexity {
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        search: Search,
    },
    /// Codebook table for every load 1..=N.
    Codebooks {
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        mode: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ber { .. } => "ber",
            Command::Design { .. } => "design",
            Command::Simulate { .. } => "simulate",
            Command::Complexity { .. } => "complexity",
            Command::Codebooks { .. } => "codebooks",
        }
    }
}

fn with_search(cfg: RunConfig, s: Search) -> RunConfig {
    RunConfig {
        pe_th: s.pe_th,
        method: s.method,
        l_max: s.l_max,
        w_max: s.w_max,
        lambda_max: s.lambda_max,
        ..cfg
    }
}

fn flags(cli: Cli) -> (Option<PathBuf>, &'static str, RunConfig) {
    let name = cli.command.name();
    let sh = cli.shared;
    let base = RunConfig {
        out: sh.out,
        seed: sh.seed,
        precision: sh.precision,
        threads: sh.threads,
        ..Default::default()
    };
    let sys = |cfg: RunConfig, s: System| RunConfig {
        users: s.users,
        wavelengths: s.wavelengths,
        ..cfg
    };
    let cfg = match cli.command {
        Command::Ber {
            system,
            length,
            weight,
            lambda,
        } => RunConfig {
            length,
            weight,
            lambda,
            ..sys(base, system)
        },
        Command::Design {
            system,
            search,
            length,
        } => RunConfig {
            length,
            ..with_search(sys(base, system), search)
        },
        Command::Simulate {
            system,
            search,
            mode,
            p_active,
            intervals,
            events,
            period,
        } => RunConfig {
            mode,
            p_active,
            intervals,
            events,
            period,
            ..with_search(sys(base, system), search)
        },
        Command::Complexity { system, search } => with_search(sys(base, system), search),
        Command::Codebooks {
            system,
            search,
            mode,
        } => RunConfig {
            mode,
            ..with_search(sys(base, system), search)
        },
    };
    (sh.config, name, cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let (file, name, flags) = flags(cli);
    let cfg = match file {
        Some(path) => RunConfig::load(&path)?.overlay(flags),
        None => flags,
    };
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    commands::run(name, &cfg)
}

fn error_record(err: &anyhow::Error) -> (u8, serde_json::Value) {
    if let Some(inf) = err.downcast_ref::<commands::InfeasiblePoints>() {
        return (
            1,
            json!({ "error": "infeasible", "message": err.to_string(), "points": inf.points }),
        );
    }
    if let Some(ocdma_core::Error::Infeasible { users }) = err.downcast_ref::<ocdma_core::Error>() {
        return (
            1,
            json!({ "error": "infeasible", "message": err.to_string(), "points": [{ "N": users }] }),
        );
    }
    (
        2,
        json!({ "error": "invalid", "message": format!("{err:#}") }),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, record) = error_record(&err);
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
