//! Command line driver: network generation, data collection, policy runs,
//! parameter sweeps and comparison tables.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

use amod_core::policies::PolicyKind;
use clap::{Args, Parser, Subcommand};

pub use config::{load_config, parse_config, render_config, ConfigError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "amod", version, about = "Hierarchical rebalancing experiments for mobility-on-demand fleets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Replaces the seed list (for `collect`, the collection seed).
    #[arg(short, long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `out_dir` from the configuration.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the road network and its region partition as CSV.
    NetGen(Common),
    /// Run the excitation policy and store the data the controller needs.
    Collect(Common),
    /// Simulate one policy over every seed.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides `policy` from the configuration.
        #[arg(short, long)]
        policy: Option<PolicyKind>,
        /// Overrides `controller.data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Repeat the configured run over a list of parameter values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// alpha, sigma2 or snr_db.
        #[arg(long)]
        param: sweep::SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Overrides `controller.data`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Seed-averaged comparison table from run directories or metrics files.
    Report {
        /// Run directories or `metrics.csv` files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the configuration with every default filled in.
    Config(Common),
}

fn prepare(common: &Common, seed_is_collection: bool) -> anyhow::Result<(amod_core::experiment::RunConfig, PathBuf)> {
    let mut cfg = config::config_or_default(common.config.as_deref())?;
    if let Some(s) = common.seed {
        if seed_is_collection {
            cfg.controller.collection_seed = s;
        } else {
            cfg.seeds = vec![s];
        }
    }
    let out = commands::out_dir(common.out.as_deref(), &cfg);
    Ok((cfg, out))
}

/// Executes one command and returns what it prints on success.
pub fn execute(command: Command) -> anyhow::Result<String> {
    match command {
        Command::NetGen(common) => {
            let (cfg, out) = prepare(&common, false)?;
            commands::net_gen(&cfg, &out)
        }
        Command::Collect(common) => {
            let (cfg, out) = prepare(&common, true)?;
            commands::collect(&cfg, &out)
        }
        Command::Run { common, policy, data } => {
            let (mut cfg, out) = prepare(&common, false)?;
            if let Some(p) = policy {
                cfg.policy = p;
            }
            if data.is_some() {
                cfg.controller.data = data;
            }
            commands::run(&cfg, &out)
        }
        Command::Sweep {
            common,
            param,
            values,
            data,
        } => {
            let (mut base, out) = prepare(&common, false)?;
            if data.is_some() {
                base.controller.data = data;
            }
            if base.controller.data.is_none() {
                return Err(config::config_error(
                    "sweeps need collected data: run the `collect` subcommand and set controller.data",
                ));
            }
            let spec = sweep::SweepSpec { param, values, base };
            let result = sweep::run_sweep(&spec)?;
            sweep::write_outputs(&spec, &result, &out)?;
            let mut msg = format!(
                "{} runs written to {}\n",
                result.rows.len(),
                out.join(sweep::SWEEP_FILE).display()
            );
            if !result.failures.is_empty() {
                for (v, s, e) in &result.failures {
                    msg.push_str(&format!("failed: {param} = {v}, seed {s}: {e}\n"));
                }
                anyhow::bail!("{msg}{} of {} points failed", result.failures.len(), result.failures.len() + result.rows.len());
            }
            Ok(msg)
        }
        Command::Report { inputs, csv } => {
            let metrics = inputs.iter().map(|p| report::load_metrics(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let rows = report::build_report(&metrics)?;
            if let Some(path) = csv {
                output::write_atomic(&path, |w| report::write_report_csv(&rows, w))?;
            }
            Ok(report::render_table(&rows))
        }
        Command::Config(common) => {
            let (cfg, _) = prepare(&common, false)?;
            Ok(render_config(&cfg))
        }
    }
}

/// Exit code for a failed command: 1 for bad input, 2 for anything that
/// went wrong while running.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use amod_core::Error as E;
    let is_config = err.chain().any(|cause| {
        cause.downcast_ref::<ConfigError>().is_some()
            || matches!(cause.downcast_ref::<E>(), Some(E::Config(_) | E::Parse { .. }))
    });
    if is_config {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}
