//! `dicov`: seeded simulation studies of distributed sparse
//! precision-matrix estimation, and the hub/worker network round.

mod settings;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::{fs, io};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dicov_core::chain_precision;
use dicov_core::datagen::sample_machine;
use dicov_core::experiment::{
    render_beta_csv, render_machines_csv, render_trials_csv, run_experiment, sweep_beta,
    sweep_machines,
};
use dicov_core::matrix::SparseSymMatrix;
use dicov_core::wire::{hub_serve, worker_run, ACK_DUPLICATE, ACK_OK, ACK_REJECTED};

use settings::{CommonArgs, FileConfig};

#[derive(Parser, Debug)]
#[command(name = "dicov", version, about = "Distributed sparse precision-matrix estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run seeded trials; one CSV row per (trial, estimator).
    Simulate(CommonArgs),
    /// Summarize each metric across several machine counts.
    SweepMachines(SweepMachinesArgs),
    /// Summarize selection rates across several tuning multipliers.
    SweepBeta(SweepBetaArgs),
    /// Serve one aggregation round, then print the thresholded estimate.
    Hub(CommonArgs),
    /// Estimate on locally generated data and transmit it to the hub.
    ///
    /// The worker synthesizes its shard from p, n, a, base_seed, and its
    /// machine id; the penalty and bandwidth budget arrive from the hub.
    Worker(WorkerArgs),
}

#[derive(Args, Debug)]
struct SweepMachinesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated machine counts (default 2,4,8).
    #[arg(long)]
    m_values: Option<String>,
}

#[derive(Args, Debug)]
struct SweepBetaArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated tuning multipliers (default 0.2,0.6,1,1.4,2).
    #[arg(long)]
    beta_values: Option<String>,
}

#[derive(Args, Debug)]
struct WorkerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// This worker's machine id in [0, M).
    #[arg(long)]
    machine_id: Option<u32>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("dicov: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = settings::resolve_experiment(&args, &file)?;
            let rows = run_experiment(&config)?;
            emit(args.out.as_deref(), &render_trials_csv(&rows))
        }
        Command::SweepMachines(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let config = settings::resolve_experiment(&args.common, &file)?;
            let m_values = settings::resolve_m_values(args.m_values.as_deref(), &file)?;
            let rows = sweep_machines(&config, &m_values)?;
            emit(args.common.out.as_deref(), &render_machines_csv(&rows))
        }
        Command::SweepBeta(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let config = settings::resolve_experiment(&args.common, &file)?;
            let beta_values = settings::resolve_beta_values(args.beta_values.as_deref(), &file)?;
            let rows = sweep_beta(&config, &beta_values)?;
            emit(args.common.out.as_deref(), &render_beta_csv(&rows))
        }
        Command::Hub(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = settings::resolve_experiment(&args, &file)?;
            let estimate = hub_serve(&config)?;
            eprintln!(
                "hub: aggregated {} updates, tau={}, kept {} off-diagonal entries",
                estimate.machines,
                estimate.tau,
                estimate.theta_final.count_offdiag()
            );
            emit(args.out.as_deref(), &render_entries_csv(&estimate.theta_final))
        }
        Command::Worker(args) => {
            let file = FileConfig::load(args.common.config.as_deref())?;
            let config = settings::resolve_experiment(&args.common, &file)?;
            let machine_id = settings::resolve_machine_id(args.machine_id, &file)?;
            let model = chain_precision(config.p, config.a)?;
            let data = sample_machine(&model, config.base_seed, machine_id, config.n);
            let addr = format!("{}:{}", config.address, config.port);
            match worker_run(&data, &addr, machine_id)? {
                ACK_OK => {
                    eprintln!("worker {machine_id}: update accepted");
                    Ok(())
                }
                ACK_DUPLICATE => {
                    bail!("hub refused machine id {machine_id} (duplicate or out of range)")
                }
                ACK_REJECTED => bail!("hub rejected machine {machine_id}'s update as inconsistent"),
                other => bail!("hub answered with unknown ack status {other}"),
            }
        }
    }
}

/// Upper-triangle entries of the final estimate, one `i,j,value` row each.
fn render_entries_csv(m: &SparseSymMatrix) -> String {
    let mut out = String::from("i,j,value\n");
    for &(i, j, v) in m.entries() {
        out.push_str(&format!("{i},{j},{v}\n"));
    }
    out
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes()).context("writing to stdout")?;
            Ok(())
        }
    }
}
