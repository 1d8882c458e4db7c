//! `jamnull`: command-line driver for the anti-jamming simulator.
//!
//! Exit codes: 0 success, 1 other failures, 2 configuration errors,
//! 3 numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jamnull_core::agent::load_checkpoint;
use jamnull_core::harness::{
    evaluate, link_bounds, run_sweep, run_switch, train, write_frames_csv, write_summary_csv,
    write_training_csv, Config, PolicySpec, Summary,
};
use jamnull_core::Error;

#[derive(Parser)]
#[command(
    name = "jamnull",
    version,
    about = "MU-MIMO anti-jamming simulator with a learned phase scheduler"
)]
struct Cli {
    /// TOML configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// upper-bound, fixed, fixed:<action>, heuristic or learned.
    #[arg(long, global = true)]
    policy: Option<PolicySpec>,
    /// Overrides the number of evaluation frames.
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// Overrides the number of training iterations.
    #[arg(long, global = true)]
    iterations: Option<u64>,
    /// Trained network for the learned policy [default: <out>/agent.bin].
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print path losses and the closed-form spectral-efficiency bounds.
    Bounds,
    /// One rollout of one policy; writes frames.csv and summary.csv.
    Simulate,
    /// Train the Q-network; writes training.csv, checkpoints and agent.bin.
    Train,
    /// Evaluate a policy (every action for `fixed`); writes frames.csv and summary.csv.
    Evaluate,
    /// Every configured policy at every configured jamming power; writes sweep.csv.
    Sweep,
    /// Train through a reversal of the correlation schedule; writes switch.csv.
    Switch,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => 2,
                ref e if e.is_numeric() => 3,
                _ => 1,
            })
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(frames) = cli.frames {
        cfg.frames = frames;
    }
    if let Some(iterations) = cli.iterations {
        cfg.iterations = iterations;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(s: &Summary) {
    println!(
        "{:<14} jamming {:>5.1} dBm  frames {:>6}  C_av_eff {:>8.4}  p_av_ot {:.4}  mu {:.4}",
        s.policy, s.jamming_dbm, s.frames, s.c_av_eff, s.p_av_ot, s.mean_mu
    );
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Bounds => {
            let r = link_bounds(&cfg)?;
            println!("base station path loss  {:.4} dB", r.bs_pathloss_db);
            println!("jammer path loss        {:.4} dB", r.jammer_pathloss_db);
            println!("noise variance          {:e} W", r.noise_var);
            println!("C_ub                    {:.4} bit/s/Hz", r.bounds.upper);
            println!("C_lb                    {:.4} bit/s/Hz", r.bounds.lower);
            println!(
                "C_wbf                   {:.4} bit/s/Hz",
                r.bounds.without_beamforming
            );
        }
        Command::Simulate | Command::Evaluate => {
            let spec = cli.policy.unwrap_or(PolicySpec::UpperBound);
            if matches!(cli.command, Command::Simulate) && spec == PolicySpec::FixedAverage {
                return Err(Error::Input(
                    "simulate runs a single policy; use fixed:<action> or evaluate".into(),
                ));
            }
            let network = match spec {
                PolicySpec::Learned => Some(load_network(cli, &cfg, out)?),
                _ => None,
            };
            let eval = evaluate(&cfg, spec, network.as_ref())?;
            write_frames_csv(&out.join("frames.csv"), &eval.runs)?;
            let mut rows: Vec<Summary> = eval.runs.iter().map(|r| r.summary.clone()).collect();
            if eval.runs.len() > 1 {
                rows.push(eval.summary.clone());
            }
            write_summary_csv(&out.join("summary.csv"), &rows)?;
            for r in &eval.runs {
                if let Some(n) = r.reestimations {
                    log::info!("{}: {n} re-estimation frames", r.name);
                }
            }
            rows.iter().for_each(print_summary);
        }
        Command::Train => {
            let run = train(&cfg, Some(out), None, progress(cfg.iterations))?;
            write_training_csv(&out.join("training.csv"), &run.rows)?;
            if let Some(last) = run.rows.last() {
                println!(
                    "trained {} iterations; rolling C_av_eff {:.4}, rolling outage {:.4}",
                    last.iteration, last.rolling_se, last.rolling_outage
                );
            }
            println!("network written to {}", out.join("agent.bin").display());
        }
        Command::Sweep => {
            let rows = run_sweep(&cfg)?;
            write_summary_csv(&out.join("sweep.csv"), &rows)?;
            rows.iter().for_each(print_summary);
        }
        Command::Switch => {
            let report = run_switch(&cfg, Some(out), progress(cfg.iterations))?;
            write_training_csv(&out.join("switch.csv"), &report.run.rows)?;
            let show = |x: Option<usize>| x.map_or("never".to_owned(), |i| i.to_string());
            println!("schedule reversed at iteration {}", report.switch_iteration);
            println!(
                "initial convergence after {} iterations",
                show(report.initial_convergence)
            );
            println!(
                "reconvergence after {} iterations",
                show(report.reconvergence)
            );
        }
    }
    Ok(())
}

fn load_network(
    cli: &Cli,
    cfg: &Config,
    out: &Path,
) -> Result<jamnull_core::agent::QNetwork, Error> {
    let path = cli
        .checkpoint
        .clone()
        .unwrap_or_else(|| out.join("agent.bin"));
    load_checkpoint(&path, &cfg.network_hash())
}

fn progress(total: u64) -> impl FnMut(&jamnull_core::harness::TrainingRow) {
    let every = (total / 20).max(1);
    move |row| {
        if row.iteration % every == 0 || row.iteration == total {
            log::info!(
                "iteration {}/{total}: epsilon {:.3}, rolling C_av_eff {:.4}, rolling outage {:.4}",
                row.iteration,
                row.epsilon,
                row.rolling_se,
                row.rolling_outage
            );
        }
    }
}
