use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{Config, PolicySpec};
use super::units::Power;
use crate::agent::{save_checkpoint, QNetwork, Trainer};
use crate::beamform::{spectral_bounds, LinkBudget, SpectralBounds};
use crate::env::{AntiJamTask, Environment, FrameResult};
use crate::numerics::Rng;
use crate::policies::{rollout, Fixed, Heuristic, Learned, Policy, UpperBound};
use crate::{Error, Result};

pub const SEED_TRAIN_ENV: u64 = 10;
pub const SEED_AGENT: u64 = 11;
pub const SEED_EVAL_ENV: u64 = 12;

/// Independent seed for one purpose, derived from the configured seed.
pub fn derive_seed(base: u64, purpose: u64) -> u64 {
    Rng::stream(base, purpose).next_u64()
}

/// Running mean over the last `window` values.
#[derive(Debug, Clone)]
pub struct Rolling {
    window: usize,
    values: VecDeque<f64>,
}

impl Rolling {
    pub fn new(window: usize) -> Self {
        Rolling {
            window: window.max(1),
            values: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.values.len() == self.window {
            self.values.pop_front();
        }
        self.values.push_back(x);
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    pub fn clear(&mut self) {
        self.values.clear();
    }
}

/// Long-run metrics of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub policy: String,
    pub jamming_dbm: f64,
    pub frames: usize,
    /// Mean effective spectral efficiency, bit/s/Hz per stream.
    pub c_av_eff: f64,
    /// Fraction of stream-frames in outage.
    pub p_av_ot: f64,
    pub mean_mu: f64,
}

pub fn summarize(
    policy: &str,
    jamming_dbm: f64,
    frames: &[FrameResult],
    outage_db: f64,
) -> Summary {
    let n = frames.len().max(1) as f64;
    Summary {
        policy: policy.to_owned(),
        jamming_dbm,
        frames: frames.len(),
        c_av_eff: frames.iter().map(FrameResult::effective_se).sum::<f64>() / n,
        p_av_ot: frames
            .iter()
            .map(|f| f.outage_fraction(outage_db))
            .sum::<f64>()
            / n,
        mean_mu: frames.iter().map(|f| f.mu).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub name: String,
    pub frames: Vec<FrameResult>,
    pub summary: Summary,
    /// Boosted-estimation frames of the heuristic.
    pub reestimations: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: Summary,
    /// One run per concrete policy; the fixed average has one per action.
    pub runs: Vec<PolicyRun>,
}

fn run_one(
    cfg: &Config,
    policy: &mut dyn Policy,
    seed: u64,
    name: Option<String>,
) -> Result<PolicyRun> {
    let mut env = Environment::new(cfg.env_params()?, seed)?;
    let mut frames = Vec::with_capacity(cfg.frames);
    rollout(&mut env, policy, cfg.frames, |f| {
        frames.push(f.clone());
        Ok(())
    })?;
    let name = name.unwrap_or_else(|| policy.name());
    let summary = summarize(
        &name,
        cfg.jamming.power.dbm(),
        &frames,
        cfg.protocol.outage_threshold.db,
    );
    Ok(PolicyRun {
        name,
        frames,
        summary,
        reestimations: None,
    })
}

/// Evaluates a policy for `cfg.frames` frames on the evaluation seed.
pub fn evaluate(cfg: &Config, spec: PolicySpec, network: Option<&QNetwork>) -> Result<Evaluation> {
    let seed = derive_seed(cfg.seed, SEED_EVAL_ENV);
    let probe = Environment::new(cfg.env_params()?, seed)?;
    let runs = match spec {
        PolicySpec::UpperBound => vec![run_one(cfg, &mut UpperBound::new(), seed, None)?],
        PolicySpec::Fixed(n) => {
            let a = probe
                .actions()
                .from_number(n)
                .map_err(|e| Error::config("policy", e.to_string()))?;
            vec![run_one(cfg, &mut Fixed::new(a), seed, None)?]
        }
        PolicySpec::FixedAverage => probe
            .actions()
            .actions()
            .map(|a| run_one(cfg, &mut Fixed::new(a), seed, None))
            .collect::<Result<Vec<_>>>()?,
        PolicySpec::Heuristic => {
            let mut h = Heuristic::new(cfg.heuristic.to_config())?;
            let mut run = run_one(cfg, &mut h, seed, None)?;
            run.reestimations = Some(h.reestimations());
            vec![run]
        }
        PolicySpec::Learned => {
            let net = network
                .ok_or_else(|| Error::Input("the learned policy needs a trained network".into()))?;
            vec![run_one(
                cfg,
                &mut Learned::new(net.clone(), &probe)?,
                seed,
                None,
            )?]
        }
    };
    let k = runs.len() as f64;
    let summary = Summary {
        policy: spec.to_string(),
        jamming_dbm: cfg.jamming.power.dbm(),
        frames: cfg.frames,
        c_av_eff: runs.iter().map(|r| r.summary.c_av_eff).sum::<f64>() / k,
        p_av_ot: runs.iter().map(|r| r.summary.p_av_ot).sum::<f64>() / k,
        mean_mu: runs.iter().map(|r| r.summary.mean_mu).sum::<f64>() / k,
    };
    Ok(Evaluation { summary, runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub iteration: u64,
    /// One-based action number.
    pub action: usize,
    pub epsilon: f64,
    pub explored: bool,
    /// Learning reward after scaling.
    pub reward: f64,
    pub effective_se: f64,
    pub outage_fraction: f64,
    pub loss: Option<f64>,
    pub rho_estimation: f64,
    pub rho_data: f64,
    pub rolling_se: f64,
    pub rolling_outage: f64,
}

pub struct TrainingRun {
    pub rows: Vec<TrainingRow>,
    pub network: QNetwork,
    pub checkpoints: Vec<PathBuf>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Trains for `cfg.iterations`. When `switch_at` is set, the correlation
/// schedule reverses direction at that iteration and the rolling metrics
/// restart. Checkpoints go to `out/checkpoints` when `out` is given.
pub fn train(
    cfg: &Config,
    out: Option<&Path>,
    switch_at: Option<u64>,
    mut progress: impl FnMut(&TrainingRow),
) -> Result<TrainingRun> {
    let env = Environment::new(cfg.env_params()?, derive_seed(cfg.seed, SEED_TRAIN_ENV))?;
    let mut task = AntiJamTask::new(env);
    let mut trainer =
        Trainer::for_task(cfg.agent.clone(), &task, derive_seed(cfg.seed, SEED_AGENT))?;
    let hash = cfg.network_hash();
    let ckpt_dir = out.map(|o| o.join("checkpoints"));
    if let Some(d) = &ckpt_dir {
        create_dir(d)?;
    }
    let outage_db = cfg.protocol.outage_threshold.db;
    let mut rolling_se = Rolling::new(cfg.output.rolling_window);
    let mut rolling_ot = Rolling::new(cfg.output.rolling_window);
    let mut rows = Vec::with_capacity(cfg.iterations as usize);
    let mut checkpoints = Vec::new();
    if let Some(dir) = &ckpt_dir {
        let path = dir.join(format!("iter_{:08}.bin", 0));
        save_checkpoint(&path, trainer.online(), &hash)?;
        checkpoints.push(path);
    }
    for _ in 0..cfg.iterations {
        if switch_at == Some(trainer.iteration()) {
            let clock = task.env().clock();
            task.env_mut()
                .jammers_mut()
                .schedule_mut()
                .set_switch(Some(clock));
            rolling_se.clear();
            rolling_ot.clear();
        }
        let d = trainer.train_step(&mut task)?;
        let f = &d.info;
        let se = f.effective_se();
        let ot = f.outage_fraction(outage_db);
        let row = TrainingRow {
            iteration: d.iteration,
            action: d.action + 1,
            epsilon: d.epsilon,
            explored: d.explored,
            reward: d.reward,
            effective_se: se,
            outage_fraction: ot,
            loss: d.loss,
            rho_estimation: f.rho_estimation,
            rho_data: f.rho_data,
            rolling_se: rolling_se.push(se),
            rolling_outage: rolling_ot.push(ot),
        };
        progress(&row);
        rows.push(row);
        if let Some(dir) = &ckpt_dir {
            if cfg.output.checkpoint_every > 0 && d.iteration % cfg.output.checkpoint_every == 0 {
                let path = dir.join(format!("iter_{:08}.bin", d.iteration));
                save_checkpoint(&path, trainer.online(), &hash)?;
                checkpoints.push(path);
            }
        }
    }
    if let Some(o) = out {
        save_checkpoint(&o.join("agent.bin"), trainer.online(), &hash)?;
    }
    Ok(TrainingRun {
        rows,
        network: trainer.online().clone(),
        checkpoints,
    })
}

/// First index from which every value stays within `tol` (relative) of the
/// final value.
pub fn convergence_iteration(values: &[f64], tol: f64) -> Option<usize> {
    let last = *values.last()?;
    let band = tol * last.abs();
    let mut first = values.len() - 1;
    for i in (0..values.len()).rev() {
        if (values[i] - last).abs() > band {
            break;
        }
        first = i;
    }
    Some(first)
}

pub struct SwitchReport {
    pub run: TrainingRun,
    pub switch_iteration: u64,
    /// Iterations until the rolling effective SE settles before the switch.
    pub initial_convergence: Option<usize>,
    /// Iterations after the switch until it settles again.
    pub reconvergence: Option<usize>,
}

pub const CONVERGENCE_TOLERANCE: f64 = 0.05;

/// Trains through a reversal of the correlation schedule.
pub fn run_switch(
    cfg: &Config,
    out: Option<&Path>,
    progress: impl FnMut(&TrainingRow),
) -> Result<SwitchReport> {
    let s = cfg.switch.at_iteration;
    if s == 0 || s >= cfg.iterations {
        return Err(Error::config(
            "switch.at_iteration",
            "must fall strictly inside the training run",
        ));
    }
    let run = train(cfg, out, Some(s), progress)?;
    let rolling: Vec<f64> = run.rows.iter().map(|r| r.rolling_se).collect();
    let (before, after) = rolling.split_at(s as usize);
    Ok(SwitchReport {
        initial_convergence: convergence_iteration(before, CONVERGENCE_TOLERANCE),
        reconvergence: convergence_iteration(after, CONVERGENCE_TOLERANCE),
        switch_iteration: s,
        run,
    })
}

/// Evaluates every configured policy at every jamming power. Points run in
/// parallel; the result order follows the configuration.
pub fn run_sweep(cfg: &Config) -> Result<Vec<Summary>> {
    let powers: Vec<Power> = cfg.sweep.jamming_powers.clone();
    let per_power: Vec<Result<Vec<Summary>>> = powers
        .par_iter()
        .map(|p| {
            let mut point = cfg.clone();
            point.jamming.power = *p;
            let network = if cfg.sweep.policies.contains(&PolicySpec::Learned) {
                Some(train(&point, None, None, |_| {})?.network)
            } else {
                None
            };
            cfg.sweep
                .policies
                .iter()
                .map(|&spec| Ok(evaluate(&point, spec, network.as_ref())?.summary))
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_power {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LinkReport {
    pub bs_pathloss_db: f64,
    pub jammer_pathloss_db: f64,
    pub noise_var: f64,
    pub bounds: SpectralBounds,
}

/// Closed-form spectral-efficiency bounds for the configured link.
pub fn link_bounds(cfg: &Config) -> Result<LinkReport> {
    let bs = cfg.bs_pathloss_db()?;
    let jam = cfg.jammer_pathloss_db()?;
    let nj = cfg.jamming.jammers;
    let budget = LinkBudget {
        p_t: cfg.system.transmit_power.watts,
        noise_var: cfg.noise_var(),
        eta: 10f64.powf(bs / 10.0),
        jammer_vars: vec![cfg.jamming.power.watts; nj],
        jammer_etas: vec![10f64.powf(jam / 10.0); nj],
        n_rx: cfg.system.rx_antennas,
        n_streams: cfg.system.streams,
    };
    Ok(LinkReport {
        bs_pathloss_db: bs,
        jammer_pathloss_db: jam,
        noise_var: budget.noise_var,
        bounds: spectral_bounds(&budget)?,
    })
}
