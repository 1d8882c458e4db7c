//! Frame-by-frame decision rules for the phase durations.

use crate::agent::{History, QNetwork};
use crate::env::{
    action_code, Action, Beamformer, Environment, FrameRequest, FrameResult, ObservationScaler,
    PhaseDurations,
};
use crate::numerics::db_to_linear;
use crate::{Error, Result};

pub trait Policy {
    fn name(&self) -> String;

    fn act(&mut self, env: &Environment) -> Result<FrameRequest>;

    fn observe(&mut self, _frame: &FrameResult) {}
}

/// Nulls with the true data-phase jamming covariance and always uses the
/// highest-duty-cycle action.
pub struct UpperBound {
    action: Option<Action>,
}

impl UpperBound {
    pub fn new() -> Self {
        UpperBound { action: None }
    }
}

impl Default for UpperBound {
    fn default() -> Self {
        Self::new()
    }
}

pub fn highest_duty_cycle(env: &Environment) -> Action {
    let space = env.actions();
    let d = PhaseDurations {
        estimation: *space
            .estimation_candidates()
            .iter()
            .min()
            .expect("non-empty"),
        data: space.max_data(),
    };
    space.find(d).expect("grid contains its own extremes")
}

impl Policy for UpperBound {
    fn name(&self) -> String {
        "upper-bound".into()
    }

    fn act(&mut self, env: &Environment) -> Result<FrameRequest> {
        let a = *self.action.get_or_insert_with(|| highest_duty_cycle(env));
        Ok(FrameRequest {
            beamformer: Beamformer::Oracle,
            ..FrameRequest::for_action(env.actions(), a)
        })
    }
}

pub struct Fixed {
    action: Action,
}

impl Fixed {
    pub fn new(action: Action) -> Self {
        Fixed { action }
    }
}

impl Policy for Fixed {
    fn name(&self) -> String {
        format!("fixed-{}", self.action.number())
    }

    fn act(&mut self, env: &Environment) -> Result<FrameRequest> {
        Ok(FrameRequest::for_action(env.actions(), self.action))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicConfig {
    /// Margin over the noise floor that triggers re-estimation, dB.
    pub threshold_db: f64,
    pub monitor_samples: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            threshold_db: 3.0,
            monitor_samples: 20,
        }
    }
}

/// Runs a mid-grid action and listens to the jamming after beamforming for
/// a few samples each frame. When the residual exceeds the noise floor by
/// the threshold, the next frame uses the longest estimation phase.
pub struct Heuristic {
    config: HeuristicConfig,
    boost_next: bool,
    reestimations: u64,
}

impl Heuristic {
    pub fn new(config: HeuristicConfig) -> Result<Self> {
        if config.monitor_samples == 0 || !config.threshold_db.is_finite() {
            return Err(Error::Input(
                "heuristic needs monitoring samples and a finite threshold".into(),
            ));
        }
        Ok(Heuristic {
            config,
            boost_next: false,
            reestimations: 0,
        })
    }

    /// Frames run with the boosted estimation phase so far.
    pub fn reestimations(&self) -> u64 {
        self.reestimations
    }
}

pub fn mid_action(env: &Environment) -> Action {
    let space = env.actions();
    let e = space.estimation_candidates();
    let d = space.data_candidates();
    space
        .find(PhaseDurations {
            estimation: e[e.len() / 2],
            data: d[d.len() / 2],
        })
        .expect("grid member")
}

impl Policy for Heuristic {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn act(&mut self, env: &Environment) -> Result<FrameRequest> {
        let space = env.actions();
        let mid = mid_action(env);
        let mut durations = space.decode(mid);
        if self.boost_next {
            durations.estimation = space.max_estimation();
            self.reestimations += 1;
        }
        Ok(FrameRequest {
            action: space.find(durations),
            durations,
            monitor_samples: self.config.monitor_samples,
            beamformer: Beamformer::Estimated,
        })
    }

    fn observe(&mut self, frame: &FrameResult) {
        self.boost_next = false;
        if let Some(residual) = &frame.monitor_residual {
            let limit = frame.noise_var * db_to_linear(self.config.threshold_db);
            self.boost_next = residual.iter().any(|&r| r > limit);
        }
    }
}

/// Greedy policy of a trained Q-network.
pub struct Learned {
    net: QNetwork,
    history: History,
    scaler: ObservationScaler,
    last: Option<Action>,
}

impl Learned {
    pub fn new(net: QNetwork, env: &Environment) -> Result<Self> {
        let feature_len = env.params().n_users + env.params().n_jammers();
        let shape = *net.shape();
        if shape.inputs != feature_len + 1 || shape.actions != env.actions().size() {
            return Err(Error::Checkpoint(
                "network does not match the environment dimensions".into(),
            ));
        }
        Ok(Learned {
            history: History::new(shape.seq_len, feature_len),
            net,
            scaler: ObservationScaler::default(),
            last: None,
        })
    }
}

impl Policy for Learned {
    fn name(&self) -> String {
        "learned".into()
    }

    fn act(&mut self, env: &Environment) -> Result<FrameRequest> {
        let a = env
            .actions()
            .from_index(self.net.greedy(&self.history.flatten()))?;
        self.last = Some(a);
        Ok(FrameRequest::for_action(env.actions(), a))
    }

    fn observe(&mut self, frame: &FrameResult) {
        let features = self.scaler.features(&frame.observation);
        let code = self
            .last
            .map(|a| action_code(a, self.net.shape().actions))
            .unwrap_or(0.0);
        self.history.push(&features, code);
    }
}

/// Runs `frames` frames of `policy`, handing each result to `sink`.
pub fn rollout(
    env: &mut Environment,
    policy: &mut dyn Policy,
    frames: usize,
    mut sink: impl FnMut(&FrameResult) -> Result<()>,
) -> Result<()> {
    for _ in 0..frames {
        let req = policy.act(env)?;
        let frame = env.step(&req)?;
        policy.observe(&frame);
        sink(&frame)?;
    }
    Ok(())
}
