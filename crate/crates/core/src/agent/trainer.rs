use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{argmax, NetworkShape, QNetwork};
use super::{History, Task};
use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Frames of (observation, action) history fed to the LSTM.
    pub history: usize,
    /// LSTM cells; `None` ties it to `history`.
    pub cells: Option<usize>,
    pub projection: usize,
    pub value_hidden: usize,
    pub advantage_hidden: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    pub minibatch: usize,
    pub replay_capacity: usize,
    /// Iterations between target-network synchronisations.
    pub target_sync: u64,
    pub gamma: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            history: 6,
            cells: None,
            projection: 128,
            value_hidden: 16,
            advantage_hidden: 16,
            learning_rate: 0.01,
            grad_clip: 1.0,
            minibatch: 32,
            replay_capacity: 10_000,
            target_sync: 1000,
            gamma: 0.9,
            epsilon_decay: 0.99,
            epsilon_min: 0.1,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("agent.{m}"), "out of range"));
        if self.history == 0 {
            return bad("history");
        }
        if self.cells == Some(0) {
            return bad("cells");
        }
        if self.projection == 0 || self.value_hidden == 0 || self.advantage_hidden == 0 {
            return bad("projection");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip");
        }
        if self.minibatch == 0 || self.replay_capacity < self.minibatch {
            return bad("minibatch");
        }
        if self.target_sync == 0 {
            return bad("target_sync");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon_min");
        }
        Ok(())
    }

    pub fn shape(&self, feature_len: usize, n_actions: usize) -> NetworkShape {
        NetworkShape {
            inputs: feature_len + 1,
            cells: self.cells.unwrap_or(self.history),
            seq_len: self.history,
            projection: self.projection,
            value_hidden: self.value_hidden,
            advantage_hidden: self.advantage_hidden,
            actions: n_actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics<I> {
    /// Iterations completed, including this one.
    pub iteration: u64,
    pub action: usize,
    pub reward: f64,
    /// Exploration rate used for this step.
    pub epsilon: f64,
    pub explored: bool,
    /// Mean squared TD error of the minibatch, once learning has started.
    pub loss: Option<f64>,
    pub info: I,
}

/// Online/target network pair with FIFO replay and epsilon-greedy
/// exploration decayed once per iteration.
pub struct Trainer {
    config: AgentConfig,
    online: QNetwork,
    target: QNetwork,
    replay: VecDeque<Transition>,
    history: History,
    rng: Rng,
    epsilon: f64,
    iteration: u64,
}

impl Trainer {
    pub fn new(
        config: AgentConfig,
        feature_len: usize,
        n_actions: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if n_actions == 0 {
            return Err(Error::Input("the task has no actions".into()));
        }
        let shape = config.shape(feature_len, n_actions);
        let mut rng = Rng::new(seed);
        let online = QNetwork::new(shape, &mut rng);
        Ok(Trainer {
            target: online.clone(),
            online,
            replay: VecDeque::with_capacity(config.replay_capacity),
            history: History::new(config.history, feature_len),
            rng,
            epsilon: 1.0,
            iteration: 0,
            config,
        })
    }

    pub fn for_task<T: Task>(config: AgentConfig, task: &T, seed: u64) -> Result<Self> {
        Self::new(config, task.feature_len(), task.n_actions(), seed)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    /// One interaction with the task followed by one minibatch update.
    pub fn train_step<T: Task>(&mut self, task: &mut T) -> Result<StepDiagnostics<T::Info>> {
        let state = self.history.flatten();
        let epsilon = self.epsilon;
        let explored = self.rng.uniform() < epsilon;
        let action = if explored {
            self.rng.index(self.online.shape().actions)
        } else {
            self.online.greedy(&state)
        };
        let step = task.step(action)?;
        if !step.reward.is_finite() || step.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.history.push(&step.features, task.action_code(action));
        self.remember(Transition {
            state,
            action,
            reward: step.reward,
            next_state: self.history.flatten(),
        });
        let loss = if self.replay.len() >= self.config.minibatch {
            Some(self.learn()?)
        } else {
            None
        };

        self.iteration += 1;
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
        if self.iteration.is_multiple_of(self.config.target_sync) {
            self.target = self.online.clone();
        }
        Ok(StepDiagnostics {
            iteration: self.iteration,
            action,
            reward: step.reward,
            epsilon,
            explored,
            loss,
            info: step.info,
        })
    }

    fn remember(&mut self, t: Transition) {
        if self.replay.len() == self.config.replay_capacity {
            self.replay.pop_front();
        }
        self.replay.push_back(t);
    }

    fn learn(&mut self) -> Result<f64> {
        let b = self.config.minibatch;
        let d = self.online.shape().state_len();
        let picks = rand::seq::index::sample(self.rng.inner(), self.replay.len(), b);
        let mut states = Array2::zeros((b, d));
        let mut next = Array2::zeros((b, d));
        for (row, i) in picks.iter().enumerate() {
            let t = &self.replay[i];
            states
                .row_mut(row)
                .assign(&ndarray::ArrayView1::from(&t.state[..]));
            next.row_mut(row)
                .assign(&ndarray::ArrayView1::from(&t.next_state[..]));
        }
        let q_next = self.target.forward(next.view());
        let (q, cache) = self.online.forward_cached(states.view());
        let mut dq = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (row, i) in picks.iter().enumerate() {
            let t = &self.replay[i];
            let qn = q_next.row(row).to_vec();
            let best = qn[argmax(&qn)];
            let y = t.reward + self.config.gamma * best;
            let td = q[[row, t.action]] - y;
            loss += td * td;
            dq[[row, t.action]] = td / b as f64;
        }
        let mut grads = self.online.backward(&cache, &dq);
        let norm = grads.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm > self.config.grad_clip {
            grads.scale(self.config.grad_clip / norm);
        }
        self.online.params.axpy(-self.config.learning_rate, &grads);
        Ok(loss / b as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::TaskStep;

    /// Reward 1 for repeating the previous action, else 0.
    struct Echo {
        last: usize,
    }

    impl Task for Echo {
        type Info = ();

        fn n_actions(&self) -> usize {
            2
        }

        fn feature_len(&self) -> usize {
            1
        }

        fn action_code(&self, action: usize) -> f64 {
            (action + 1) as f64 / 2.0
        }

        fn step(&mut self, action: usize) -> Result<TaskStep<()>> {
            let reward = if action == self.last { 1.0 } else { 0.0 };
            self.last = action;
            Ok(TaskStep {
                features: vec![0.0],
                reward,
                info: (),
            })
        }
    }

    fn small() -> AgentConfig {
        AgentConfig {
            history: 2,
            projection: 8,
            value_hidden: 4,
            advantage_hidden: 4,
            minibatch: 4,
            replay_capacity: 16,
            target_sync: 10,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn epsilon_follows_geometric_decay_with_floor() {
        let mut task = Echo { last: 0 };
        let mut tr = Trainer::for_task(small(), &task, 1).unwrap();
        let mut eps = Vec::new();
        for _ in 0..300 {
            eps.push(tr.train_step(&mut task).unwrap().epsilon);
        }
        assert_eq!(eps[0], 1.0);
        assert!((eps[10] - 0.99f64.powi(10)).abs() < 1e-12);
        assert_eq!(eps[299], 0.1);
    }

    #[test]
    fn replay_is_bounded_fifo() {
        let mut task = Echo { last: 0 };
        let mut tr = Trainer::for_task(small(), &task, 2).unwrap();
        for _ in 0..40 {
            tr.train_step(&mut task).unwrap();
        }
        assert_eq!(tr.replay_len(), 16);
    }

    #[test]
    fn target_network_syncs_on_schedule() {
        let mut task = Echo { last: 0 };
        let mut tr = Trainer::for_task(small(), &task, 3).unwrap();
        for _ in 0..9 {
            tr.train_step(&mut task).unwrap();
        }
        assert_ne!(tr.online(), tr.target());
        tr.train_step(&mut task).unwrap();
        assert_eq!(tr.online(), tr.target());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut task = Echo { last: 0 };
            let mut tr = Trainer::for_task(small(), &task, 4).unwrap();
            for _ in 0..50 {
                tr.train_step(&mut task).unwrap();
            }
            tr.online().params.to_flat()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = AgentConfig {
            gamma: 1.5,
            ..AgentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
