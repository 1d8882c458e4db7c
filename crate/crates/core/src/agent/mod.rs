//! LSTM dueling deep Q-learning.

mod checkpoint;
mod network;
mod trainer;

use std::collections::VecDeque;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use network::{Gradients, NetworkShape, Params, QNetwork};
pub use trainer::{AgentConfig, StepDiagnostics, Trainer, Transition};

use crate::Result;

/// A continuing decision problem the agent can act in.
pub trait Task {
    type Info;

    fn n_actions(&self) -> usize;

    /// Length of the observation features returned by [`Task::step`].
    fn feature_len(&self) -> usize;

    /// Scalar encoding of an action when it is fed back as an input.
    fn action_code(&self, action: usize) -> f64;

    fn step(&mut self, action: usize) -> Result<TaskStep<Self::Info>>;
}

#[derive(Debug, Clone)]
pub struct TaskStep<I> {
    pub features: Vec<f64>,
    pub reward: f64,
    pub info: I,
}

/// Sliding window of the last `H` (observation, action) pairs, flattened
/// oldest first and zero-filled until `H` frames have elapsed.
#[derive(Debug, Clone)]
pub struct History {
    len: usize,
    step_len: usize,
    entries: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new(len: usize, feature_len: usize) -> Self {
        History {
            len,
            step_len: feature_len + 1,
            entries: VecDeque::with_capacity(len),
        }
    }

    /// `action_code` is the one-based action number over the action count,
    /// leaving 0 for "no action yet".
    pub fn push(&mut self, features: &[f64], action_code: f64) {
        debug_assert_eq!(features.len() + 1, self.step_len);
        if self.entries.len() == self.len {
            self.entries.pop_front();
        }
        let mut e = features.to_vec();
        e.push(action_code);
        self.entries.push_back(e);
    }

    pub fn step_len(&self) -> usize {
        self.step_len
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.len - self.entries.len()) * self.step_len];
        for e in &self.entries {
            out.extend_from_slice(e);
        }
        out
    }
}
