//! Learner composition: one agent owns an online network, a frozen target
//! copy, a replay memory, and a private RNG used for exploration and
//! minibatch sampling.

use crate::dqn::network::{
    forward, sync_target, td_targets, train_step_in_place, NetworkWeights,
};
use crate::dqn::replay::{ReplayMemory, Transition};
use crate::dqn::select_action;
use crate::error::CoreError;
use rand_chacha::ChaCha12Rng;

/// Hyperparameters for one agent class.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the episode budget over which ε decays linearly from
    /// start to end; afterwards it stays at `epsilon_end`.
    pub epsilon_decay_frac: f64,
    pub batch_size: usize,
    /// Online→target copy period, in training steps.
    pub target_sync_period: u64,
    pub memory_capacity: usize,
    /// Hidden layer widths; the output head is always linear.
    pub hidden_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            discount: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_frac: 0.6,
            batch_size: 128,
            target_sync_period: 200,
            memory_capacity: 20_000,
            hidden_layers: vec![64, 64],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, section: &str) -> Result<(), CoreError> {
        let field = |name: &str| format!("{section}.{name}");
        if !(self.learning_rate > 0.0) {
            return Err(CoreError::invalid_config(&field("learning_rate"), "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(CoreError::invalid_config(&field("discount"), "must be in [0, 1)"));
        }
        for (eps, name) in [
            (self.epsilon_start, "epsilon_start"),
            (self.epsilon_end, "epsilon_end"),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(CoreError::invalid_config(&field(name), "must be in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_frac) {
            return Err(CoreError::invalid_config(
                &field("epsilon_decay_frac"),
                "must be in [0, 1]",
            ));
        }
        if self.batch_size == 0 || self.batch_size > self.memory_capacity {
            return Err(CoreError::invalid_config(
                &field("batch_size"),
                "must be ≥ 1 and ≤ memory_capacity",
            ));
        }
        if self.target_sync_period == 0 {
            return Err(CoreError::invalid_config(
                &field("target_sync_period"),
                "must be ≥ 1",
            ));
        }
        if self.hidden_layers.iter().any(|&h| h == 0) {
            return Err(CoreError::invalid_config(
                &field("hidden_layers"),
                "layer widths must be ≥ 1",
            ));
        }
        Ok(())
    }

    /// Exploration rate for a given episode: linear from `epsilon_start` to
    /// `epsilon_end` over the first `epsilon_decay_frac` of the budget.
    pub fn epsilon_at(&self, episode: u32, total_episodes: u32) -> f64 {
        let horizon = (total_episodes as f64 * self.epsilon_decay_frac).ceil();
        if horizon < 1.0 || episode as f64 >= horizon {
            return self.epsilon_end;
        }
        let frac = episode as f64 / horizon;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// One deep Q-learner.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: NetworkWeights,
    pub target: NetworkWeights,
    pub memory: ReplayMemory,
    pub cfg: TrainConfig,
    rng: ChaCha12Rng,
    train_steps: u64,
}

impl DqnAgent {
    /// Fresh agent; `init_rng` seeds the weights, `agent_rng` drives
    /// exploration and minibatch sampling.
    pub fn new(
        input_dim: usize,
        action_count: usize,
        cfg: TrainConfig,
        init_rng: &mut ChaCha12Rng,
        agent_rng: ChaCha12Rng,
    ) -> Self {
        let online = NetworkWeights::init(input_dim, &cfg.hidden_layers, action_count, init_rng);
        let target = sync_target(&online);
        let memory = ReplayMemory::new(cfg.memory_capacity);
        DqnAgent {
            online,
            target,
            memory,
            cfg,
            rng: agent_rng,
            train_steps: 0,
        }
    }

    /// Rebuilds an agent around checkpointed weights.
    pub fn from_weights(
        online: NetworkWeights,
        target: NetworkWeights,
        cfg: TrainConfig,
        agent_rng: ChaCha12Rng,
    ) -> Self {
        let memory = ReplayMemory::new(cfg.memory_capacity);
        DqnAgent {
            online,
            target,
            memory,
            cfg,
            rng: agent_rng,
            train_steps: 0,
        }
    }

    pub fn action_count(&self) -> usize {
        self.online.output_dim()
    }

    /// ε-greedy action under the feasibility mask.
    pub fn act(&mut self, state: &[f64], mask: &[bool], epsilon: f64) -> Result<usize, CoreError> {
        let q = forward(&self.online, state)?;
        select_action(&q, epsilon, mask, &mut self.rng)
    }

    /// Greedy action; consumes no randomness.
    pub fn act_greedy(&self, state: &[f64], mask: &[bool]) -> Result<usize, CoreError> {
        let q = forward(&self.online, state)?;
        let mut dummy = self.rng.clone();
        select_action(&q, 0.0, mask, &mut dummy)
    }

    pub fn observe(&mut self, t: Transition) {
        self.memory.push(t);
    }

    /// One learning step when enough experience is buffered: sample a
    /// minibatch, build TD targets from the target network, descend, and
    /// periodically re-sync the target copy. Returns the pre-step loss, or
    /// `None` when the buffer is still shorter than a batch.
    pub fn learn(&mut self) -> Result<Option<f64>, CoreError> {
        if self.memory.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.memory.sample(self.cfg.batch_size, &mut self.rng);
        let targets = td_targets(&batch, &self.target, self.cfg.discount)?;
        let loss = train_step_in_place(&mut self.online, &batch, &targets, self.cfg.learning_rate)?;
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync_period == 0 {
            self.target = sync_target(&self.online);
        }
        Ok(Some(loss))
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }
}
