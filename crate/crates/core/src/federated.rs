//! Periodic federated averaging of the robot Q-networks: every `sync_period`
//! training steps, all robots upload their online and target weights, the
//! access point element-wise averages each set, and the means are pushed
//! back before the next action selection. Only weights cross the robot/AP
//! boundary; replay memories stay private to each robot. The surface
//! agent trains centrally and never participates.

use crate::dqn::NetworkWeights;
use crate::error::CoreError;

/// Aggregation cadence and expected participation.
#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    /// Steps between aggregation rounds.
    pub sync_period: u64,
    /// Participant count; every round is fully synchronous.
    pub participants: usize,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.sync_period == 0 {
            return Err(CoreError::invalid_config("federation.sync_period", "must be ≥ 1"));
        }
        if self.participants == 0 {
            return Err(CoreError::invalid_config(
                "federation.participants",
                "must be ≥ 1",
            ));
        }
        Ok(())
    }
}

/// True on the steps where a round runs.
pub fn should_sync(step: u64, cfg: &FederationConfig) -> bool {
    step % cfg.sync_period == 0
}

/// Element-wise arithmetic mean of the participants' weights. Online and
/// target sets are averaged by separate calls.
pub fn aggregate(weight_sets: &[&NetworkWeights]) -> Result<NetworkWeights, CoreError> {
    let first = weight_sets
        .first()
        .ok_or_else(|| CoreError::Domain("aggregation round with no participants".into()))?;
    for (i, w) in weight_sets.iter().enumerate().skip(1) {
        if w.layers.len() != first.layers.len() {
            return Err(CoreError::Dimension(format!(
                "participant {i} has {} layers, expected {}",
                w.layers.len(),
                first.layers.len()
            )));
        }
        for (li, (a, b)) in first.layers.iter().zip(&w.layers).enumerate() {
            if a.in_dim != b.in_dim || a.out_dim != b.out_dim || a.activation != b.activation {
                return Err(CoreError::Dimension(format!(
                    "participant {i} layer {li} shape differs"
                )));
            }
        }
    }
    let inv_k = 1.0 / weight_sets.len() as f64;
    let mut mean = (*first).clone();
    for (li, ml) in mean.layers.iter_mut().enumerate() {
        let n_weights = ml.weights.len();
        for (ei, m) in ml.weights.iter_mut().chain(ml.bias.iter_mut()).enumerate() {
            let pick = |w: &NetworkWeights| {
                let l = &w.layers[li];
                if ei < n_weights { l.weights[ei] } else { l.bias[ei - n_weights] }
            };
            // The mean of identical values is that value; computing it
            // arithmetically would round, and aggregating a freshly
            // broadcast model must be an exact fixed point.
            if weight_sets[1..].iter().all(|w| pick(w).to_bits() == m.to_bits()) {
                continue;
            }
            *m *= inv_k;
            for w in &weight_sets[1..] {
                *m += pick(w) * inv_k;
            }
        }
    }
    Ok(mean)
}

/// One robot's uploadable weight pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    pub online: NetworkWeights,
    pub target: NetworkWeights,
}

/// Replaces every robot's weight pair with deep copies of the global pair.
pub fn broadcast(global: &WeightPair, robots: &mut [WeightPair]) -> Result<(), CoreError> {
    for (k, r) in robots.iter().enumerate() {
        if r.online.layers.len() != global.online.layers.len() {
            return Err(CoreError::Dimension(format!(
                "robot {k} network shape differs from the global model"
            )));
        }
        for (li, (a, b)) in global.online.layers.iter().zip(&r.online.layers).enumerate() {
            if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
                return Err(CoreError::Dimension(format!(
                    "robot {k} layer {li} shape differs from the global model"
                )));
            }
        }
    }
    for r in robots.iter_mut() {
        r.online = global.online.clone();
        r.target = global.target.clone();
    }
    Ok(())
}

/// Transport boundary for one aggregation round. The default in-process
/// implementation is deterministic; a wire protocol would implement the same
/// exchange against real uplinks.
pub trait FederationTransport {
    /// Collects all robots' pairs, returns the averaged global pair.
    fn exchange(&mut self, uploads: &[WeightPair]) -> Result<WeightPair, CoreError>;
}

/// In-memory transport: averages uploads in robot-id order.
#[derive(Debug, Default)]
pub struct InMemoryTransport {
    rounds_completed: u64,
}

impl InMemoryTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rounds_completed(&self) -> u64 {
        self.rounds_completed
    }
}

impl FederationTransport for InMemoryTransport {
    fn exchange(&mut self, uploads: &[WeightPair]) -> Result<WeightPair, CoreError> {
        let online: Vec<&NetworkWeights> = uploads.iter().map(|p| &p.online).collect();
        let target: Vec<&NetworkWeights> = uploads.iter().map(|p| &p.target).collect();
        let pair = WeightPair {
            online: aggregate(&online)?,
            target: aggregate(&target)?,
        };
        self.rounds_completed += 1;
        Ok(pair)
    }
}
