//! Minimal deep Q-network stack: dense value networks, replay memory,
//! ε-greedy selection under feasibility masks, temporal-difference targets,
//! and plain stochastic-gradient updates.
//!
//! The update rule is deliberately unadorned gradient descent: no adaptive
//! optimizer, no double/dueling variants. Anything fancier would slot into
//! [`network::train_step_in_place`]'s final apply loop.

pub mod agent;
pub mod network;
pub mod replay;

pub use agent::{DqnAgent, TrainConfig};
pub use network::{
    forward, forward_batch, sync_target, td_targets, train_step, train_step_in_place, Activation,
    Layer, NetworkWeights,
};
pub use replay::{ReplayMemory, Transition};

use crate::error::CoreError;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// ε-greedy selection over masked Q-values.
///
/// With probability ε the action is uniform over the unmasked set; otherwise
/// it is the unmasked argmax, ties resolved toward the lowest index. When
/// ε = 0 no randomness is consumed, making the greedy policy a pure function
/// of the Q-vector.
pub fn select_action(
    q: &[f64],
    epsilon: f64,
    mask: &[bool],
    rng: &mut ChaCha12Rng,
) -> Result<usize, CoreError> {
    if q.len() != mask.len() {
        return Err(CoreError::Dimension(format!(
            "{} Q-values vs {} mask entries",
            q.len(),
            mask.len()
        )));
    }
    let unmasked = mask.iter().filter(|&&b| b).count();
    if unmasked == 0 {
        return Err(CoreError::Domain("all actions masked".into()));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let pick = rng.gen_range(0..unmasked);
        return Ok(mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .nth(pick)
            .expect("pick < unmasked count")
            .0);
    }
    let mut best = None;
    for (i, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if !ok {
            continue;
        }
        match best {
            None => best = Some((i, v)),
            Some((_, bv)) if v > bv => best = Some((i, v)),
            _ => {}
        }
    }
    Ok(best.expect("at least one unmasked action").0)
}
