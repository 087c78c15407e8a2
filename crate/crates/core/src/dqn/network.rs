//! Dense feed-forward Q-network in plain f64: forward evaluation,
//! temporal-difference targets, and one-step stochastic gradient descent on
//! the mean squared TD error. The gradient flows only through the
//! selected-action outputs. No autodiff: backpropagation is written out and
//! verified against central finite differences in the tests.

use crate::dqn::replay::Transition;
use crate::error::CoreError;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Per-layer nonlinearity. Hidden layers use `Relu`, the output head is
/// `Linear`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Subgradient at the kink: relu'(0) = 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One dense layer: `out = act(W·in + b)`, weights row-major `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub layers: Vec<Layer>,
}

impl NetworkWeights {
    /// Builds a ReLU multilayer perceptron with a linear head, weights drawn
    /// uniformly in ±1/√fan_in.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let activation = if i + 2 == dims.len() {
                Activation::Linear
            } else {
                Activation::Relu
            };
            layers.push(Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights: (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
                bias: vec![0.0; fan_out],
                activation,
            });
        }
        NetworkWeights { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Checks the dimension chain and entry finiteness.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.layers.is_empty() {
            return Err(CoreError::Dimension("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(CoreError::Dimension(format!(
                    "layer {i} storage does not match declared {}×{}",
                    l.out_dim, l.in_dim
                )));
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(CoreError::Dimension(format!(
                    "layer {i} input width {} does not chain from previous output {}",
                    l.in_dim,
                    self.layers[i - 1].out_dim
                )));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(CoreError::Divergence(format!(
                    "layer {i} contains non-finite weights"
                )));
            }
        }
        Ok(())
    }
}

/// Evaluates the Q-vector for one state.
pub fn forward(w: &NetworkWeights, state: &[f64]) -> Result<Vec<f64>, CoreError> {
    if state.len() != w.input_dim() {
        return Err(CoreError::Dimension(format!(
            "state has {} entries, network expects {}",
            state.len(),
            w.input_dim()
        )));
    }
    let mut cur = state.to_vec();
    let mut next = Vec::new();
    for l in &w.layers {
        next.clear();
        next.reserve(l.out_dim);
        for o in 0..l.out_dim {
            let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
            let z: f64 = row.iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>() + l.bias[o];
            next.push(l.activation.apply(z));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Evaluates a batch of states; row i equals `forward(w, states[i])`.
pub fn forward_batch(w: &NetworkWeights, states: &[&[f64]]) -> Result<Vec<Vec<f64>>, CoreError> {
    states.iter().map(|s| forward(w, s)).collect()
}

/// Standard Q-learning targets: `y = r + γ·max_a' Q(s', a'; target)`, or
/// `y = r` for terminal transitions. The max runs over all actions; the
/// selection-time feasibility mask is not part of the stored transition.
pub fn td_targets(
    batch: &[&Transition],
    target_w: &NetworkWeights,
    gamma: f64,
) -> Result<Vec<f64>, CoreError> {
    if batch.is_empty() {
        return Err(CoreError::Domain("empty training batch".into()));
    }
    let mut out = Vec::with_capacity(batch.len());
    for t in batch {
        if t.terminal {
            out.push(t.reward);
        } else {
            let q = forward(target_w, &t.next_state)?;
            let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.push(t.reward + gamma * best);
        }
    }
    Ok(out)
}

/// Scratch space reused across gradient steps.
struct BackpropScratch {
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
    /// Post-activations per layer, index 0 = input.
    activations: Vec<Vec<f64>>,
    /// Accumulated gradients, same shapes as the layers.
    grad_w: Vec<Vec<f64>>,
    grad_b: Vec<Vec<f64>>,
}

impl BackpropScratch {
    fn new(w: &NetworkWeights) -> Self {
        BackpropScratch {
            zs: w.layers.iter().map(|l| vec![0.0; l.out_dim]).collect(),
            activations: std::iter::once(vec![0.0; w.input_dim()])
                .chain(w.layers.iter().map(|l| vec![0.0; l.out_dim]))
                .collect(),
            grad_w: w.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            grad_b: w.layers.iter().map(|l| vec![0.0; l.out_dim]).collect(),
        }
    }
}

/// One stochastic-gradient step on the mean squared TD error
/// `(1/B)·Σ (Q(s, a) − y)²`, differentiating only through the Q-value of
/// each transition's selected action. Mutates `w` and returns the loss
/// evaluated before the step.
pub fn train_step_in_place(
    w: &mut NetworkWeights,
    batch: &[&Transition],
    targets: &[f64],
    alpha: f64,
) -> Result<f64, CoreError> {
    if batch.len() != targets.len() {
        return Err(CoreError::Dimension(format!(
            "{} transitions vs {} targets",
            batch.len(),
            targets.len()
        )));
    }
    if batch.is_empty() {
        return Err(CoreError::Domain("empty training batch".into()));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut scratch = BackpropScratch::new(w);
    let mut loss = 0.0;

    for (t, &y) in batch.iter().zip(targets) {
        if t.state.len() != w.input_dim() {
            return Err(CoreError::Dimension(format!(
                "state has {} entries, network expects {}",
                t.state.len(),
                w.input_dim()
            )));
        }
        if t.action >= w.output_dim() {
            return Err(CoreError::Dimension(format!(
                "action {} outside the {}-way output head",
                t.action,
                w.output_dim()
            )));
        }
        // Forward pass, recording pre- and post-activations.
        scratch.activations[0].copy_from_slice(&t.state);
        for (li, l) in w.layers.iter().enumerate() {
            for o in 0..l.out_dim {
                let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                let z: f64 = row
                    .iter()
                    .zip(&scratch.activations[li])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + l.bias[o];
                scratch.zs[li][o] = z;
                scratch.activations[li + 1][o] = l.activation.apply(z);
            }
        }
        let q_sel = scratch.activations[w.layers.len()][t.action];
        let err = q_sel - y;
        loss += err * err * inv_b;

        // Backward pass. The output delta is zero except at the selected
        // action, so the last-layer sweep touches a single row.
        let mut delta = vec![0.0; w.output_dim()];
        delta[t.action] = 2.0 * err * inv_b
            * w.layers.last().unwrap().activation.derivative(
                scratch.zs[w.layers.len() - 1][t.action],
            );
        for li in (0..w.layers.len()).rev() {
            let l = &w.layers[li];
            let input = &scratch.activations[li];
            for o in 0..l.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                scratch.grad_b[li][o] += d;
                let grow = &mut scratch.grad_w[li][o * l.in_dim..(o + 1) * l.in_dim];
                for (g, a) in grow.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if li > 0 {
                let mut prev = vec![0.0; l.in_dim];
                for o in 0..l.out_dim {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &l.weights[o * l.in_dim..(o + 1) * l.in_dim];
                    for (p, wv) in prev.iter_mut().zip(row) {
                        *p += d * wv;
                    }
                }
                for (p, &z) in prev.iter_mut().zip(&scratch.zs[li - 1]) {
                    *p *= w.layers[li - 1].activation.derivative(z);
                }
                delta = prev;
            }
        }
    }

    if !loss.is_finite() {
        return Err(CoreError::Divergence(format!("non-finite loss {loss}")));
    }
    for (li, l) in w.layers.iter_mut().enumerate() {
        for (wv, g) in l.weights.iter_mut().zip(&scratch.grad_w[li]) {
            *wv -= alpha * g;
        }
        for (bv, g) in l.bias.iter_mut().zip(&scratch.grad_b[li]) {
            *bv -= alpha * g;
        }
    }
    Ok(loss)
}

/// Functional wrapper around [`train_step_in_place`]: returns the updated
/// weights and the pre-step loss.
pub fn train_step(
    w: &NetworkWeights,
    batch: &[&Transition],
    targets: &[f64],
    alpha: f64,
) -> Result<(NetworkWeights, f64), CoreError> {
    let mut next = w.clone();
    let loss = train_step_in_place(&mut next, batch, targets, alpha)?;
    Ok((next, loss))
}

/// Deep copy of the online weights for use as the frozen target network.
pub fn sync_target(online: &NetworkWeights) -> NetworkWeights {
    online.clone()
}
