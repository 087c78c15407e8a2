//! State encoders, action codecs, feasibility masks, and reward functions
//! for the two decision processes: the surface controller (global agent)
//! observes the whole fleet and picks a phase tuple; each robot (local
//! agent) observes itself and picks a move direction plus a transmit power
//! level.

use crate::channel::{quantized_phase_set, RisConfig};
use crate::env::{GridMap, Orientation, RobotState};
use crate::error::CoreError;
use crate::noma::PowerConfig;
use num_complex::Complex64;

/// Direct-link feature normalization: |h̄| in dB is clamped to
/// [floor_db, ceil_db] and min-max scaled to [0, 1]. Bounded inputs keep
/// Q-network training stable across channel scales.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub feature_floor_db: f64,
    pub feature_ceil_db: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            feature_floor_db: -120.0,
            feature_ceil_db: -40.0,
        }
    }
}

impl ObservationConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.feature_floor_db < self.feature_ceil_db) {
            return Err(CoreError::invalid_config(
                "observation.feature_floor_db",
                "must be below feature_ceil_db",
            ));
        }
        Ok(())
    }

    /// Normalized direct-link feature for one coefficient.
    pub fn feature(&self, direct: Complex64) -> f64 {
        let mag = direct.norm();
        let db = if mag > 0.0 {
            20.0 * mag.log10()
        } else {
            self.feature_floor_db
        };
        let clamped = db.clamp(self.feature_floor_db, self.feature_ceil_db);
        (clamped - self.feature_floor_db) / (self.feature_ceil_db - self.feature_floor_db)
    }
}

/// Flattened observation of the whole fleet: 3 entries per robot in robot-id
/// order: (x, y) scaled to [0, 1] by the map extent, then the direct-link
/// feature.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState(pub Vec<f64>);

/// One robot's observation: its own slice of the global state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalState(pub [f64; 3]);

impl GlobalState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl LocalState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn position_features(robot: &RobotState, map: &GridMap) -> [f64; 2] {
    [
        (robot.position[0] - map.x_min) / (map.x_max - map.x_min),
        (robot.position[1] - map.y_min) / (map.y_max - map.y_min),
    ]
}

/// Builds the global observation from the fleet and this slot's direct-link
/// coefficients (one per robot, robot-id order).
pub fn encode_global_state(
    robots: &[RobotState],
    direct: &[Complex64],
    map: &GridMap,
    obs: &ObservationConfig,
) -> GlobalState {
    let mut v = Vec::with_capacity(3 * robots.len());
    for (robot, &h) in robots.iter().zip(direct) {
        let p = position_features(robot, map);
        v.push(p[0]);
        v.push(p[1]);
        v.push(obs.feature(h));
    }
    GlobalState(v)
}

/// Builds one robot's observation; bitwise equal to its global-state slice.
pub fn encode_local_state(
    robot: &RobotState,
    direct: Complex64,
    map: &GridMap,
    obs: &ObservationConfig,
) -> LocalState {
    let p = position_features(robot, map);
    LocalState([p[0], p[1], obs.feature(direct)])
}

/// Number of phase tuples selectable by the surface agent.
pub fn global_action_count(ris: &RisConfig) -> u64 {
    (ris.num_levels() as u64).pow(ris.num_subsurfaces as u32)
}

/// Decodes a flat index into one phase per sub-surface. The index is read in
/// base N_R, least-significant digit first: sub-surface n gets digit
/// `(index / N_R^n) mod N_R`, mapped through the quantized set.
pub fn decode_global_action(index: u64, ris: &RisConfig) -> Result<Vec<f64>, CoreError> {
    let count = global_action_count(ris);
    if index >= count {
        return Err(CoreError::Domain(format!(
            "phase-tuple index {index} out of range 0..{count}"
        )));
    }
    let set = quantized_phase_set(ris.resolution_bits)?;
    let base = ris.num_levels() as u64;
    let mut rest = index;
    let mut phases = Vec::with_capacity(ris.num_subsurfaces);
    for _ in 0..ris.num_subsurfaces {
        phases.push(set[(rest % base) as usize]);
        rest /= base;
    }
    Ok(phases)
}

/// Inverse of [`decode_global_action`]; errors if any phase is not in the
/// quantized set.
pub fn encode_global_action(phases: &[f64], ris: &RisConfig) -> Result<u64, CoreError> {
    if phases.len() != ris.num_subsurfaces {
        return Err(CoreError::Dimension(format!(
            "{} phases for {} sub-surfaces",
            phases.len(),
            ris.num_subsurfaces
        )));
    }
    let set = quantized_phase_set(ris.resolution_bits)?;
    let base = ris.num_levels() as u64;
    let mut index = 0u64;
    let mut weight = 1u64;
    for &p in phases {
        let digit = set
            .iter()
            .position(|&q| (q - p).abs() < 1e-12)
            .ok_or_else(|| CoreError::Domain(format!("phase {p} not in the quantized set")))?;
        index += digit as u64 * weight;
        weight *= base;
    }
    Ok(index)
}

/// One robot's decoded action: a move direction and a transmit power level
/// (0-based index into the descending `power_level_set`, so level 0 is
/// p_max/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalAction {
    pub orientation: Orientation,
    pub power_level: usize,
}

/// Number of joint (direction, power) choices per robot.
pub fn local_action_count(cfg: &PowerConfig) -> usize {
    4 * cfg.num_levels
}

/// Decodes a flat index: direction = index mod 4 (n, s, e, w), power level =
/// index div 4.
pub fn decode_local_action(index: usize, cfg: &PowerConfig) -> Result<LocalAction, CoreError> {
    let count = local_action_count(cfg);
    if index >= count {
        return Err(CoreError::Domain(format!(
            "robot action index {index} out of range 0..{count}"
        )));
    }
    Ok(LocalAction {
        orientation: Orientation::ALL[index % 4],
        power_level: index / 4,
    })
}

/// Inverse of [`decode_local_action`].
pub fn encode_local_action(action: LocalAction, cfg: &PowerConfig) -> Result<usize, CoreError> {
    if action.power_level >= cfg.num_levels {
        return Err(CoreError::Domain(format!(
            "power level {} out of range 0..{}",
            action.power_level, cfg.num_levels
        )));
    }
    let dir = Orientation::ALL
        .iter()
        .position(|&o| o == action.orientation)
        .expect("all orientations enumerated");
    Ok(action.power_level * 4 + dir)
}

/// Selectability mask over the 4·N_P robot actions. The strongest robot
/// (rank 0) must transmit strictly below p_max/2^(K−1) so that weaker
/// signals dominate at every SIC stage; level i (0-based) carries
/// p_max/2^(i+1), so its allowed levels are i ≥ K−1. Other ranks and
/// single-robot fleets are unmasked. For N_P ≥ K the deepest level always
/// survives, so the mask can never empty the action set.
pub fn mask_power_actions(robot_rank: usize, num_robots: usize, cfg: &PowerConfig) -> Vec<bool> {
    let count = local_action_count(cfg);
    if robot_rank > 0 || num_robots <= 1 {
        return vec![true; count];
    }
    (0..count)
        .map(|idx| idx / 4 >= num_robots - 1)
        .collect()
}

/// Shaping and bonus scalars for both reward functions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Sum-rate scale of the surface agent's reward.
    pub tau1: f64,
    /// Rate share in the robot reward.
    pub phi: f64,
    /// Progress (distance-decrease) share in the robot reward.
    pub psi: f64,
    /// Per-slot time penalty (negative).
    pub r_time: f64,
    /// Arrival bonus.
    pub r_goal: f64,
    pub qoe_c1: f64,
    pub qoe_c2: f64,
    /// Substitute for the log-rate term when the rate is zero.
    pub qoe_floor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            tau1: 0.1,
            phi: 0.05,
            psi: 2.0,
            r_time: -1.0,
            r_goal: 100.0,
            qoe_c1: 10.0,
            qoe_c2: 0.0,
            qoe_floor: -10.0,
        }
    }
}

/// Rate above which the anti-wandering check is evaluated; comfortably
/// beyond any spectral efficiency reachable at the configured power budgets.
pub const TYPICAL_MAX_RATE: f64 = 20.0;

impl RewardConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.r_time < 0.0) {
            return Err(CoreError::invalid_config("reward.r_time", "must be < 0"));
        }
        if !(self.r_goal >= 0.0) {
            return Err(CoreError::invalid_config("reward.r_goal", "must be ≥ 0"));
        }
        // Keeps loitering unprofitable: rate income alone can never offset
        // the time penalty.
        if self.phi * TYPICAL_MAX_RATE + self.r_time > 0.0 {
            return Err(CoreError::invalid_config(
                "reward.phi",
                format!(
                    "phi·{TYPICAL_MAX_RATE} + r_time must be ≤ 0 so waiting never pays"
                ),
            ));
        }
        Ok(())
    }
}

/// Surface agent reward: scaled sum rate of the slot.
pub fn global_reward(rates: &[f64], cfg: &RewardConfig) -> f64 {
    cfg.tau1 * rates.iter().sum::<f64>()
}

/// Robot reward for one slot: rate share, progress toward the destination
/// (suppressed on the first slot, which has no previous distance), time
/// penalty, and the arrival bonus.
pub fn local_reward(
    rate: f64,
    d_prev: f64,
    d_now: f64,
    arrived_this_slot: bool,
    slot_index: u32,
    cfg: &RewardConfig,
) -> f64 {
    let guidance = if slot_index >= 2 {
        cfg.psi * (d_prev - d_now)
    } else {
        0.0
    };
    cfg.phi * rate
        + guidance
        + cfg.r_time
        + if arrived_this_slot { cfg.r_goal } else { 0.0 }
}

/// Log-domain experience score substituted for the raw rate in the robot
/// reward: `c1·log₁₀(rate) + c2`, with a configured floor for zero rates.
pub fn qoe_reward(rate: f64, c1: f64, c2: f64, floor: f64) -> f64 {
    if rate > 0.0 {
        c1 * rate.log10() + c2
    } else {
        floor
    }
}
