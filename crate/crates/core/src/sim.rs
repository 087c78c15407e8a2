//! Slot-level simulation of the fleet: channel draws, surface phase
//! application, power-domain multiplexing, rewards, and robot motion. One
//! slot runs in two phases so a controller can pick the surface action
//! first and let robots act on the decoding order it induces:
//!
//! 1. [`Simulation::apply_ris_action`] sets the phase tuple, evaluates
//!    combined channels, and ranks the robots still traveling.
//! 2. [`Simulation::complete_slot`] takes the robots' actions, computes
//!    rates and rewards, moves the robots, and draws the next slot's
//!    channels.

use crate::channel::{combined_channel, sample_channels, ChannelRealization, RisConfig};
use crate::config::{Algorithm, SimConfig};
use crate::env::{
    distance_to_destination, is_terminal, step_robot, EpisodeState, GridMap, RobotState,
};
use crate::error::CoreError;
use crate::mdp::{
    decode_global_action, decode_local_action, encode_global_state, encode_local_state,
    global_reward, local_reward, mask_power_actions, qoe_reward, GlobalState, LocalState,
    ObservationConfig, RewardConfig,
};
use crate::noma::{
    decoding_order, energy_efficiency, motion_energy, noma_rates, oma_rates, power_level_set,
    sic_feasible, sic_gaps, EnergyModel, PowerConfig,
};
use rand_chacha::ChaCha12Rng;

/// Multiplexing scheme used for per-slot rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    /// Power-domain superposition with successive interference cancellation.
    Noma,
    /// Equal orthogonal shares of the band across traveling robots.
    Oma,
}

/// Quantity fed into the rewards: the raw rate or its log-experience score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    Standard,
    Qoe,
}

impl RateMode {
    pub fn for_algorithm(algo: Algorithm) -> Self {
        match algo {
            Algorithm::OmaFdrl => RateMode::Oma,
            _ => RateMode::Noma,
        }
    }
}

impl RewardKind {
    pub fn for_algorithm(algo: Algorithm) -> Self {
        match algo {
            Algorithm::QoeFdrl => RewardKind::Qoe,
            _ => RewardKind::Standard,
        }
    }
}

/// Mid-slot snapshot produced by the phase application: combined gains, the
/// decoding order over traveling robots, and per-robot action masks.
#[derive(Debug, Clone)]
pub struct SlotContext {
    pub ris_action: u64,
    /// Combined channel gain `|h_k|²` for every robot.
    pub gains: Vec<f64>,
    /// Ids of robots still traveling, ascending.
    pub active: Vec<usize>,
    /// Active robot ids sorted strongest-first.
    pub ordered_ids: Vec<usize>,
    /// Robot id → decoding rank, `None` once arrived.
    pub rank_of: Vec<Option<usize>>,
    /// Robot id → action mask, `None` once arrived.
    pub masks: Vec<Option<Vec<bool>>>,
}

/// Everything one completed slot produced, indexed by robot id where
/// per-robot. Inactive robots carry zero rates and rewards and -1 power.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    /// 1-based index of the slot just simulated.
    pub slot: u32,
    pub ris_action: u64,
    /// Budget and (under SIC) gap feasibility; infeasible slots zero all
    /// rates.
    pub feasible: bool,
    pub rates: Vec<f64>,
    /// Log-experience scores, present when the reward kind asks for them.
    pub qoe: Option<Vec<f64>>,
    pub local_rewards: Vec<f64>,
    pub global_reward: f64,
    pub power_idx: Vec<i64>,
    /// Positions after this slot's moves.
    pub positions: Vec<[f64; 2]>,
    /// Whether each robot acted this slot.
    pub active: Vec<bool>,
    pub arrived_now: Vec<bool>,
    pub blocked: Vec<bool>,
    /// Episode finished (all arrived or deadline).
    pub done: bool,
    /// Objective evaluated as if the episode ended after this slot.
    pub objective_cum: f64,
}

/// Episode-stepping state machine shared by every training variant.
pub struct Simulation {
    map: GridMap,
    starts: Vec<[f64; 2]>,
    destinations: Vec<[f64; 2]>,
    speed: f64,
    t_max: u32,
    channel_cfg: crate::channel::ChannelModelConfig,
    ris: RisConfig,
    power: PowerConfig,
    power_levels: Vec<f64>,
    reward_cfg: RewardConfig,
    observation: ObservationConfig,
    energy: EnergyModel,
    rate_mode: RateMode,
    reward_kind: RewardKind,
    sigma2: f64,
    rng: ChaCha12Rng,
    episode: EpisodeState,
    realization: ChannelRealization,
    /// Per-robot rates for every slot the robot was still traveling.
    rate_log: Vec<Vec<f64>>,
}

impl Simulation {
    /// Builds the engine and draws the first episode's opening channels from
    /// the given stream.
    pub fn new(cfg: &SimConfig, mut rng: ChaCha12Rng) -> Result<Self, CoreError> {
        let robots = Self::fresh_robots(cfg)?;
        let positions: Vec<[f64; 2]> = robots.iter().map(|r| r.position).collect();
        let realization = sample_channels(
            &cfg.channel,
            cfg.ris.elements_per_side,
            &positions,
            &cfg.map,
            &mut rng,
        );
        Ok(Simulation {
            map: cfg.map.clone(),
            starts: cfg.starts.clone(),
            destinations: cfg.destinations.clone(),
            speed: cfg.energy.speed,
            t_max: cfg.t_max,
            channel_cfg: cfg.channel.clone(),
            ris: cfg.ris.clone(),
            power: cfg.power.clone(),
            power_levels: power_level_set(&cfg.power),
            reward_cfg: cfg.reward.clone(),
            observation: cfg.observation.clone(),
            energy: cfg.energy.clone(),
            rate_mode: RateMode::for_algorithm(cfg.algorithm),
            reward_kind: RewardKind::for_algorithm(cfg.algorithm),
            sigma2: cfg.noise_power_w(),
            rng,
            episode: EpisodeState::new(robots),
            realization,
            rate_log: vec![Vec::new(); cfg.num_robots],
        })
    }

    fn fresh_robots(cfg: &SimConfig) -> Result<Vec<RobotState>, CoreError> {
        cfg.starts
            .iter()
            .zip(&cfg.destinations)
            .enumerate()
            .map(|(id, (&s, &d))| RobotState::new(id, s, d, cfg.energy.speed, &cfg.map))
            .collect()
    }

    pub fn num_robots(&self) -> usize {
        self.episode.robots.len()
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    pub fn episode_done(&self) -> bool {
        self.episode.done
    }

    pub fn slot(&self) -> u32 {
        self.episode.slot
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.episode.robots
    }

    pub fn power_config(&self) -> &PowerConfig {
        &self.power
    }

    /// Starts a new episode: robots back to their starts, slot counter to
    /// zero, fresh opening channels. The channel stream continues rather
    /// than restarting, so successive episodes see different fading.
    pub fn reset(&mut self) -> Result<(), CoreError> {
        let robots: Result<Vec<_>, _> = self
            .starts
            .iter()
            .zip(&self.destinations)
            .enumerate()
            .map(|(id, (&s, &d))| RobotState::new(id, s, d, self.speed, &self.map))
            .collect();
        self.episode = EpisodeState::new(robots?);
        for log in &mut self.rate_log {
            log.clear();
        }
        self.sample_next_channels();
        Ok(())
    }

    fn sample_next_channels(&mut self) {
        let positions: Vec<[f64; 2]> = self.episode.robots.iter().map(|r| r.position).collect();
        self.realization = sample_channels(
            &self.channel_cfg,
            self.ris.elements_per_side,
            &positions,
            &self.map,
            &mut self.rng,
        );
    }

    /// Fleet observation for the surface controller, from the current
    /// positions and the current slot's direct channels.
    pub fn global_state(&self) -> GlobalState {
        encode_global_state(
            &self.episode.robots,
            &self.realization.direct,
            &self.map,
            &self.observation,
        )
    }

    /// Observation slice for one robot.
    pub fn local_state(&self, robot: usize) -> LocalState {
        encode_local_state(
            &self.episode.robots[robot],
            self.realization.direct[robot],
            &self.map,
            &self.observation,
        )
    }

    /// Phase 1 of a slot: decode and apply the phase tuple, evaluate the
    /// combined channels it produces, and rank the traveling robots.
    pub fn apply_ris_action(&mut self, action: u64) -> Result<SlotContext, CoreError> {
        if self.episode.done {
            return Err(CoreError::Domain(
                "cannot step a finished episode; call reset first".into(),
            ));
        }
        self.ris.phases = decode_global_action(action, &self.ris)?;
        let combined = combined_channel(&self.realization, &self.ris)?;
        let gains: Vec<f64> = combined.iter().map(|h| h.norm_sqr()).collect();

        let active: Vec<usize> = self
            .episode
            .robots
            .iter()
            .filter(|r| !r.arrived)
            .map(|r| r.id)
            .collect();
        let active_gains: Vec<f64> = active.iter().map(|&k| gains[k]).collect();
        let order = decoding_order(&active_gains);
        let ordered_ids: Vec<usize> = order.0.iter().map(|&i| active[i]).collect();

        let k = self.num_robots();
        let mut rank_of = vec![None; k];
        for (rank, &id) in ordered_ids.iter().enumerate() {
            rank_of[id] = Some(rank);
        }
        let masks = (0..k)
            .map(|id| {
                rank_of[id].map(|rank| mask_power_actions(rank, active.len(), &self.power))
            })
            .collect();

        Ok(SlotContext {
            ris_action: action,
            gains,
            active,
            ordered_ids,
            rank_of,
            masks,
        })
    }

    /// Phase 2 of a slot. `actions[k]` must be `Some` exactly for the robots
    /// the context lists as active.
    pub fn complete_slot(
        &mut self,
        ctx: &SlotContext,
        actions: &[Option<usize>],
    ) -> Result<SlotOutcome, CoreError> {
        let k = self.num_robots();
        if actions.len() != k {
            return Err(CoreError::Dimension(format!(
                "{} actions for {k} robots",
                actions.len()
            )));
        }

        // Decode actions; enforce the active-set contract.
        let mut decoded = vec![None; k];
        for id in 0..k {
            match (ctx.rank_of[id], actions[id]) {
                (Some(_), Some(a)) => {
                    decoded[id] = Some(decode_local_action(a, &self.power)?);
                }
                (None, None) => {}
                (Some(_), None) => {
                    return Err(CoreError::Domain(format!(
                        "robot {id} is traveling but got no action"
                    )));
                }
                (None, Some(_)) => {
                    return Err(CoreError::Domain(format!(
                        "robot {id} has arrived but got an action"
                    )));
                }
            }
        }

        // Power feasibility, then (for SIC) gap feasibility.
        let powers: Vec<f64> = (0..k)
            .map(|id| {
                decoded[id]
                    .as_ref()
                    .map_or(0.0, |a| self.power_levels[a.power_level])
            })
            .collect();
        let total_power: f64 = powers.iter().sum();
        let budget_ok = total_power <= self.power.p_max_w;
        let feasible = match self.rate_mode {
            RateMode::Noma => {
                let gains_ordered: Vec<f64> =
                    ctx.ordered_ids.iter().map(|&id| ctx.gains[id]).collect();
                let powers_ordered: Vec<f64> =
                    ctx.ordered_ids.iter().map(|&id| powers[id]).collect();
                let gaps = sic_gaps(&gains_ordered, &powers_ordered)?;
                budget_ok && sic_feasible(&gaps, self.power.rho_min_w)
            }
            RateMode::Oma => budget_ok,
        };

        // Rates by robot id; infeasible slots transmit nothing useful.
        let mut rates = vec![0.0; k];
        if feasible {
            match self.rate_mode {
                RateMode::Noma => {
                    let gains_ordered: Vec<f64> =
                        ctx.ordered_ids.iter().map(|&id| ctx.gains[id]).collect();
                    let powers_ordered: Vec<f64> =
                        ctx.ordered_ids.iter().map(|&id| powers[id]).collect();
                    let r = noma_rates(&gains_ordered, &powers_ordered, self.sigma2);
                    for (pos, &id) in ctx.ordered_ids.iter().enumerate() {
                        rates[id] = r[pos];
                    }
                }
                RateMode::Oma => {
                    let active_gains: Vec<f64> =
                        ctx.active.iter().map(|&id| ctx.gains[id]).collect();
                    let active_powers: Vec<f64> =
                        ctx.active.iter().map(|&id| powers[id]).collect();
                    let r = oma_rates(&active_gains, &active_powers, self.sigma2, ctx.active.len());
                    for (pos, &id) in ctx.active.iter().enumerate() {
                        rates[id] = r[pos];
                    }
                }
            }
        }

        // Reward basis: raw rates or their log-experience scores.
        let qoe = match self.reward_kind {
            RewardKind::Standard => None,
            RewardKind::Qoe => Some(
                (0..k)
                    .map(|id| {
                        if ctx.rank_of[id].is_some() {
                            qoe_reward(
                                rates[id],
                                self.reward_cfg.qoe_c1,
                                self.reward_cfg.qoe_c2,
                                self.reward_cfg.qoe_floor,
                            )
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<f64>>(),
            ),
        };
        let basis = |id: usize| -> f64 {
            match &qoe {
                Some(q) => q[id],
                None => rates[id],
            }
        };

        // Moves and per-robot rewards.
        let slot_index = self.episode.slot + 1;
        let mut local_rewards = vec![0.0; k];
        let mut arrived_now = vec![false; k];
        let mut blocked = vec![false; k];
        for id in 0..k {
            let Some(action) = &decoded[id] else { continue };
            let robot = &self.episode.robots[id];
            let d_prev = distance_to_destination(robot);
            let outcome = step_robot(robot, action.orientation, &self.map);
            let d_now = distance_to_destination(&outcome.robot);
            arrived_now[id] = outcome.robot.arrived;
            blocked[id] = outcome.blocked;
            local_rewards[id] = local_reward(
                basis(id),
                d_prev,
                d_now,
                arrived_now[id],
                slot_index,
                &self.reward_cfg,
            );
            self.episode.robots[id] = outcome.robot;
        }
        let active_basis: Vec<f64> = ctx.active.iter().map(|&id| basis(id)).collect();
        let reward_global = global_reward(&active_basis, &self.reward_cfg);

        for &id in &ctx.active {
            self.rate_log[id].push(rates[id]);
        }

        self.episode.slot = slot_index;
        self.episode.done = is_terminal(&self.episode, self.t_max);

        let objective_cum = self.objective_so_far()?;
        let positions = self.episode.robots.iter().map(|r| r.position).collect();
        let outcome = SlotOutcome {
            slot: slot_index,
            ris_action: ctx.ris_action,
            feasible,
            rates,
            qoe,
            local_rewards,
            global_reward: reward_global,
            power_idx: (0..k)
                .map(|id| decoded[id].as_ref().map_or(-1, |a| a.power_level as i64))
                .collect(),
            positions,
            active: (0..k).map(|id| ctx.rank_of[id].is_some()).collect(),
            arrived_now,
            blocked,
            done: self.episode.done,
            objective_cum,
        };

        // Block fading: the next slot's channels depend on the new
        // positions. Drawing even after the final slot keeps the stream's
        // per-slot consumption uniform.
        self.sample_next_channels();
        Ok(outcome)
    }

    /// Objective over trips as logged so far: arrived robots contribute
    /// their finished trip, traveling robots their partial one.
    fn objective_so_far(&self) -> Result<f64, CoreError> {
        let travels: Vec<u32> = self.rate_log.iter().map(|l| l.len() as u32).collect();
        let energies: Vec<f64> = travels
            .iter()
            .map(|&t| motion_energy(&self.energy, t))
            .collect();
        energy_efficiency(&self.rate_log, &energies, &travels)
    }

    /// Final objective of a finished episode.
    pub fn episode_objective(&self) -> Result<f64, CoreError> {
        self.objective_so_far()
    }
}
