//! Run drivers: full training loops for the federated variants and the
//! centralized baseline, greedy evaluation, and the on-disk layout of a run
//! directory (per-slot metrics CSVs, a weight checkpoint, and a JSON
//! summary embedding the fully resolved config).

use crate::checkpoint::Checkpoint;
use crate::config::{Algorithm, SimConfig};
use crate::derive_rng;
use crate::dqn::{DqnAgent, Transition};
use crate::error::CoreError;
use crate::federated::{
    broadcast, should_sync, FederationTransport, InMemoryTransport, WeightPair,
};
use crate::mdp::{global_action_count, local_action_count};
use crate::metrics::{MetricsRow, MetricsWriter, RobotMetrics};
use crate::noma::PowerConfig;
use crate::sim::{RewardKind, Simulation, SlotOutcome};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVAL_METRICS_FILE: &str = "eval_metrics.csv";
pub const CHECKPOINT_FILE: &str = "weights.ckpt";
pub const SUMMARY_FILE: &str = "summary.json";

/// Decision-space sizes of a run. The joint count is decimal text because
/// it can exceed what JSON numbers carry exactly.
#[derive(Debug, Clone, Serialize)]
pub struct ActionSpaceInfo {
    /// Phase tuples available to the surface controller.
    pub surface_actions: u64,
    /// (direction, power) pairs per robot.
    pub robot_actions: usize,
    /// Product space of the centralized baseline.
    pub joint_actions: String,
}

/// Joint action count of the centralized baseline:
/// `(4·N_P)^K · (N_R)^N`, saturating at the u128 limit.
pub fn joint_action_count(
    num_robots: usize,
    power: &PowerConfig,
    ris: &crate::channel::RisConfig,
) -> u128 {
    let per_robot = local_action_count(power) as u128;
    let mut total = global_action_count(ris) as u128;
    for _ in 0..num_robots {
        total = total.saturating_mul(per_robot);
    }
    total
}

/// Splits a joint action index into per-robot action indices (robot 0 in
/// the least significant position) and the surface action on top.
pub fn decode_joint_action(
    index: u64,
    num_robots: usize,
    power: &PowerConfig,
    ris: &crate::channel::RisConfig,
) -> Result<(Vec<usize>, u64), CoreError> {
    let total = joint_action_count(num_robots, power, ris);
    if index as u128 >= total {
        return Err(CoreError::Domain(format!(
            "joint action index {index} out of range 0..{total}"
        )));
    }
    let base = local_action_count(power) as u64;
    let mut rest = index;
    let mut locals = Vec::with_capacity(num_robots);
    for _ in 0..num_robots {
        locals.push((rest % base) as usize);
        rest /= base;
    }
    Ok((locals, rest))
}

/// Inverse of [`decode_joint_action`].
pub fn encode_joint_action(
    locals: &[usize],
    surface: u64,
    power: &PowerConfig,
    ris: &crate::channel::RisConfig,
) -> Result<u64, CoreError> {
    let base = local_action_count(power) as u64;
    if surface >= global_action_count(ris) {
        return Err(CoreError::Domain(format!(
            "surface action {surface} out of range"
        )));
    }
    let mut index = surface;
    for &a in locals.iter().rev() {
        if a as u64 >= base {
            return Err(CoreError::Domain(format!(
                "robot action {a} out of range 0..{base}"
            )));
        }
        index = index * base + a as u64;
    }
    Ok(index)
}

/// Greedy-rollout results reported after training (and by the standalone
/// evaluation command).
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub episodes: u32,
    /// Final energy-efficiency objective of each greedy episode.
    pub objectives: Vec<f64>,
    pub objective_mean: f64,
    /// Per-episode sum of all robot rewards plus the surface reward.
    pub returns: Vec<f64>,
    pub episode_slots: Vec<u32>,
}

/// Everything a finished run reports; serialized as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub episodes: u32,
    pub num_robots: usize,
    pub t_max: u32,
    pub noise_power_w: f64,
    pub rho_min_w: f64,
    pub action_space: ActionSpaceInfo,
    pub objective_definition: String,
    /// Training return per episode: sum of robot rewards plus the surface
    /// reward for federated runs, the joint agent's own reward for the
    /// centralized baseline.
    pub episode_returns: Vec<f64>,
    /// Final objective of each training episode.
    pub episode_objectives: Vec<f64>,
    pub episode_slots: Vec<u32>,
    /// Wall-clock per training episode. The only non-deterministic output
    /// of a run; every CSV is byte-stable for a fixed config.
    pub episode_wall_ms: Vec<f64>,
    pub federation_rounds: u64,
    pub total_train_steps: u64,
    pub eval: EvalReport,
    /// The resolved input config, defaults and generated values explicit.
    pub config: crate::config::RawConfig,
}

const OBJECTIVE_DEFINITION: &str =
    "sum over robots of (mean rate over the robot's trip, bit/s/Hz) / (e1*v*T + e2*T) joules";

fn action_space_info(cfg: &SimConfig) -> ActionSpaceInfo {
    ActionSpaceInfo {
        surface_actions: global_action_count(&cfg.ris),
        robot_actions: local_action_count(&cfg.power),
        joint_actions: joint_action_count(cfg.num_robots, &cfg.power, &cfg.ris).to_string(),
    }
}

fn metrics_row(episode: u32, out: &SlotOutcome) -> MetricsRow {
    MetricsRow {
        episode,
        slot: out.slot,
        ris_action: out.ris_action,
        sic_feasible: out.feasible,
        global_reward: out.global_reward,
        objective_cum: out.objective_cum,
        robots: (0..out.rates.len())
            .map(|id| RobotMetrics {
                x: out.positions[id][0],
                y: out.positions[id][1],
                power_idx: out.power_idx[id],
                rate: out.rates[id],
                qoe: out.qoe.as_ref().map(|q| q[id]),
                local_reward: out.local_rewards[id],
                active: out.active[id],
            })
            .collect(),
    }
}

/// One aggregation round: upload every robot's weight pair, average, and
/// push deep copies back. The surface agent never participates.
fn federate(
    locals: &mut [DqnAgent],
    transport: &mut dyn FederationTransport,
) -> Result<(), CoreError> {
    let uploads: Vec<WeightPair> = locals
        .iter()
        .map(|a| WeightPair {
            online: a.online.clone(),
            target: a.target.clone(),
        })
        .collect();
    let global = transport.exchange(&uploads)?;
    let mut pairs = uploads;
    broadcast(&global, &mut pairs)?;
    for (agent, pair) in locals.iter_mut().zip(pairs) {
        agent.online = pair.online;
        agent.target = pair.target;
    }
    Ok(())
}

/// A trained policy under greedy evaluation.
enum Policy<'a> {
    Federated {
        global: &'a DqnAgent,
        locals: &'a [DqnAgent],
    },
    Central {
        agent: &'a DqnAgent,
    },
}

fn greedy_slot(
    sim: &mut Simulation,
    cfg: &SimConfig,
    policy: &Policy,
    full_mask: &[bool],
) -> Result<SlotOutcome, CoreError> {
    match policy {
        Policy::Federated { global, locals } => {
            let s = sim.global_state();
            let a_g = global.act_greedy(&s.0, full_mask)?;
            let ctx = sim.apply_ris_action(a_g as u64)?;
            let mut actions = vec![None; locals.len()];
            for (id, agent) in locals.iter().enumerate() {
                if let Some(mask) = &ctx.masks[id] {
                    let s_l = sim.local_state(id);
                    actions[id] = Some(agent.act_greedy(s_l.as_slice(), mask)?);
                }
            }
            sim.complete_slot(&ctx, &actions)
        }
        Policy::Central { agent } => {
            let s = sim.global_state();
            let a = agent.act_greedy(&s.0, full_mask)?;
            let (locals_dec, surface) =
                decode_joint_action(a as u64, cfg.num_robots, &cfg.power, &cfg.ris)?;
            let ctx = sim.apply_ris_action(surface)?;
            let actions: Vec<Option<usize>> = (0..cfg.num_robots)
                .map(|id| ctx.rank_of[id].map(|_| locals_dec[id]))
                .collect();
            sim.complete_slot(&ctx, &actions)
        }
    }
}

/// Runs `cfg.eval_episodes` fully greedy episodes on a fresh evaluation
/// channel stream. Greedy action selection consumes no randomness, so the
/// rollout is a pure function of the config and the weights.
fn evaluate(
    cfg: &SimConfig,
    policy: &Policy,
    csv_path: Option<&Path>,
) -> Result<EvalReport, CoreError> {
    let with_qoe = RewardKind::for_algorithm(cfg.algorithm) == RewardKind::Qoe;
    let mut writer = match csv_path {
        Some(p) => Some(MetricsWriter::create(p, cfg.num_robots, with_qoe)?),
        None => None,
    };
    let full_mask = match policy {
        Policy::Federated { global, .. } => vec![true; global.action_count()],
        Policy::Central { agent } => vec![true; agent.action_count()],
    };
    let mut sim = Simulation::new(cfg, derive_rng(cfg.seed, "channel/eval"))?;
    let mut objectives = Vec::new();
    let mut returns = Vec::new();
    let mut episode_slots = Vec::new();
    for ep in 0..cfg.eval_episodes {
        if ep > 0 {
            sim.reset()?;
        }
        let mut ret = 0.0;
        while !sim.episode_done() {
            let out = greedy_slot(&mut sim, cfg, policy, &full_mask)?;
            ret += out.local_rewards.iter().sum::<f64>() + out.global_reward;
            if let Some(w) = writer.as_mut() {
                w.write_row(&metrics_row(ep, &out))?;
            }
        }
        objectives.push(sim.episode_objective()?);
        returns.push(ret);
        episode_slots.push(sim.slot());
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    let objective_mean = if objectives.is_empty() {
        0.0
    } else {
        objectives.iter().sum::<f64>() / objectives.len() as f64
    };
    Ok(EvalReport {
        episodes: cfg.eval_episodes,
        objectives,
        objective_mean,
        returns,
        episode_slots,
    })
}

/// Trains with the per-robot agents, the surface agent, and periodic weight
/// averaging. Handles all three federated variants; the rate and reward
/// substitutions live inside [`Simulation`].
fn run_federated(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary, CoreError> {
    let k = cfg.num_robots;
    let surface_actions = global_action_count(&cfg.ris) as usize;
    let robot_actions = local_action_count(&cfg.power);
    let with_qoe = RewardKind::for_algorithm(cfg.algorithm) == RewardKind::Qoe;

    let mut sim = Simulation::new(cfg, derive_rng(cfg.seed, "channel/train"))?;
    let mut init_rng = derive_rng(cfg.seed, "init/global");
    let mut global_agent = DqnAgent::new(
        3 * k,
        surface_actions,
        cfg.train_global.clone(),
        &mut init_rng,
        derive_rng(cfg.seed, "agent/global"),
    );
    let mut locals: Vec<DqnAgent> = (0..k)
        .map(|id| {
            let mut init = derive_rng(cfg.seed, &format!("init/local{id}"));
            DqnAgent::new(
                3,
                robot_actions,
                cfg.train_local.clone(),
                &mut init,
                derive_rng(cfg.seed, &format!("agent/local{id}")),
            )
        })
        .collect();
    let mut transport = InMemoryTransport::new();
    let full_mask_g = vec![true; surface_actions];
    let mut writer = MetricsWriter::create(&out_dir.join(METRICS_FILE), k, with_qoe)?;

    let mut episode_returns = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_objectives = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_slots = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_wall_ms = Vec::with_capacity(cfg.episodes as usize);
    let mut global_slot: u64 = 0;

    for ep in 0..cfg.episodes {
        if ep > 0 {
            sim.reset()?;
        }
        let started = Instant::now();
        let eps_global = cfg.train_global.epsilon_at(ep, cfg.episodes);
        let eps_local = cfg.train_local.epsilon_at(ep, cfg.episodes);
        let mut ret = 0.0;
        while !sim.episode_done() {
            let s_g = sim.global_state();
            let a_g = global_agent.act(&s_g.0, &full_mask_g, eps_global)?;
            let ctx = sim.apply_ris_action(a_g as u64)?;

            let mut taken: Vec<Option<(Vec<f64>, usize)>> = vec![None; k];
            let mut actions: Vec<Option<usize>> = vec![None; k];
            for id in 0..k {
                if let Some(mask) = &ctx.masks[id] {
                    let s_l = sim.local_state(id);
                    let a = locals[id].act(s_l.as_slice(), mask, eps_local)?;
                    taken[id] = Some((s_l.as_slice().to_vec(), a));
                    actions[id] = Some(a);
                }
            }
            let out = sim.complete_slot(&ctx, &actions)?;

            let s_g_next = sim.global_state();
            global_agent.observe(Transition {
                state: s_g.0,
                action: a_g,
                reward: out.global_reward,
                next_state: s_g_next.0,
                terminal: out.done,
            });
            for id in 0..k {
                if let Some((state, action)) = taken[id].take() {
                    locals[id].observe(Transition {
                        state,
                        action,
                        reward: out.local_rewards[id],
                        next_state: sim.local_state(id).as_slice().to_vec(),
                        terminal: out.arrived_now[id] || out.done,
                    });
                }
            }

            // Every agent learns each slot; robots that already arrived keep
            // refining from their replay memories.
            global_agent.learn()?;
            for agent in locals.iter_mut() {
                agent.learn()?;
            }
            global_slot += 1;
            if should_sync(global_slot, &cfg.federation) {
                federate(&mut locals, &mut transport)?;
            }

            ret += out.local_rewards.iter().sum::<f64>() + out.global_reward;
            writer.write_row(&metrics_row(ep, &out))?;
        }
        episode_returns.push(ret);
        episode_objectives.push(sim.episode_objective()?);
        episode_slots.push(sim.slot());
        episode_wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    writer.finish()?;

    let checkpoint = Checkpoint {
        algorithm: cfg.algorithm,
        num_robots: k as u32,
        nets: std::iter::once(("global".to_string(), &global_agent))
            .chain(locals.iter().enumerate().map(|(id, a)| (format!("local{id}"), a)))
            .flat_map(|(name, agent)| {
                [
                    (format!("{name}/online"), agent.online.clone()),
                    (format!("{name}/target"), agent.target.clone()),
                ]
            })
            .collect(),
    };
    checkpoint.save(&out_dir.join(CHECKPOINT_FILE))?;

    let eval = evaluate(
        cfg,
        &Policy::Federated {
            global: &global_agent,
            locals: &locals,
        },
        Some(&out_dir.join(EVAL_METRICS_FILE)),
    )?;

    let total_train_steps =
        global_agent.train_steps() + locals.iter().map(|a| a.train_steps()).sum::<u64>();
    Ok(RunSummary {
        algorithm: cfg.algorithm.tag().to_string(),
        seed: cfg.seed,
        episodes: cfg.episodes,
        num_robots: k,
        t_max: cfg.t_max,
        noise_power_w: cfg.noise_power_w(),
        rho_min_w: cfg.power.rho_min_w,
        action_space: action_space_info(cfg),
        objective_definition: OBJECTIVE_DEFINITION.to_string(),
        episode_returns,
        episode_objectives,
        episode_slots,
        episode_wall_ms,
        federation_rounds: transport.rounds_completed(),
        total_train_steps,
        eval,
        config: cfg.echo.clone(),
    })
}

/// Trains the single joint-action baseline agent. Refuses to start when the
/// joint action space exceeds the configured cap.
fn run_centralized(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary, CoreError> {
    let k = cfg.num_robots;
    let joint = joint_action_count(k, &cfg.power, &cfg.ris);
    if joint > cfg.action_space_cap as u128 {
        return Err(CoreError::ActionSpaceCap {
            size: joint,
            cap: cfg.action_space_cap,
        });
    }
    let joint = joint as usize;
    let with_qoe = RewardKind::for_algorithm(cfg.algorithm) == RewardKind::Qoe;

    let mut sim = Simulation::new(cfg, derive_rng(cfg.seed, "channel/train"))?;
    let mut init_rng = derive_rng(cfg.seed, "init/central");
    let mut agent = DqnAgent::new(
        3 * k,
        joint,
        cfg.train_central.clone(),
        &mut init_rng,
        derive_rng(cfg.seed, "agent/central"),
    );
    let full_mask = vec![true; joint];
    let mut writer = MetricsWriter::create(&out_dir.join(METRICS_FILE), k, with_qoe)?;

    let mut episode_returns = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_objectives = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_slots = Vec::with_capacity(cfg.episodes as usize);
    let mut episode_wall_ms = Vec::with_capacity(cfg.episodes as usize);

    for ep in 0..cfg.episodes {
        if ep > 0 {
            sim.reset()?;
        }
        let started = Instant::now();
        let epsilon = cfg.train_central.epsilon_at(ep, cfg.episodes);
        let mut ret = 0.0;
        while !sim.episode_done() {
            let s = sim.global_state();
            let a = agent.act(&s.0, &full_mask, epsilon)?;
            let (locals_dec, surface) =
                decode_joint_action(a as u64, k, &cfg.power, &cfg.ris)?;
            let ctx = sim.apply_ris_action(surface)?;
            // Sub-actions of arrived robots are dead digits in the joint
            // index; the environment ignores them.
            let actions: Vec<Option<usize>> = (0..k)
                .map(|id| ctx.rank_of[id].map(|_| locals_dec[id]))
                .collect();
            let out = sim.complete_slot(&ctx, &actions)?;

            let reward =
                out.local_rewards.iter().sum::<f64>() + out.global_reward / 10.0;
            agent.observe(Transition {
                state: s.0,
                action: a,
                reward,
                next_state: sim.global_state().0,
                terminal: out.done,
            });
            agent.learn()?;

            ret += reward;
            writer.write_row(&metrics_row(ep, &out))?;
        }
        episode_returns.push(ret);
        episode_objectives.push(sim.episode_objective()?);
        episode_slots.push(sim.slot());
        episode_wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    writer.finish()?;

    let checkpoint = Checkpoint {
        algorithm: cfg.algorithm,
        num_robots: k as u32,
        nets: vec![
            ("central/online".to_string(), agent.online.clone()),
            ("central/target".to_string(), agent.target.clone()),
        ],
    };
    checkpoint.save(&out_dir.join(CHECKPOINT_FILE))?;

    let eval = evaluate(
        cfg,
        &Policy::Central { agent: &agent },
        Some(&out_dir.join(EVAL_METRICS_FILE)),
    )?;

    Ok(RunSummary {
        algorithm: cfg.algorithm.tag().to_string(),
        seed: cfg.seed,
        episodes: cfg.episodes,
        num_robots: k,
        t_max: cfg.t_max,
        noise_power_w: cfg.noise_power_w(),
        rho_min_w: cfg.power.rho_min_w,
        action_space: action_space_info(cfg),
        objective_definition: OBJECTIVE_DEFINITION.to_string(),
        episode_returns,
        episode_objectives,
        episode_slots,
        episode_wall_ms,
        federation_rounds: 0,
        total_train_steps: agent.train_steps(),
        eval,
        config: cfg.echo.clone(),
    })
}

/// Trains per the config's algorithm, writes all run artifacts into
/// `out_dir`, and returns the summary that was also written there.
pub fn run(cfg: &SimConfig, out_dir: &Path) -> Result<RunSummary, CoreError> {
    std::fs::create_dir_all(out_dir)?;
    let summary = match cfg.algorithm {
        Algorithm::Central => run_centralized(cfg, out_dir)?,
        _ => run_federated(cfg, out_dir)?,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CoreError::Domain(format!("summary serialization: {e}")))?;
    std::fs::write(out_dir.join(SUMMARY_FILE), json + "\n")?;
    Ok(summary)
}

fn checkpoint_net(
    ckpt: &Checkpoint,
    name: &str,
    input_dim: usize,
    output_dim: usize,
) -> Result<crate::dqn::NetworkWeights, CoreError> {
    let net = ckpt.net(name).ok_or_else(|| {
        CoreError::Checkpoint(format!("checkpoint has no network named {name:?}"))
    })?;
    if net.input_dim() != input_dim || net.output_dim() != output_dim {
        return Err(CoreError::Checkpoint(format!(
            "network {name:?} is {}→{}, the config needs {input_dim}→{output_dim}",
            net.input_dim(),
            net.output_dim()
        )));
    }
    Ok(net.clone())
}

/// Greedy evaluation of checkpointed weights under the given config. The
/// checkpoint must come from the same algorithm and fleet size.
pub fn evaluate_checkpoint(
    cfg: &SimConfig,
    ckpt: &Checkpoint,
    csv_path: Option<&Path>,
) -> Result<EvalReport, CoreError> {
    if ckpt.algorithm != cfg.algorithm {
        return Err(CoreError::Checkpoint(format!(
            "checkpoint was trained with algorithm `{}`, the config requests `{}`",
            ckpt.algorithm.tag(),
            cfg.algorithm.tag()
        )));
    }
    if ckpt.num_robots as usize != cfg.num_robots {
        return Err(CoreError::Checkpoint(format!(
            "checkpoint holds {} robots, the config has {}",
            ckpt.num_robots, cfg.num_robots
        )));
    }
    let k = cfg.num_robots;
    match cfg.algorithm {
        Algorithm::Central => {
            let joint = joint_action_count(k, &cfg.power, &cfg.ris);
            if joint > cfg.action_space_cap as u128 {
                return Err(CoreError::ActionSpaceCap {
                    size: joint,
                    cap: cfg.action_space_cap,
                });
            }
            let agent = DqnAgent::from_weights(
                checkpoint_net(ckpt, "central/online", 3 * k, joint as usize)?,
                checkpoint_net(ckpt, "central/target", 3 * k, joint as usize)?,
                cfg.train_central.clone(),
                derive_rng(cfg.seed, "agent/central"),
            );
            evaluate(cfg, &Policy::Central { agent: &agent }, csv_path)
        }
        _ => {
            let surface_actions = global_action_count(&cfg.ris) as usize;
            let robot_actions = local_action_count(&cfg.power);
            let global = DqnAgent::from_weights(
                checkpoint_net(ckpt, "global/online", 3 * k, surface_actions)?,
                checkpoint_net(ckpt, "global/target", 3 * k, surface_actions)?,
                cfg.train_global.clone(),
                derive_rng(cfg.seed, "agent/global"),
            );
            let locals: Vec<DqnAgent> = (0..k)
                .map(|id| {
                    Ok(DqnAgent::from_weights(
                        checkpoint_net(ckpt, &format!("local{id}/online"), 3, robot_actions)?,
                        checkpoint_net(ckpt, &format!("local{id}/target"), 3, robot_actions)?,
                        cfg.train_local.clone(),
                        derive_rng(cfg.seed, &format!("agent/local{id}")),
                    ))
                })
                .collect::<Result<_, CoreError>>()?;
            evaluate(
                cfg,
                &Policy::Federated {
                    global: &global,
                    locals: &locals,
                },
                csv_path,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_raw;
    use rand::Rng;

    /// Tiny end-to-end config: everything scaled so a run finishes in tens
    /// of milliseconds.
    fn tiny_config(algorithm: &str, seed: u64) -> SimConfig {
        let text = format!(
            "
[map]
x_max = 3.0
y_max = 3.0
cell_size = 0.5
ap_position = [1.5, 3.0, 2.0]
ris_position = [3.0, 0.5, 2.0]

[fleet]
count = 2
t_max = 10
starts = [[0.25, 0.25], [2.75, 0.25]]
destinations = [[2.75, 2.75], [0.25, 2.75]]

[ris]
elements_per_side = 2
num_subsurfaces = 1
resolution_bits = 1

[channel]
bandwidth_hz = 1e5

[power]
num_levels = 4

[training.local]
hidden_layers = [8]
batch_size = 8
memory_capacity = 64
target_sync_period = 10

[training.global]
hidden_layers = [8]
batch_size = 8
memory_capacity = 64
target_sync_period = 10

[training.central]
hidden_layers = [8]
batch_size = 8
memory_capacity = 64
target_sync_period = 10

[federation]
sync_period = 7

[run]
algorithm = \"{algorithm}\"
seed = {seed}
episodes = 4
eval_episodes = 2
"
        );
        parse_raw(&text).unwrap().resolve().unwrap()
    }

    #[test]
    fn joint_count_matches_product_formula() {
        // K=2, N_P=6, N_R=4, N=1 → (4·6)²·4 = 2304.
        let power = PowerConfig {
            p_max_w: 0.1,
            num_levels: 6,
            rho_min_w: 1e-9,
        };
        let ris = crate::channel::RisConfig::new(8, 1, 2).unwrap();
        assert_eq!(joint_action_count(2, &power, &ris), 2304);
        // K=4 at the same sizes → 1,327,104.
        assert_eq!(joint_action_count(4, &power, &ris), 1_327_104);
    }

    #[test]
    fn joint_codec_round_trips() {
        let power = PowerConfig {
            p_max_w: 0.1,
            num_levels: 3,
            rho_min_w: 1e-9,
        };
        let ris = crate::channel::RisConfig::new(4, 2, 1).unwrap();
        let total = joint_action_count(2, &power, &ris) as u64;
        assert_eq!(total, 12 * 12 * 4);
        for index in 0..total {
            let (locals, surface) = decode_joint_action(index, 2, &power, &ris).unwrap();
            assert!(locals.iter().all(|&a| a < 12));
            assert!(surface < 4);
            let back = encode_joint_action(&locals, surface, &power, &ris).unwrap();
            assert_eq!(back, index);
        }
        assert!(decode_joint_action(total, 2, &power, &ris).is_err());
    }

    #[test]
    fn joint_decode_is_robot0_least_significant() {
        let power = PowerConfig {
            p_max_w: 0.1,
            num_levels: 3,
            rho_min_w: 1e-9,
        };
        let ris = crate::channel::RisConfig::new(4, 1, 1).unwrap();
        // index = a0 + 12·a1 + 144·surface.
        let (locals, surface) = decode_joint_action(5 + 12 * 7 + 144 * 1, 2, &power, &ris).unwrap();
        assert_eq!(locals, vec![5, 7]);
        assert_eq!(surface, 1);
    }

    #[test]
    fn federated_run_produces_all_artifacts() {
        let cfg = tiny_config("fdrl", 41);
        let dir = tempfile::tempdir().unwrap();
        let summary = run(&cfg, dir.path()).unwrap();
        assert_eq!(summary.algorithm, "fdrl");
        assert_eq!(summary.episode_returns.len(), 4);
        assert_eq!(summary.episode_objectives.len(), 4);
        assert_eq!(summary.eval.objectives.len(), 2);
        assert!(summary.episode_slots.iter().all(|&s| s <= 10));
        // Synchronization fired: 4 episodes × up to 10 slots at period 7.
        assert!(summary.federation_rounds >= 1);
        for f in [METRICS_FILE, EVAL_METRICS_FILE, CHECKPOINT_FILE, SUMMARY_FILE] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        // The metrics file parses and covers every training slot.
        let text = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        let rows = crate::metrics::read_metrics(&text).unwrap();
        let total_slots: u32 = summary.episode_slots.iter().sum();
        assert_eq!(rows.len(), total_slots as usize);
        // Summary JSON embeds the echoed config.
        let json = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["config"]["run"]["seed"], 41);
        assert!(v["config"]["power"]["rho_min_dbm"].is_number());
    }

    #[test]
    fn centralized_run_works_at_small_scale() {
        let cfg = tiny_config("central", 42);
        let dir = tempfile::tempdir().unwrap();
        let summary = run(&cfg, dir.path()).unwrap();
        assert_eq!(summary.algorithm, "central");
        assert_eq!(summary.federation_rounds, 0);
        assert_eq!(summary.action_space.joint_actions, "512");
        let ckpt = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
        assert!(ckpt.net("central/online").is_some());
        assert!(ckpt.net("global/online").is_none());
    }

    #[test]
    fn centralized_run_refuses_oversized_action_space() {
        let mut cfg = tiny_config("central", 43);
        cfg.action_space_cap = 100;
        let dir = tempfile::tempdir().unwrap();
        let err = run(&cfg, dir.path()).unwrap_err();
        match err {
            CoreError::ActionSpaceCap { size, cap } => {
                assert_eq!(size, 512);
                assert_eq!(cap, 100);
            }
            other => panic!("expected cap refusal, got {other}"),
        }
    }

    #[test]
    fn identical_configs_give_byte_identical_csvs() {
        for algo in ["fdrl", "central", "oma-fdrl", "qoe-fdrl"] {
            let cfg = tiny_config(algo, 44);
            let d1 = tempfile::tempdir().unwrap();
            let d2 = tempfile::tempdir().unwrap();
            let s1 = run(&cfg, d1.path()).unwrap();
            let s2 = run(&cfg, d2.path()).unwrap();
            for f in [METRICS_FILE, EVAL_METRICS_FILE, CHECKPOINT_FILE] {
                let a = std::fs::read(d1.path().join(f)).unwrap();
                let b = std::fs::read(d2.path().join(f)).unwrap();
                assert_eq!(a, b, "{algo}: {f} differs between identical runs");
            }
            assert_eq!(s1.episode_returns, s2.episode_returns, "{algo}");
            assert_eq!(s1.eval.objectives, s2.eval.objectives, "{algo}");
        }
    }

    #[test]
    fn checkpoint_evaluation_reproduces_run_evaluation() {
        for algo in ["fdrl", "central", "qoe-fdrl"] {
            let cfg = tiny_config(algo, 45);
            let dir = tempfile::tempdir().unwrap();
            let summary = run(&cfg, dir.path()).unwrap();
            let ckpt = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
            let report = evaluate_checkpoint(&cfg, &ckpt, None).unwrap();
            assert_eq!(report.objectives, summary.eval.objectives, "{algo}");
            assert_eq!(report.returns, summary.eval.returns, "{algo}");
        }
    }

    #[test]
    fn checkpoint_evaluation_rejects_mismatches() {
        let cfg = tiny_config("fdrl", 46);
        let dir = tempfile::tempdir().unwrap();
        run(&cfg, dir.path()).unwrap();
        let ckpt = Checkpoint::load(&dir.path().join(CHECKPOINT_FILE)).unwrap();
        // Algorithm mismatch.
        let other = tiny_config("oma-fdrl", 46);
        assert!(matches!(
            evaluate_checkpoint(&other, &ckpt, None),
            Err(CoreError::Checkpoint(m)) if m.contains("algorithm")
        ));
        // Interface mismatch: more power levels change the robot action
        // count, so the checkpointed heads no longer fit. (Hidden sizes are
        // free to differ; the checkpoint carries its own architecture.)
        let mut wider = tiny_config("fdrl", 46);
        wider.power.num_levels = 6;
        assert!(matches!(
            evaluate_checkpoint(&wider, &ckpt, None),
            Err(CoreError::Checkpoint(m)) if m.contains("local0/online")
        ));
    }

    #[test]
    fn qoe_runs_emit_experience_columns() {
        let cfg = tiny_config("qoe-fdrl", 47);
        let dir = tempfile::tempdir().unwrap();
        run(&cfg, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
        assert!(text.lines().next().unwrap().contains("qoe0"));
        let plain = tiny_config("fdrl", 47);
        let dir2 = tempfile::tempdir().unwrap();
        run(&plain, dir2.path()).unwrap();
        let text2 = std::fs::read_to_string(dir2.path().join(METRICS_FILE)).unwrap();
        assert!(!text2.lines().next().unwrap().contains("qoe0"));
    }

    #[test]
    fn single_robot_noma_and_oma_runs_are_byte_identical() {
        let mk = |algo: &str| {
            let text = format!(
                "
[map]
x_max = 3.0
y_max = 3.0
cell_size = 0.5
ap_position = [1.5, 3.0, 2.0]
ris_position = [3.0, 0.5, 2.0]

[fleet]
count = 1
t_max = 10
starts = [[0.25, 0.25]]
destinations = [[2.75, 2.75]]

[ris]
elements_per_side = 2
num_subsurfaces = 1
resolution_bits = 1

[channel]
bandwidth_hz = 1e5

[power]
num_levels = 4

[training.local]
hidden_layers = [8]
batch_size = 8
memory_capacity = 64

[training.global]
hidden_layers = [8]
batch_size = 8
memory_capacity = 64

[run]
algorithm = \"{algo}\"
seed = 48
episodes = 3
eval_episodes = 2
"
            );
            parse_raw(&text).unwrap().resolve().unwrap()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&mk("fdrl"), d1.path()).unwrap();
        run(&mk("oma-fdrl"), d2.path()).unwrap();
        for f in [METRICS_FILE, EVAL_METRICS_FILE] {
            let a = std::fs::read(d1.path().join(f)).unwrap();
            let b = std::fs::read(d2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between degenerate runs");
        }
    }

    #[test]
    fn random_joint_tuples_match_per_agent_factors() {
        let mut rng = crate::derive_rng(99, "tuple-test");
        for _ in 0..10 {
            let k = rng.gen_range(1..5usize);
            let n_p = rng.gen_range(k.max(2)..8usize);
            let bits = rng.gen_range(1..3u32);
            let n_sub = rng.gen_range(1..3usize);
            let side = 2 * n_sub; // guarantees N divides M
            let power = PowerConfig {
                p_max_w: 0.1,
                num_levels: n_p,
                rho_min_w: 1e-9,
            };
            let ris = crate::channel::RisConfig::new(side, n_sub, bits).unwrap();
            let surface = (1u128 << bits).pow(n_sub as u32);
            let robot = 4 * n_p as u128;
            assert_eq!(global_action_count(&ris) as u128, surface);
            assert_eq!(local_action_count(&power) as u128, robot);
            assert_eq!(
                joint_action_count(k, &power, &ris),
                robot.pow(k as u32) * surface
            );
        }
    }
}
