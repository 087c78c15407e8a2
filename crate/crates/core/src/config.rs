//! Experiment configuration: a TOML file with one section per subsystem,
//! every key optional with documented defaults, unknown keys rejected. A raw
//! config resolves into validated domain types plus an echo copy with all
//! defaults and generated values made explicit, which the run summary
//! embeds so that any run is reconstructible from its outputs.

use crate::channel::{quantized_phase_set, ChannelModelConfig, RisConfig};
use crate::dqn::TrainConfig;
use crate::env::{snap_to_grid, GridMap, Wall};
use crate::error::CoreError;
use crate::federated::FederationConfig;
use crate::mdp::{global_action_count, ObservationConfig, RewardConfig};
use crate::noma::{EnergyModel, PowerConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Which training procedure a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Federated per-robot agents plus the surface agent.
    Fdrl,
    /// Single joint-action agent over the whole system.
    Central,
    /// Federated loop with orthogonal-access rates.
    OmaFdrl,
    /// Federated loop with the log-experience reward substitution.
    QoeFdrl,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Fdrl => "fdrl",
            Algorithm::Central => "central",
            Algorithm::OmaFdrl => "oma-fdrl",
            Algorithm::QoeFdrl => "qoe-fdrl",
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell_size: f64,
    /// Wall rectangles as (x0, y0, x1, y1) meter tuples.
    pub walls: Vec<[f64; 4]>,
    pub ap_position: [f64; 3],
    pub ris_position: [f64; 3],
}

impl Default for MapSection {
    fn default() -> Self {
        MapSection {
            x_min: 0.0,
            x_max: 30.0,
            y_min: 0.0,
            y_max: 30.0,
            cell_size: 0.5,
            walls: vec![],
            ap_position: [15.0, 30.0, 2.0],
            ris_position: [30.0, 7.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetSection {
    /// Robot count K.
    pub count: usize,
    /// Travel speed, m/s.
    pub speed: f64,
    /// Slot deadline per episode.
    pub t_max: u32,
    /// Explicit start cells; omitted → seeded random placement.
    pub starts: Option<Vec<[f64; 2]>>,
    /// Explicit destination cells; omitted → seeded random placement.
    pub destinations: Option<Vec<[f64; 2]>>,
    /// Minimum start→destination Manhattan distance, in cells, for the
    /// random generator; omitted → quarter of the map semi-perimeter.
    pub min_trip_cells: Option<usize>,
}

impl Default for FleetSection {
    fn default() -> Self {
        FleetSection {
            count: 3,
            speed: 0.5,
            t_max: 200,
            starts: None,
            destinations: None,
            min_trip_cells: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    pub e1: f64,
    pub e2: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection { e1: 7.4, e2: 0.29 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RisSection {
    pub elements_per_side: usize,
    pub num_subsurfaces: usize,
    pub resolution_bits: u32,
}

impl Default for RisSection {
    fn default() -> Self {
        RisSection {
            elements_per_side: 30,
            num_subsurfaces: 1,
            resolution_bits: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub p_max_dbm: f64,
    pub num_levels: usize,
    /// SIC gap threshold; omitted → noise power.
    pub rho_min_dbm: Option<f64>,
}

impl Default for PowerSection {
    fn default() -> Self {
        PowerSection {
            p_max_dbm: 20.0,
            num_levels: 6,
            rho_min_dbm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    /// Per-robot agents.
    pub local: TrainConfig,
    /// Surface agent.
    pub global: TrainConfig,
    /// Joint-action baseline agent.
    pub central: TrainConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            local: TrainConfig::default(),
            global: TrainConfig::default(),
            central: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationSection {
    /// Steps between weight-averaging rounds.
    pub sync_period: u64,
}

impl Default for FederationSection {
    fn default() -> Self {
        FederationSection { sync_period: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub episodes: u32,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Greedy episodes after training that produce the reported objective.
    pub eval_episodes: u32,
    /// Output directory; CLI `--out` and the `RISFED_OUT_DIR` variable
    /// override it.
    pub out_dir: Option<String>,
    /// Refusal threshold for the joint action space of the centralized
    /// baseline (and for the surface agent's phase-tuple count).
    pub action_space_cap: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            episodes: 300,
            seed: 1,
            algorithm: Algorithm::Fdrl,
            eval_episodes: 20,
            out_dir: None,
            action_space_cap: 1_000_000,
        }
    }
}

/// The config file as written, defaults filled in.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub map: MapSection,
    pub fleet: FleetSection,
    pub energy: EnergySection,
    pub channel: ChannelModelConfig,
    pub ris: RisSection,
    pub power: PowerSection,
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
    pub training: TrainingSection,
    pub federation: FederationSection,
    pub run: RunSection,
}

/// Parses a config file without resolving it.
pub fn load_raw(path: &Path) -> Result<RawConfig, CoreError> {
    let text = std::fs::read_to_string(path)?;
    parse_raw(&text)
}

/// Parses config text without resolving it.
pub fn parse_raw(text: &str) -> Result<RawConfig, CoreError> {
    toml::from_str(text).map_err(|e| CoreError::Parse(e.to_string()))
}

/// Fully validated run configuration with all derived quantities resolved.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub map: GridMap,
    pub num_robots: usize,
    pub starts: Vec<[f64; 2]>,
    pub destinations: Vec<[f64; 2]>,
    pub t_max: u32,
    pub energy: EnergyModel,
    pub channel: ChannelModelConfig,
    /// Surface geometry; per-slot phases are set by the controller.
    pub ris: RisConfig,
    pub power: PowerConfig,
    pub reward: RewardConfig,
    pub observation: ObservationConfig,
    pub train_local: TrainConfig,
    pub train_global: TrainConfig,
    pub train_central: TrainConfig,
    pub federation: FederationConfig,
    pub episodes: u32,
    pub eval_episodes: u32,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub out_dir: Option<PathBuf>,
    pub action_space_cap: u64,
    /// True when ρ_min fell back to the noise power.
    pub rho_min_defaulted: bool,
    /// The input config with every default and generated value explicit.
    pub echo: RawConfig,
}

fn build_map(section: &MapSection) -> Result<GridMap, CoreError> {
    let walls = section
        .walls
        .iter()
        .map(|w| Wall::new(w[0], w[1], w[2], w[3]))
        .collect();
    GridMap::new(
        section.x_min,
        section.x_max,
        section.y_min,
        section.y_max,
        section.cell_size,
        walls,
        section.ap_position,
        section.ris_position,
    )
}

fn cell_inside_wall(map: &GridMap, center: [f64; 2]) -> bool {
    // A degenerate-rectangle wall lying on a cell edge does not swallow the
    // cell; only area-covering walls exclude placement.
    map.walls.iter().any(|w| {
        w.x1 > w.x0 && w.y1 > w.y0
            && center[0] > w.x0
            && center[0] < w.x1
            && center[1] > w.y0
            && center[1] < w.y1
    })
}

fn manhattan_cells(map: &GridMap, a: [f64; 2], b: [f64; 2]) -> usize {
    let dx = ((a[0] - b[0]).abs() / map.cell_size).round() as usize;
    let dy = ((a[1] - b[1]).abs() / map.cell_size).round() as usize;
    dx + dy
}

/// Draws start/destination cell centers for every robot, seeded by the run
/// seed only, so placements are stable across algorithm variants.
fn generate_placements(
    map: &GridMap,
    count: usize,
    min_trip_cells: usize,
    seed: u64,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>), CoreError> {
    let mut rng = crate::derive_rng(seed, "placement");
    let (cx, cy) = (map.cells_x(), map.cells_y());
    let mut starts = Vec::with_capacity(count);
    let mut dests = Vec::with_capacity(count);
    for _ in 0..count {
        let mut attempts = 0;
        let start = loop {
            attempts += 1;
            if attempts > 10_000 {
                return Err(CoreError::invalid_config(
                    "fleet",
                    "could not place robots on free cells; check walls",
                ));
            }
            let c = map.cell_center(rng.gen_range(0..cx), rng.gen_range(0..cy));
            if !cell_inside_wall(map, c) {
                break c;
            }
        };
        let dest = loop {
            attempts += 1;
            if attempts > 10_000 {
                return Err(CoreError::invalid_config(
                    "fleet.min_trip_cells",
                    "could not find a destination far enough from the start",
                ));
            }
            let c = map.cell_center(rng.gen_range(0..cx), rng.gen_range(0..cy));
            if !cell_inside_wall(map, c) && manhattan_cells(map, start, c) >= min_trip_cells {
                break c;
            }
        };
        starts.push(start);
        dests.push(dest);
    }
    Ok((starts, dests))
}

impl RawConfig {
    /// Validates every section and resolves derived values (watt
    /// conversions, default ρ_min, random placements).
    pub fn resolve(&self) -> Result<SimConfig, CoreError> {
        let map = build_map(&self.map)?;
        let k = self.fleet.count;
        if k == 0 {
            return Err(CoreError::invalid_config("fleet.count", "must be ≥ 1"));
        }
        if self.fleet.t_max == 0 {
            return Err(CoreError::invalid_config("fleet.t_max", "must be ≥ 1"));
        }
        if self.run.episodes == 0 {
            return Err(CoreError::invalid_config("run.episodes", "must be ≥ 1"));
        }

        // Placement: explicit lists or the seeded generator.
        let min_trip_default = (map.cells_x() + map.cells_y()).div_ceil(4);
        let max_trip = map.cells_x() + map.cells_y() - 2;
        let min_trip = self
            .fleet
            .min_trip_cells
            .unwrap_or(min_trip_default)
            .min(max_trip)
            .max(1);
        let (starts, destinations) = match (&self.fleet.starts, &self.fleet.destinations) {
            (Some(s), Some(d)) => {
                if s.len() != k || d.len() != k {
                    return Err(CoreError::invalid_config(
                        "fleet.starts",
                        format!("starts and destinations must each list {k} robots"),
                    ));
                }
                let snap_all = |pts: &[[f64; 2]], field: &str| -> Result<Vec<[f64; 2]>, CoreError> {
                    pts.iter()
                        .map(|&p| {
                            let c = snap_to_grid(p, &map).map_err(|e| {
                                CoreError::invalid_config(field, e.to_string())
                            })?;
                            if cell_inside_wall(&map, c) {
                                return Err(CoreError::invalid_config(
                                    field,
                                    format!("cell at ({}, {}) lies inside a wall", c[0], c[1]),
                                ));
                            }
                            Ok(c)
                        })
                        .collect()
                };
                let s = snap_all(s, "fleet.starts")?;
                let d = snap_all(d, "fleet.destinations")?;
                for (i, (a, b)) in s.iter().zip(&d).enumerate() {
                    if a == b {
                        return Err(CoreError::invalid_config(
                            "fleet.destinations",
                            format!("robot {i} starts at its destination"),
                        ));
                    }
                }
                (s, d)
            }
            (None, None) => generate_placements(&map, k, min_trip, self.run.seed)?,
            _ => {
                return Err(CoreError::invalid_config(
                    "fleet.starts",
                    "starts and destinations must be given together or both omitted",
                ));
            }
        };

        self.channel.validate()?;
        let ris = RisConfig::new(
            self.ris.elements_per_side,
            self.ris.num_subsurfaces,
            self.ris.resolution_bits,
        )?;
        let phase_tuples = global_action_count(&ris);
        if phase_tuples > self.run.action_space_cap {
            return Err(CoreError::invalid_config(
                "ris.num_subsurfaces",
                format!(
                    "phase-tuple count {phase_tuples} exceeds run.action_space_cap ({})",
                    self.run.action_space_cap
                ),
            ));
        }

        let sigma2 = self.channel.noise_power_w();
        let rho_min_defaulted = self.power.rho_min_dbm.is_none();
        let power = PowerConfig {
            p_max_w: dbm_to_watts(self.power.p_max_dbm),
            num_levels: self.power.num_levels,
            rho_min_w: self
                .power
                .rho_min_dbm
                .map(dbm_to_watts)
                .unwrap_or(sigma2),
        };
        power.validate(k)?;

        self.reward.validate()?;
        self.observation.validate()?;
        self.train_section_validate()?;
        let energy = EnergyModel {
            e1: self.energy.e1,
            e2: self.energy.e2,
            speed: self.fleet.speed,
        };
        energy.validate()?;
        let federation = FederationConfig {
            sync_period: self.federation.sync_period,
            participants: k,
        };
        federation.validate()?;

        // Echo copy with generated and defaulted values written out.
        let mut echo = self.clone();
        echo.fleet.starts = Some(starts.clone());
        echo.fleet.destinations = Some(destinations.clone());
        echo.fleet.min_trip_cells = Some(min_trip);
        echo.power.rho_min_dbm = Some(watts_to_dbm(power.rho_min_w));

        Ok(SimConfig {
            map,
            num_robots: k,
            starts,
            destinations,
            t_max: self.fleet.t_max,
            energy,
            channel: self.channel.clone(),
            ris,
            power,
            reward: self.reward.clone(),
            observation: self.observation.clone(),
            train_local: self.training.local.clone(),
            train_global: self.training.global.clone(),
            train_central: self.training.central.clone(),
            federation,
            episodes: self.run.episodes,
            eval_episodes: self.run.eval_episodes,
            seed: self.run.seed,
            algorithm: self.run.algorithm,
            out_dir: self.run.out_dir.as_ref().map(PathBuf::from),
            action_space_cap: self.run.action_space_cap,
            rho_min_defaulted,
            echo,
        })
    }

    fn train_section_validate(&self) -> Result<(), CoreError> {
        self.training.local.validate("training.local")?;
        self.training.global.validate("training.global")?;
        self.training.central.validate("training.central")?;
        Ok(())
    }
}

/// Loads and resolves a config file.
pub fn load_config(path: &Path) -> Result<SimConfig, CoreError> {
    load_raw(path)?.resolve()
}

impl SimConfig {
    /// Quantized phase values available to each sub-surface.
    pub fn phase_set(&self) -> Vec<f64> {
        quantized_phase_set(self.ris.resolution_bits).expect("validated resolution")
    }

    pub fn noise_power_w(&self) -> f64 {
        self.channel.noise_power_w()
    }
}
