//! Per-slot radio channels: direct access-point→robot link, access-point→
//! surface link, and surface→robot links, plus their combination under a
//! quantized reflection configuration.
//!
//! Model shape: the direct link is Rayleigh faded with a large pathloss
//! exponent and per-wall penetration loss (cluttered floor-level path); the
//! surface-related links are Rician with a small exponent and a deterministic
//! uniform-planar-array line-of-sight component (elevated, near-line-of-sight
//! paths). Fading is redrawn every slot (block fading). All distances are 3D
//! with robots at floor height and radio heads at their mount height.

use crate::env::GridMap;
use crate::error::CoreError;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Reflecting-surface geometry and quantized phase state.
///
/// The surface has `elements_per_side`² elements grouped into
/// `num_subsurfaces` blocks of contiguous (row-major) elements; every block
/// shares one phase drawn from the `2^resolution_bits`-level quantized set.
#[derive(Debug, Clone, PartialEq)]
pub struct RisConfig {
    pub elements_per_side: usize,
    pub num_subsurfaces: usize,
    pub resolution_bits: u32,
    /// One phase per sub-surface, each from `quantized_phase_set`.
    pub phases: Vec<f64>,
}

impl RisConfig {
    pub fn new(
        elements_per_side: usize,
        num_subsurfaces: usize,
        resolution_bits: u32,
    ) -> Result<Self, CoreError> {
        if elements_per_side == 0 {
            return Err(CoreError::invalid_config(
                "ris.elements_per_side",
                "must be ≥ 1",
            ));
        }
        if resolution_bits < 1 {
            return Err(CoreError::invalid_config(
                "ris.resolution_bits",
                "must be ≥ 1",
            ));
        }
        let m = elements_per_side * elements_per_side;
        if num_subsurfaces == 0 || m % num_subsurfaces != 0 {
            return Err(CoreError::invalid_config(
                "ris.num_subsurfaces",
                "must divide the element count",
            ));
        }
        let phases = vec![quantized_phase_set(resolution_bits)?[0]; num_subsurfaces];
        Ok(RisConfig {
            elements_per_side,
            num_subsurfaces,
            resolution_bits,
            phases,
        })
    }

    /// Total element count M.
    pub fn num_elements(&self) -> usize {
        self.elements_per_side * self.elements_per_side
    }

    /// Number of quantized phase levels per sub-surface.
    pub fn num_levels(&self) -> usize {
        1usize << self.resolution_bits
    }

    /// Elements per sub-surface.
    pub fn block_len(&self) -> usize {
        self.num_elements() / self.num_subsurfaces
    }
}

/// Returns the `2^b` quantized phases: odd half-multiples of `2π/2^b`,
/// ascending, all in `[0, 2π)`.
pub fn quantized_phase_set(resolution_bits: u32) -> Result<Vec<f64>, CoreError> {
    if resolution_bits < 1 {
        return Err(CoreError::Domain(
            "phase resolution requires at least 1 bit".into(),
        ));
    }
    let levels = 1usize << resolution_bits;
    let delta = 2.0 * PI / levels as f64;
    Ok((1..=levels)
        .map(|i| (2 * i - 1) as f64 / 2.0 * delta)
        .collect())
}

/// Statistical channel model parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModelConfig {
    pub pathloss_exponent_direct: f64,
    pub pathloss_exponent_ris: f64,
    /// Reference pathloss at 1 m, dB.
    pub reference_loss_db_at_1m: f64,
    /// Rician K-factor (linear) for surface-related links; `f64::INFINITY`
    /// selects the pure line-of-sight limit.
    pub rician_k_factor: f64,
    /// Penetration loss per wall crossed by the direct link, dB.
    pub wall_penetration_loss_db: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        ChannelModelConfig {
            pathloss_exponent_direct: 3.5,
            pathloss_exponent_ris: 2.2,
            reference_loss_db_at_1m: 30.0,
            rician_k_factor: 2.0,
            wall_penetration_loss_db: 10.0,
            noise_psd_dbm_per_hz: -100.0,
            bandwidth_hz: 1.0e7,
        }
    }
}

impl ChannelModelConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (v, field) in [
            (self.pathloss_exponent_direct, "channel.pathloss_exponent_direct"),
            (self.pathloss_exponent_ris, "channel.pathloss_exponent_ris"),
        ] {
            if !(v >= 1.8) {
                return Err(CoreError::invalid_config(field, "must be ≥ 1.8"));
            }
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(CoreError::invalid_config("channel.bandwidth_hz", "must be > 0"));
        }
        if !(self.rician_k_factor >= 0.0) {
            return Err(CoreError::invalid_config(
                "channel.rician_k_factor",
                "must be ≥ 0",
            ));
        }
        if !(self.wall_penetration_loss_db >= 0.0) {
            return Err(CoreError::invalid_config(
                "channel.wall_penetration_loss_db",
                "must be ≥ 0",
            ));
        }
        Ok(())
    }

    /// Thermal noise power over the configured bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_per_hz + 10.0 * self.bandwidth_hz.log10();
        10f64.powf((dbm - 30.0) / 10.0)
    }
}

/// One slot's channel draw for the whole fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct link coefficient per robot.
    pub direct: Vec<Complex64>,
    /// Surface→robot coefficients, one length-M vector per robot.
    pub ris_to_robot: Vec<Vec<Complex64>>,
    /// Access-point→surface coefficients, length M.
    pub ap_to_ris: Vec<Complex64>,
}

/// Amplitude scaling for a power pathloss of `l0 + 10·n·log10(d)` dB.
/// Distances below 1 m are clamped to the reference distance.
pub fn pathloss_amplitude(distance_m: f64, exponent: f64, reference_loss_db: f64) -> f64 {
    let d = distance_m.max(1.0);
    let loss_db = reference_loss_db + 10.0 * exponent * d.log10();
    10f64.powf(-loss_db / 20.0)
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Unit-variance circularly-symmetric complex Gaussian draw.
fn cn01(rng: &mut ChaCha12Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / std::f64::consts::SQRT_2
}

/// Line-of-sight array response of the half-wavelength uniform planar array
/// toward `target`. The panel lies in the y–z plane, elements indexed
/// row-major as `i_v · M_R + i_h` with i_h along +y and i_v along +z.
fn array_response(
    ris_position: [f64; 3],
    target: [f64; 3],
    elements_per_side: usize,
) -> Vec<Complex64> {
    let d = dist3(ris_position, target).max(1e-9);
    let u = (target[1] - ris_position[1]) / d;
    let v = (target[2] - ris_position[2]) / d;
    let mr = elements_per_side;
    let mut out = Vec::with_capacity(mr * mr);
    for iv in 0..mr {
        for ih in 0..mr {
            let phase = PI * (ih as f64 * u + iv as f64 * v);
            out.push(Complex64::from_polar(1.0, phase));
        }
    }
    out
}

/// Draws one slot's fading for every robot. The draw order (surface feed
/// first, then per robot: direct then surface→robot) is part of the
/// determinism contract: consumption per call is fixed at
/// `2M + K·(2 + 2M)` unit normals regardless of robot status.
pub fn sample_channels(
    cfg: &ChannelModelConfig,
    elements_per_side: usize,
    robot_positions: &[[f64; 2]],
    map: &GridMap,
    rng: &mut ChaCha12Rng,
) -> ChannelRealization {
    let m = elements_per_side * elements_per_side;
    let (los_coef, nlos_coef) = if cfg.rician_k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        let k = cfg.rician_k_factor;
        ((k / (1.0 + k)).sqrt(), (1.0 / (1.0 + k)).sqrt())
    };

    // Access point → surface.
    let feed_amp = pathloss_amplitude(
        dist3(map.ap_position, map.ris_position),
        cfg.pathloss_exponent_ris,
        cfg.reference_loss_db_at_1m,
    );
    let feed_los = array_response(map.ris_position, map.ap_position, elements_per_side);
    let ap_to_ris: Vec<Complex64> = (0..m)
        .map(|i| feed_amp * (los_coef * feed_los[i] + nlos_coef * cn01(rng)))
        .collect();

    let mut direct = Vec::with_capacity(robot_positions.len());
    let mut ris_to_robot = Vec::with_capacity(robot_positions.len());
    for &p in robot_positions {
        let p3 = [p[0], p[1], 0.0];

        // Direct link: Rayleigh with per-wall penetration loss.
        let walls = map.walls_crossed([map.ap_position[0], map.ap_position[1]], p);
        let mut amp = pathloss_amplitude(
            dist3(map.ap_position, p3),
            cfg.pathloss_exponent_direct,
            cfg.reference_loss_db_at_1m,
        );
        amp *= 10f64.powf(-(walls as f64 * cfg.wall_penetration_loss_db) / 20.0);
        direct.push(amp * cn01(rng));

        // Surface → robot link: Rician.
        let hop_amp = pathloss_amplitude(
            dist3(map.ris_position, p3),
            cfg.pathloss_exponent_ris,
            cfg.reference_loss_db_at_1m,
        );
        let hop_los = array_response(map.ris_position, p3, elements_per_side);
        ris_to_robot.push(
            (0..m)
                .map(|i| hop_amp * (los_coef * hop_los[i] + nlos_coef * cn01(rng)))
                .collect(),
        );
    }

    ChannelRealization {
        direct,
        ris_to_robot,
        ap_to_ris,
    }
}

/// Combines the three links under the current phase configuration: for each
/// robot, `Σ_m h_k[m]·e^{jθ(m)}·g[m] + h̄_k`, where θ(m) is the phase of the
/// sub-surface owning element m.
pub fn combined_channel(
    re: &ChannelRealization,
    ris: &RisConfig,
) -> Result<Vec<Complex64>, CoreError> {
    let m = ris.num_elements();
    if re.ap_to_ris.len() != m {
        return Err(CoreError::Dimension(format!(
            "feed link has {} entries, surface has {m} elements",
            re.ap_to_ris.len()
        )));
    }
    if ris.phases.len() != ris.num_subsurfaces {
        return Err(CoreError::Dimension(format!(
            "{} phases for {} sub-surfaces",
            ris.phases.len(),
            ris.num_subsurfaces
        )));
    }
    let block = ris.block_len();
    let mut out = Vec::with_capacity(re.direct.len());
    for (k, hk) in re.ris_to_robot.iter().enumerate() {
        if hk.len() != m {
            return Err(CoreError::Dimension(format!(
                "robot {k} surface link has {} entries, expected {m}",
                hk.len()
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (h, g)) in hk.iter().zip(re.ap_to_ris.iter()).enumerate() {
            let theta = ris.phases[i / block];
            acc += h * Complex64::from_polar(1.0, theta) * g;
        }
        out.push(acc + re.direct[k]);
    }
    Ok(out)
}
