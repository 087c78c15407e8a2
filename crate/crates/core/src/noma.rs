//! Successive-interference-cancellation (SIC) decoding order, feasibility
//! gaps, achievable downlink rates, the orthogonal-access baseline rates,
//! motion energy, and the fleet energy-efficiency objective.
//!
//! Rank conventions: "ordered" slices are aligned with a [`DecodingOrder`],
//! index 0 being the robot with the strongest combined channel. That robot
//! cancels everyone else and sees no interference; weaker robots see the
//! power of all stronger ranks as interference.

use crate::error::CoreError;

/// Transmit power discretization and SIC gap threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    /// Total transmit power budget, watts.
    pub p_max_w: f64,
    /// Number of selectable power levels N_P.
    pub num_levels: usize,
    /// Minimum SIC decoding gap, watts.
    pub rho_min_w: f64,
}

impl PowerConfig {
    /// Validates against the fleet size: the level set must be deep enough
    /// to give every robot a distinct level.
    pub fn validate(&self, num_robots: usize) -> Result<(), CoreError> {
        if !(self.p_max_w > 0.0) {
            return Err(CoreError::invalid_config("power.p_max_dbm", "must be finite"));
        }
        if self.num_levels < num_robots.max(1) {
            return Err(CoreError::invalid_config(
                "power.num_levels",
                format!("must be ≥ the robot count ({num_robots})"),
            ));
        }
        if !(self.rho_min_w > 0.0) {
            return Err(CoreError::invalid_config("power.rho_min_dbm", "must be finite"));
        }
        Ok(())
    }
}

/// Selectable powers `{p_max/2^i : i = 1..num_levels}`, descending.
pub fn power_level_set(cfg: &PowerConfig) -> Vec<f64> {
    (1..=cfg.num_levels)
        .map(|i| cfg.p_max_w / (1u64 << i) as f64)
        .collect()
}

/// Robot indices sorted strongest-first by combined channel gain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder(pub Vec<usize>);

/// Ranks robots by descending |h|²; ties break toward the lower robot index
/// so the order is deterministic.
pub fn decoding_order(combined_gains: &[f64]) -> DecodingOrder {
    let mut idx: Vec<usize> = (0..combined_gains.len()).collect();
    idx.sort_by(|&a, &b| {
        combined_gains[b]
            .partial_cmp(&combined_gains[a])
            .expect("finite gains")
            .then(a.cmp(&b))
    });
    DecodingOrder(idx)
}

/// Decoding gaps Δ for ranks 1..K (0-based): the margin by which rank r's
/// signal exceeds the already-decoded power at the receiver one rank
/// stronger. `Δ[r−1] = p_r·g_{r−1} − (Σ_{i<r} p_i)·g_{r−1}`.
pub fn sic_gaps(gains_ordered: &[f64], powers_ordered: &[f64]) -> Result<Vec<f64>, CoreError> {
    if gains_ordered.len() != powers_ordered.len() {
        return Err(CoreError::Dimension(format!(
            "{} gains vs {} powers",
            gains_ordered.len(),
            powers_ordered.len()
        )));
    }
    let k = gains_ordered.len();
    let mut gaps = Vec::with_capacity(k.saturating_sub(1));
    let mut stronger_sum = 0.0;
    for r in 1..k {
        stronger_sum += powers_ordered[r - 1];
        gaps.push((powers_ordered[r] - stronger_sum) * gains_ordered[r - 1]);
    }
    Ok(gaps)
}

/// True iff every decoding gap clears the threshold (vacuously true for one
/// robot).
pub fn sic_feasible(gaps: &[f64], rho_min_w: f64) -> bool {
    gaps.iter().all(|&g| g >= rho_min_w)
}

/// Per-rank achievable rates in bits/s/Hz under SIC:
/// `R_r = log₂(1 + g_r·p_r / (g_r·Σ_{i<r} p_i + σ²))`.
/// Callers are responsible for checking feasibility first.
pub fn noma_rates(gains_ordered: &[f64], powers_ordered: &[f64], sigma2_w: f64) -> Vec<f64> {
    let mut interference_power = 0.0;
    let mut rates = Vec::with_capacity(gains_ordered.len());
    for (r, (&g, &p)) in gains_ordered.iter().zip(powers_ordered).enumerate() {
        if r > 0 {
            interference_power += powers_ordered[r - 1];
        }
        rates.push((1.0 + g * p / (g * interference_power + sigma2_w)).log2());
    }
    rates
}

/// Orthogonal-access baseline: bandwidth split evenly K ways, so each robot
/// sees 1/K of the band and 1/K of the noise, with no interference:
/// `R_k = (1/K)·log₂(1 + g_k·p_k / (σ²/K))`.
pub fn oma_rates(gains: &[f64], powers: &[f64], sigma2_w: f64, num_robots: usize) -> Vec<f64> {
    let k = num_robots as f64;
    gains
        .iter()
        .zip(powers)
        .map(|(&g, &p)| (1.0 / k) * (1.0 + g * p / (sigma2_w / k)).log2())
        .collect()
}

/// Motion energy parameters: energy = e1·T·v + e2·T over T slots.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub e1: f64,
    pub e2: f64,
    /// Travel speed, m/s.
    pub speed: f64,
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), CoreError> {
        for (v, field) in [
            (self.e1, "energy.e1"),
            (self.e2, "energy.e2"),
            (self.speed, "fleet.speed"),
        ] {
            if !(v > 0.0) {
                return Err(CoreError::invalid_config(field, "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Total motion energy over `travel_slots` slots, joules.
pub fn motion_energy(model: &EnergyModel, travel_slots: u32) -> f64 {
    let t = travel_slots as f64;
    model.e1 * t * model.speed + model.e2 * t
}

/// Fleet energy-efficiency objective: each robot's time-averaged rate over
/// its own trip, divided by its own motion energy, summed over robots.
/// `rate_history[k]` must hold at least `travel_slots[k]` per-slot rates;
/// entries past the trip (after arrival) are ignored.
pub fn energy_efficiency(
    rate_history: &[Vec<f64>],
    energies_j: &[f64],
    travel_slots: &[u32],
) -> Result<f64, CoreError> {
    if rate_history.len() != energies_j.len() || rate_history.len() != travel_slots.len() {
        return Err(CoreError::Dimension(format!(
            "{} histories, {} energies, {} trip lengths",
            rate_history.len(),
            energies_j.len(),
            travel_slots.len()
        )));
    }
    let mut total = 0.0;
    for (k, rates) in rate_history.iter().enumerate() {
        let t = travel_slots[k] as usize;
        if t == 0 {
            continue;
        }
        if !(energies_j[k] > 0.0) {
            return Err(CoreError::Domain(format!(
                "robot {k} has non-positive motion energy"
            )));
        }
        if rates.len() < t {
            return Err(CoreError::Domain(format!(
                "robot {k} has {} logged slots for a {t}-slot trip",
                rates.len()
            )));
        }
        let sum: f64 = rates[..t].iter().sum();
        total += sum / t as f64 / energies_j[k];
    }
    Ok(total)
}
