//! Per-slot metrics CSV: one row per simulated slot with fleet-wide and
//! per-robot columns. Rows carry enough state to recompute the
//! energy-efficiency objective offline, and values are written through
//! `Display`, whose shortest round-trip float form keeps files byte-stable
//! across runs with the same seed.

use crate::error::CoreError;
use crate::noma::{motion_energy, EnergyModel};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Per-robot slice of one metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotMetrics {
    pub x: f64,
    pub y: f64,
    /// Selected power-level index, -1 when the robot no longer transmits.
    pub power_idx: i64,
    pub rate: f64,
    /// Log-experience score; present only for runs that optimize it.
    pub qoe: Option<f64>,
    pub local_reward: f64,
    /// True while the robot is still traveling this slot.
    pub active: bool,
}

/// One CSV row: slot-level fleet columns plus a block per robot.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub episode: u32,
    pub slot: u32,
    /// Encoded phase-tuple index applied this slot.
    pub ris_action: u64,
    pub sic_feasible: bool,
    pub global_reward: f64,
    /// Objective evaluated as if the episode ended after this slot.
    pub objective_cum: f64,
    pub robots: Vec<RobotMetrics>,
}

fn header(num_robots: usize, with_qoe: bool) -> String {
    let mut cols = vec![
        "episode".to_string(),
        "slot".to_string(),
        "ris_action".to_string(),
        "sic_feasible".to_string(),
        "global_reward".to_string(),
        "objective_cum".to_string(),
    ];
    for k in 0..num_robots {
        cols.push(format!("x{k}"));
        cols.push(format!("y{k}"));
        cols.push(format!("power_idx{k}"));
        cols.push(format!("rate{k}"));
        if with_qoe {
            cols.push(format!("qoe{k}"));
        }
        cols.push(format!("local_reward{k}"));
        cols.push(format!("active{k}"));
    }
    cols.join(",")
}

/// Streams metrics rows to a writer, fixing the column layout up front.
pub struct MetricsWriter<W: Write> {
    out: W,
    num_robots: usize,
    with_qoe: bool,
}

impl MetricsWriter<BufWriter<File>> {
    pub fn create(path: &Path, num_robots: usize, with_qoe: bool) -> Result<Self, CoreError> {
        let file = File::create(path)?;
        MetricsWriter::new(BufWriter::new(file), num_robots, with_qoe)
    }
}

impl<W: Write> MetricsWriter<W> {
    /// Writes the header immediately.
    pub fn new(mut out: W, num_robots: usize, with_qoe: bool) -> Result<Self, CoreError> {
        writeln!(out, "{}", header(num_robots, with_qoe))?;
        Ok(MetricsWriter {
            out,
            num_robots,
            with_qoe,
        })
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> Result<(), CoreError> {
        if row.robots.len() != self.num_robots {
            return Err(CoreError::Dimension(format!(
                "metrics row carries {} robots, writer expects {}",
                row.robots.len(),
                self.num_robots
            )));
        }
        let mut line = format!(
            "{},{},{},{},{},{}",
            row.episode,
            row.slot,
            row.ris_action,
            row.sic_feasible as u8,
            row.global_reward,
            row.objective_cum
        );
        for r in &row.robots {
            line.push_str(&format!(",{},{},{},{}", r.x, r.y, r.power_idx, r.rate));
            if self.with_qoe {
                let q = r.qoe.ok_or_else(|| {
                    CoreError::Dimension("metrics row missing qoe column".into())
                })?;
                line.push_str(&format!(",{q}"));
            }
            line.push_str(&format!(",{},{}", r.local_reward, r.active as u8));
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CoreError> {
        self.out.flush()?;
        Ok(())
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, col: &str, line_no: usize) -> Result<T, CoreError> {
    s.parse().map_err(|_| {
        CoreError::Parse(format!("metrics line {line_no}: bad value {s:?} in column {col}"))
    })
}

fn parse_flag(s: &str, col: &str, line_no: usize) -> Result<bool, CoreError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(CoreError::Parse(format!(
            "metrics line {line_no}: flag column {col} must be 0 or 1, got {s:?}"
        ))),
    }
}

/// Parses a metrics CSV produced by [`MetricsWriter`], inferring the robot
/// count and the presence of the experience column from the header.
pub fn read_metrics(text: &str) -> Result<Vec<MetricsRow>, CoreError> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| CoreError::Parse("metrics file is empty".into()))?;
    let with_qoe = head.split(',').any(|c| c == "qoe0");
    let per_robot = if with_qoe { 7 } else { 6 };
    let cols: Vec<&str> = head.split(',').collect();
    if cols.len() < 6 || (cols.len() - 6) % per_robot != 0 {
        return Err(CoreError::Parse(format!(
            "metrics header has {} columns, expected 6 + {per_robot} per robot",
            cols.len()
        )));
    }
    let num_robots = (cols.len() - 6) / per_robot;
    if head != header(num_robots, with_qoe) {
        return Err(CoreError::Parse("metrics header does not match schema".into()));
    }

    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(CoreError::Parse(format!(
                "metrics line {line_no}: {} fields, expected {}",
                f.len(),
                cols.len()
            )));
        }
        let mut robots = Vec::with_capacity(num_robots);
        for k in 0..num_robots {
            let base = 6 + k * per_robot;
            let qoe = if with_qoe {
                Some(parse_field(f[base + 4], "qoe", line_no)?)
            } else {
                None
            };
            let tail = base + per_robot;
            robots.push(RobotMetrics {
                x: parse_field(f[base], "x", line_no)?,
                y: parse_field(f[base + 1], "y", line_no)?,
                power_idx: parse_field(f[base + 2], "power_idx", line_no)?,
                rate: parse_field(f[base + 3], "rate", line_no)?,
                qoe,
                local_reward: parse_field(f[tail - 2], "local_reward", line_no)?,
                active: parse_flag(f[tail - 1], "active", line_no)?,
            });
        }
        rows.push(MetricsRow {
            episode: parse_field(f[0], "episode", line_no)?,
            slot: parse_field(f[1], "slot", line_no)?,
            ris_action: parse_field(f[2], "ris_action", line_no)?,
            sic_feasible: parse_flag(f[3], "sic_feasible", line_no)?,
            global_reward: parse_field(f[4], "global_reward", line_no)?,
            objective_cum: parse_field(f[5], "objective_cum", line_no)?,
            robots,
        });
    }
    Ok(rows)
}

/// Recomputes the final energy-efficiency objective of one episode from its
/// metrics rows alone: a robot's trip length is its count of active slots,
/// its rate average runs over those slots, and motion energy follows from
/// the energy model.
pub fn recompute_objective(
    rows: &[MetricsRow],
    energy: &EnergyModel,
) -> Result<f64, CoreError> {
    let first = rows
        .first()
        .ok_or_else(|| CoreError::Domain("cannot recompute objective of an empty episode".into()))?;
    let episode = first.episode;
    let num_robots = first.robots.len();
    let mut rate_sum = vec![0.0; num_robots];
    let mut slots = vec![0u32; num_robots];
    for row in rows {
        if row.episode != episode {
            return Err(CoreError::Domain(
                "objective recompute expects rows from a single episode".into(),
            ));
        }
        for (k, r) in row.robots.iter().enumerate() {
            if r.active {
                rate_sum[k] += r.rate;
                slots[k] += 1;
            }
        }
    }
    let mut total = 0.0;
    for k in 0..num_robots {
        if slots[k] == 0 {
            continue;
        }
        let mean_rate = rate_sum[k] / slots[k] as f64;
        total += mean_rate / motion_energy(energy, slots[k]);
    }
    Ok(total)
}
