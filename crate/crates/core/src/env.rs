//! Grid-world geometry, robot kinematics, and episode lifecycle.
//!
//! The floor plan is a rectangle discretized into square cells of side
//! `cell_size`; robots occupy cell centers and move one cell per time slot in
//! a cardinal direction. Walls are axis-aligned rectangles that block moves
//! whose path crosses them and attenuate the direct radio link (see the
//! channel module). An episode ends when every robot has reached its
//! destination or the slot deadline expires.

use crate::error::CoreError;

/// Axis-aligned rectangular wall segment, in meters. Zero thickness is
/// allowed (a wall lying exactly on a cell boundary blocks that boundary).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Wall {
    /// Normalizes so that (x0, y0) is the min corner.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Wall {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

/// Rectangular floor plan with grid discretization and mounted radio heads.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Grid cell side length in meters.
    pub cell_size: f64,
    pub walls: Vec<Wall>,
    /// Access-point mount position (x, y, z) in meters.
    pub ap_position: [f64; 3],
    /// Reflecting-surface mount position (x, y, z) in meters.
    pub ris_position: [f64; 3],
}

/// Relative tolerance used when checking that map extents are integer
/// multiples of the cell size.
const GRID_EPS: f64 = 1e-9;

impl GridMap {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        cell_size: f64,
        walls: Vec<Wall>,
        ap_position: [f64; 3],
        ris_position: [f64; 3],
    ) -> Result<Self, CoreError> {
        if !(x_min < x_max) || !(y_min < y_max) {
            return Err(CoreError::invalid_config(
                "map",
                "bounds must satisfy x_min < x_max and y_min < y_max",
            ));
        }
        if !(cell_size > 0.0) {
            return Err(CoreError::invalid_config(
                "map.cell_size",
                "must be > 0",
            ));
        }
        for (span, field) in [(x_max - x_min, "map.x_max"), (y_max - y_min, "map.y_max")] {
            let cells = span / cell_size;
            if (cells - cells.round()).abs() > GRID_EPS * cells.max(1.0) {
                return Err(CoreError::invalid_config(
                    field,
                    "map extent must be an integer multiple of cell_size",
                ));
            }
        }
        let map = GridMap {
            x_min,
            x_max,
            y_min,
            y_max,
            cell_size,
            walls,
            ap_position,
            ris_position,
        };
        for (pos, field) in [(ap_position, "map.ap_position"), (ris_position, "map.ris_position")] {
            if !map.contains([pos[0], pos[1]]) {
                return Err(CoreError::invalid_config(
                    field,
                    "must lie inside or on the map boundary",
                ));
            }
        }
        Ok(map)
    }

    pub fn cells_x(&self) -> usize {
        ((self.x_max - self.x_min) / self.cell_size).round() as usize
    }

    pub fn cells_y(&self) -> usize {
        ((self.y_max - self.y_min) / self.cell_size).round() as usize
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    /// Center of the cell with integer indices (ix, iy), ix in 0..cells_x().
    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.x_min + (ix as f64 + 0.5) * self.cell_size,
            self.y_min + (iy as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Number of distinct wall rectangles the open segment a→b passes
    /// through. Used for both move blocking and penetration loss.
    pub fn walls_crossed(&self, a: [f64; 2], b: [f64; 2]) -> usize {
        self.walls
            .iter()
            .filter(|w| segment_hits_rect(a, b, w))
            .count()
    }
}

/// True when segment a→b intersects the (possibly degenerate) rectangle.
fn segment_hits_rect(a: [f64; 2], b: [f64; 2], w: &Wall) -> bool {
    if w.contains(a) || w.contains(b) {
        return true;
    }
    let corners = [
        [w.x0, w.y0],
        [w.x1, w.y0],
        [w.x1, w.y1],
        [w.x0, w.y1],
    ];
    (0..4).any(|i| segments_intersect(a, b, corners[i], corners[(i + 1) % 4]))
}

fn orient(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
}

fn on_segment(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> bool {
    r[0] >= p[0].min(q[0]) - f64::EPSILON
        && r[0] <= p[0].max(q[0]) + f64::EPSILON
        && r[1] >= p[1].min(q[1]) - f64::EPSILON
        && r[1] <= p[1].max(q[1]) + f64::EPSILON
}

/// Closed-segment intersection test (touching counts as intersecting).
fn segments_intersect(p1: [f64; 2], q1: [f64; 2], p2: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(p2, q2, p1);
    let d2 = orient(p2, q2, q1);
    let d3 = orient(p1, q1, p2);
    let d4 = orient(p1, q1, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p2, q2, p1))
        || (d2 == 0.0 && on_segment(p2, q2, q1))
        || (d3 == 0.0 && on_segment(p1, q1, p2))
        || (d4 == 0.0 && on_segment(p1, q1, q2))
}

/// Cardinal move direction. North is +y, east is +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    North,
    South,
    East,
    West,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::North,
        Orientation::South,
        Orientation::East,
        Orientation::West,
    ];

    pub fn delta(self) -> [f64; 2] {
        match self {
            Orientation::North => [0.0, 1.0],
            Orientation::South => [0.0, -1.0],
            Orientation::East => [1.0, 0.0],
            Orientation::West => [-1.0, 0.0],
        }
    }
}

/// Per-robot kinematic state.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    /// Current position, always a cell center.
    pub position: [f64; 2],
    pub start: [f64; 2],
    pub destination: [f64; 2],
    pub arrived: bool,
    /// Slots this robot has been stepped so far.
    pub elapsed_slots: u32,
    /// Slot count of the finished trip; tracks `elapsed_slots` until arrival,
    /// frozen afterwards.
    pub travel_slots: u32,
    /// Travel speed in m/s (one cell per slot).
    pub speed: f64,
}

impl RobotState {
    /// Places a robot at its (snapped) start cell.
    pub fn new(
        id: usize,
        start: [f64; 2],
        destination: [f64; 2],
        speed: f64,
        map: &GridMap,
    ) -> Result<Self, CoreError> {
        let start = snap_to_grid(start, map)?;
        let destination = snap_to_grid(destination, map)?;
        Ok(RobotState {
            id,
            position: start,
            start,
            destination,
            arrived: positions_equal(start, destination, map.cell_size),
            elapsed_slots: 0,
            travel_slots: 0,
            speed,
        })
    }
}

/// Coordinate-wise equality with a tolerance far below one cell, so that
/// accumulated float error from repeated moves cannot flip the predicate.
fn positions_equal(a: [f64; 2], b: [f64; 2], cell_size: f64) -> bool {
    let tol = cell_size * 1e-6;
    (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol
}

/// Maps a point to the center of the cell containing it.
pub fn snap_to_grid(p: [f64; 2], map: &GridMap) -> Result<[f64; 2], CoreError> {
    if !map.contains(p) {
        return Err(CoreError::Domain(format!(
            "point ({}, {}) outside map bounds",
            p[0], p[1]
        )));
    }
    let d = map.cell_size;
    let cell = |v: f64, lo: f64, n: usize| -> f64 {
        let idx = (((v - lo) / d).floor() as i64).clamp(0, n as i64 - 1);
        lo + (idx as f64 + 0.5) * d
    };
    Ok([
        cell(p[0], map.x_min, map.cells_x()),
        cell(p[1], map.y_min, map.cells_y()),
    ])
}

/// Result of applying one move to a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub robot: RobotState,
    /// True when the requested move was rejected (map edge or wall) and the
    /// robot stayed put. Blocked moves still consume the slot.
    pub blocked: bool,
}

/// Advances a robot one slot in the given direction.
pub fn step_robot(robot: &RobotState, orientation: Orientation, map: &GridMap) -> StepOutcome {
    assert!(!robot.arrived, "step_robot called on an arrived robot");
    let d = orientation.delta();
    let raw = [
        robot.position[0] + d[0] * map.cell_size,
        robot.position[1] + d[1] * map.cell_size,
    ];
    let mut blocked = !map.contains(raw);
    let target = if blocked {
        robot.position
    } else {
        // Snap to kill float drift from repeated +/- cell_size.
        let snapped = snap_to_grid(raw, map).expect("in-bounds point snaps");
        if map.walls_crossed(robot.position, snapped) > 0 {
            blocked = true;
            robot.position
        } else {
            snapped
        }
    };
    let mut next = robot.clone();
    next.position = target;
    next.elapsed_slots += 1;
    next.arrived = positions_equal(target, robot.destination, map.cell_size);
    next.travel_slots = next.elapsed_slots;
    StepOutcome {
        robot: next,
        blocked,
    }
}

/// Euclidean distance from the robot to its destination; zero iff arrived.
pub fn distance_to_destination(robot: &RobotState) -> f64 {
    let dx = robot.position[0] - robot.destination[0];
    let dy = robot.position[1] - robot.destination[1];
    (dx * dx + dy * dy).sqrt()
}

/// Container for one episode of the fleet.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    /// Completed slots.
    pub slot: u32,
    pub robots: Vec<RobotState>,
    pub done: bool,
}

impl EpisodeState {
    pub fn new(robots: Vec<RobotState>) -> Self {
        let done = robots.iter().all(|r| r.arrived);
        EpisodeState {
            slot: 0,
            robots,
            done,
        }
    }
}

/// True iff all robots arrived or the slot deadline has been reached.
pub fn is_terminal(episode: &EpisodeState, t_max: u32) -> bool {
    episode.robots.iter().all(|r| r.arrived) || episode.slot >= t_max
}
