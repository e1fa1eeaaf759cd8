//! Discrete-time microsimulator of one four-approach intersection.
//!
//! Point-queue dynamics: vehicles advance toward the stop line at free-flow
//! speed, stack up with a fixed minimum spacing, and discharge from the head
//! of the queue at a saturation headway while their approach has green.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum spacing between queued vehicles (vehicle length + gap), meters.
pub const MIN_SPACING_M: f64 = 7.5;
/// Saturation headway during green, seconds per vehicle per lane.
pub const SATURATION_HEADWAY_S: f64 = 2.0;
/// A vehicle counts as stopped for waiting-time purposes below this speed.
pub const STOP_SPEED_THRESHOLD: f64 = 0.1;

pub const LANES_PER_DIRECTION: usize = 3;
pub const NUM_LANES: usize = 12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("lane geometry must be positive: {0}")]
    BadGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::South,
        Direction::East,
        Direction::West,
    ];

    pub fn index(self) -> usize {
        match self {
            Direction::North => 0,
            Direction::South => 1,
            Direction::East => 2,
            Direction::West => 3,
        }
    }

    /// True if this approach has green under the given phase.
    pub fn served_by(self, phase: Phase) -> bool {
        match phase {
            Phase::NS => matches!(self, Direction::North | Direction::South),
            Phase::WE => matches!(self, Direction::East | Direction::West),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    NS,
    WE,
}

impl Phase {
    pub fn next(self) -> Phase {
        match self {
            Phase::NS => Phase::WE,
            Phase::WE => Phase::NS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u64,
    /// Meters from the stop line.
    pub position: f64,
    /// Speed over the last step, m/s.
    pub speed: f64,
    pub entry_time: f64,
    /// Start of the current stop episode, if stopped.
    pub last_stop_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub direction: Direction,
    /// 0 = rightmost (right+straight), 1 = straight, 2 = leftmost (left).
    pub index: usize,
    pub length: f64,
    pub speed_limit: f64,
    /// Ordered by position ascending: head of queue nearest the stop line.
    pub vehicles: Vec<Vehicle>,
    /// Fractional discharge credit carried between green steps.
    discharge_credit: f64,
    /// Arrivals blocked at the entrance, retried on the next spawn call.
    pub deferred: u64,
}

impl Lane {
    pub fn capacity(&self) -> usize {
        (self.length / MIN_SPACING_M).floor() as usize
    }

    fn has_entry_room(&self) -> bool {
        match self.vehicles.last() {
            Some(v) => v.position <= self.length - MIN_SPACING_M,
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaneGeometry {
    pub length: f64,
    pub speed_limit: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        LaneGeometry {
            length: 150.0,
            speed_limit: 14.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Layout {
    pub lane: LaneGeometry,
    pub initial_phase: Phase,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            lane: LaneGeometry::default(),
            initial_phase: Phase::WE,
        }
    }
}

/// One arrival-rate window for one approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub direction: Direction,
    /// Vehicles per hour.
    pub rate: f64,
    /// Window start, hours.
    pub start_h: f64,
    /// Window end, hours.
    pub end_h: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArrivalSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl ArrivalSchedule {
    pub fn rate_for(&self, direction: Direction, time_s: f64) -> f64 {
        let hour = time_s / 3600.0;
        self.entries
            .iter()
            .filter(|e| e.direction == direction && e.start_h <= hour && hour < e.end_h)
            .map(|e| e.rate)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    pub vehicle_id: u64,
    pub entry_time: f64,
    pub exit_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneSnapshot {
    /// Vehicles with speed exactly zero.
    pub queue: usize,
    /// Total vehicles in the lane.
    pub count: usize,
    /// Sum of current waits of stopped vehicles, seconds.
    pub wait: f64,
    /// Mean vehicle speed; speed limit for an empty lane.
    pub avg_speed: f64,
    pub speed_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub lanes: Vec<LaneSnapshot>,
    /// (lane index, position from stop line) for every vehicle.
    pub positions: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: f64,
    pub lanes: Vec<Lane>,
    pub current_phase: Phase,
    pub phase_elapsed: f64,
    pub entered_total: u64,
    pub exited_total: u64,
    pub deferred_total: u64,
    next_vehicle_id: u64,
    /// Round-robin lane cursor per direction.
    lane_cursor: [usize; 4],
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn vehicles_inside(&self) -> u64 {
        self.lanes.iter().map(|l| l.vehicles.len() as u64).sum()
    }

    pub fn switch_phase(&mut self) {
        self.current_phase = self.current_phase.next();
        self.phase_elapsed = 0.0;
    }
}

pub fn build_intersection(layout: &Layout, seed: u64) -> Result<SimState, SimError> {
    if layout.lane.length <= 0.0 {
        return Err(SimError::BadGeometry(format!(
            "lane length {}",
            layout.lane.length
        )));
    }
    if layout.lane.speed_limit <= 0.0 {
        return Err(SimError::BadGeometry(format!(
            "speed limit {}",
            layout.lane.speed_limit
        )));
    }
    let mut lanes = Vec::with_capacity(NUM_LANES);
    for dir in Direction::ALL {
        for index in 0..LANES_PER_DIRECTION {
            lanes.push(Lane {
                direction: dir,
                index,
                length: layout.lane.length,
                speed_limit: layout.lane.speed_limit,
                vehicles: Vec::new(),
                discharge_credit: 0.0,
                deferred: 0,
            });
        }
    }
    Ok(SimState {
        clock: 0.0,
        lanes,
        current_phase: layout.initial_phase,
        phase_elapsed: 0.0,
        entered_total: 0,
        exited_total: 0,
        deferred_total: 0,
        next_vehicle_id: 0,
        lane_cursor: [0; 4],
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

/// Draws Poisson arrivals for each scheduled approach and inserts them at
/// the lane entrances, round-robin over the approach's three lanes.
/// Arrivals without entry room are deferred to the next call. Returns the
/// number of vehicles actually inserted.
pub fn spawn_arrivals(state: &mut SimState, schedule: &ArrivalSchedule, dt: f64) -> u64 {
    assert!(dt > 0.0);
    let mut spawned = 0;
    for dir in Direction::ALL {
        let rate = schedule.rate_for(dir, state.clock);
        let mean = rate * dt / 3600.0;
        let fresh: u64 = if mean > 0.0 {
            Poisson::new(mean).unwrap().sample(&mut state.rng) as u64
        } else {
            0
        };
        let backlog: u64 = state
            .lanes
            .iter_mut()
            .filter(|l| l.direction == dir)
            .map(|l| std::mem::take(&mut l.deferred))
            .sum();
        let base = dir.index() * LANES_PER_DIRECTION;
        for _ in 0..fresh + backlog {
            let cursor = &mut state.lane_cursor[dir.index()];
            let lane_idx = base + *cursor;
            *cursor = (*cursor + 1) % LANES_PER_DIRECTION;
            let lane = &mut state.lanes[lane_idx];
            if lane.has_entry_room() {
                let id = state.next_vehicle_id;
                state.next_vehicle_id += 1;
                lane.vehicles.push(Vehicle {
                    id,
                    position: lane.length,
                    speed: lane.speed_limit,
                    entry_time: state.clock,
                    last_stop_time: None,
                });
                state.entered_total += 1;
                spawned += 1;
            } else {
                lane.deferred += 1;
                state.deferred_total += 1;
            }
        }
    }
    spawned
}

/// Advances all lanes by `dt`: discharges green-lane queue heads at the
/// saturation headway, then moves every vehicle toward its queue slot at
/// free-flow speed. Advances the clock. Returns exit events.
pub fn advance(state: &mut SimState, green_phase: Phase, dt: f64) -> Vec<ExitEvent> {
    assert!(dt > 0.0);
    let step_end = state.clock + dt;
    let mut exits = Vec::new();
    for lane in &mut state.lanes {
        if lane.direction.served_by(green_phase) {
            lane.discharge_credit += dt / SATURATION_HEADWAY_S;
            // only vehicles that can reach the stop line this step may discharge
            let reach = lane.speed_limit * dt + 1e-9;
            let eligible = lane
                .vehicles
                .iter()
                .take_while(|v| v.position <= reach)
                .count();
            let n = (lane.discharge_credit.floor() as usize).min(eligible);
            for v in lane.vehicles.drain(..n) {
                exits.push(ExitEvent {
                    vehicle_id: v.id,
                    entry_time: v.entry_time,
                    exit_time: step_end,
                });
            }
            if n == eligible {
                // capacity went unused for lack of demand; it does not bank
                lane.discharge_credit = 0.0;
            } else {
                lane.discharge_credit -= n as f64;
            }
            state.exited_total += n as u64;
        } else {
            // start-up loss: no credit accrues across red
            lane.discharge_credit = 0.0;
        }
        // free-flow advance, clamped to queue slots spaced MIN_SPACING_M apart
        let mut floor_pos = 0.0_f64;
        for (slot, v) in lane.vehicles.iter_mut().enumerate() {
            let target = floor_pos.max(slot as f64 * MIN_SPACING_M);
            let new_pos = (v.position - lane.speed_limit * dt).max(target);
            let moved = v.position - new_pos;
            v.speed = moved / dt;
            v.position = new_pos;
            if v.speed < STOP_SPEED_THRESHOLD {
                if v.last_stop_time.is_none() {
                    v.last_stop_time = Some(step_end);
                }
            } else {
                v.last_stop_time = None;
            }
            floor_pos = new_pos + MIN_SPACING_M;
        }
    }
    state.clock = step_end;
    state.phase_elapsed += dt;
    exits
}

pub fn lane_snapshot(state: &SimState) -> Snapshot {
    let now = state.clock;
    let mut lanes = Vec::with_capacity(state.lanes.len());
    let mut positions = Vec::new();
    for (idx, lane) in state.lanes.iter().enumerate() {
        let count = lane.vehicles.len();
        let queue = lane.vehicles.iter().filter(|v| v.speed == 0.0).count();
        let wait: f64 = lane
            .vehicles
            .iter()
            .filter_map(|v| v.last_stop_time.map(|t| now - t))
            .sum();
        let avg_speed = if count == 0 {
            lane.speed_limit
        } else {
            lane.vehicles.iter().map(|v| v.speed).sum::<f64>() / count as f64
        };
        lanes.push(LaneSnapshot {
            queue,
            count,
            wait,
            avg_speed,
            speed_limit: lane.speed_limit,
        });
        for v in &lane.vehicles {
            positions.push((idx, v.position));
        }
    }
    Snapshot { lanes, positions }
}
