//! Agent-facing environment: observations, actions, and the weighted
//! reward over the simulator.

use serde::{Deserialize, Serialize};

use crate::sim::{
    self, advance, lane_snapshot, spawn_arrivals, ArrivalSchedule, ExitEvent, Phase, SimState,
    Snapshot, NUM_LANES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Keep,
    Change,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Keep, Action::Change];

    pub fn index(self) -> usize {
        match self {
            Action::Keep => 0,
            Action::Change => 1,
        }
    }
}

/// Occupancy-grid geometry: the first `range_m` meters of every approach
/// lane rasterized at `cell_m` per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub range_m: f64,
    pub cell_m: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            range_m: 150.0,
            cell_m: 5.0,
        }
    }
}

impl GridConfig {
    pub fn cells_per_lane(&self) -> usize {
        (self.range_m / self.cell_m).ceil() as usize
    }
}

/// The agent's state: per-lane vectors, phase one-hots, and the binary
/// position grid. `latent` is left empty here and produced by the
/// Q-network's convolutional encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub queue: Vec<f64>,
    pub count: Vec<f64>,
    pub wait: Vec<f64>,
    pub current_phase: Phase,
    /// Row-major lane-major grid, `NUM_LANES * cells_per_lane` entries in {0,1}.
    pub grid: Vec<f64>,
    pub latent: Vec<f64>,
}

impl Observation {
    pub fn next_phase(&self) -> Phase {
        self.current_phase.next()
    }

    /// One-hot over [NS, WE].
    pub fn phase_one_hot(phase: Phase) -> [f64; 2] {
        match phase {
            Phase::NS => [1.0, 0.0],
            Phase::WE => [0.0, 1.0],
        }
    }
}

/// Per-factor reward terms and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub sum_delay: f64,
    pub sum_wait: f64,
    pub sum_queue: f64,
    pub change: bool,
    pub passed_count: u64,
    pub passed_travel_time: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub beta5: f64,
    pub beta6: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            beta1: -0.25,
            beta2: -0.25,
            beta3: -0.25,
            beta4: -5.0,
            beta5: -1.0,
            beta6: -1.0,
        }
    }
}

/// d = 1 - avg_speed / speed_limit, in [0, 1].
pub fn compute_delay(avg_speed: f64, speed_limit: f64) -> f64 {
    debug_assert!(speed_limit > 0.0);
    1.0 - avg_speed / speed_limit
}

pub fn compute_reward(
    sum_delay: f64,
    sum_wait: f64,
    sum_queue: f64,
    change: bool,
    passed_count: u64,
    passed_travel_time: f64,
    weights: &RewardWeights,
) -> RewardBreakdown {
    let c = if change { 1.0 } else { 0.0 };
    let total = weights.beta1 * sum_delay
        + weights.beta2 * sum_wait
        + weights.beta3 * sum_queue
        + weights.beta4 * c
        + weights.beta5 * passed_count as f64
        + weights.beta6 * passed_travel_time;
    RewardBreakdown {
        sum_delay,
        sum_wait,
        sum_queue,
        change,
        passed_count,
        passed_travel_time,
        total,
    }
}

/// Binary occupancy grid: one band of cells per lane, cell k set iff some
/// vehicle occupies [k*cell, (k+1)*cell) measured from the stop line.
pub fn rasterize_positions(snapshot: &Snapshot, grid: &GridConfig) -> Vec<f64> {
    let cells = grid.cells_per_lane();
    let mut out = vec![0.0; NUM_LANES * cells];
    for &(lane, position) in &snapshot.positions {
        if position < grid.range_m {
            let cell = (position / grid.cell_m).floor() as usize;
            if cell < cells {
                out[lane * cells + cell] = 1.0;
            }
        }
    }
    out
}

pub fn observation_from(state: &SimState, grid_cfg: &GridConfig) -> Observation {
    let snap = lane_snapshot(state);
    Observation {
        queue: snap.lanes.iter().map(|l| l.queue as f64).collect(),
        count: snap.lanes.iter().map(|l| l.count as f64).collect(),
        wait: snap.lanes.iter().map(|l| l.wait).collect(),
        current_phase: state.current_phase,
        grid: rasterize_positions(&snap, grid_cfg),
        latent: Vec::new(),
    }
}

/// Simulator plus everything needed to close the agent loop.
#[derive(Debug, Clone)]
pub struct Env {
    pub state: SimState,
    pub schedule: ArrivalSchedule,
    pub weights: RewardWeights,
    pub grid: GridConfig,
    pub dt: f64,
}

impl Env {
    pub fn new(state: SimState, schedule: ArrivalSchedule, weights: RewardWeights) -> Self {
        Env {
            state,
            schedule,
            weights,
            grid: GridConfig::default(),
            dt: 5.0,
        }
    }

    pub fn observe(&self) -> Observation {
        observation_from(&self.state, &self.grid)
    }

    /// One decision step: apply the action (a phase change takes effect at
    /// the start of the step), run arrivals and dynamics for `dt`, and
    /// score the resulting state.
    pub fn step(&mut self, action: Action) -> (Observation, RewardBreakdown) {
        let change = action == Action::Change;
        if change {
            self.state.switch_phase();
        }
        spawn_arrivals(&mut self.state, &self.schedule, self.dt);
        let green = self.state.current_phase;
        let exits = advance(&mut self.state, green, self.dt);
        let reward = self.score(change, &exits);
        (self.observe(), reward)
    }

    fn score(&self, change: bool, exits: &[ExitEvent]) -> RewardBreakdown {
        let snap = lane_snapshot(&self.state);
        let sum_delay: f64 = snap
            .lanes
            .iter()
            .map(|l| compute_delay(l.avg_speed, l.speed_limit))
            .sum();
        let sum_wait: f64 = snap.lanes.iter().map(|l| l.wait).sum();
        let sum_queue: f64 = snap.lanes.iter().map(|l| l.queue as f64).sum();
        let passed_travel_time: f64 = exits.iter().map(|e| e.exit_time - e.entry_time).sum();
        compute_reward(
            sum_delay,
            sum_wait,
            sum_queue,
            change,
            exits.len() as u64,
            passed_travel_time,
            &self.weights,
        )
    }
}

pub fn empty_env(seed: u64) -> Env {
    let state = sim::build_intersection(&sim::Layout::default(), seed).unwrap();
    Env::new(state, ArrivalSchedule::default(), RewardWeights::default())
}
