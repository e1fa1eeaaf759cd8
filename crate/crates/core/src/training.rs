//! Two-stage learning protocol: offline collection and pretraining driven
//! by fixed timetables, then online epsilon-greedy control with periodic
//! network updates from the memory palace.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Env, RewardBreakdown};
use crate::nn::OptimizerConfig;
use crate::qnet::{epsilon_greedy, td_targets, PhaseGateQNet, QNetError};
use crate::replay::{Experience, ReplayError, ReplayPalace};
use crate::sim::Phase;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    QNet(#[from] QNetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("offline pretraining needs at least one timetable")]
    NoTimetables,
}

/// Fixed signal timetable: alternating green durations starting from
/// `initial_phase` at local time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timetable {
    pub ns_green: u32,
    pub we_green: u32,
    pub initial_phase: Phase,
}

impl Timetable {
    pub fn cycle(&self) -> u32 {
        self.ns_green + self.we_green
    }

    fn first_green(&self) -> u32 {
        match self.initial_phase {
            Phase::NS => self.ns_green,
            Phase::WE => self.we_green,
        }
    }
}

/// The phase the timetable prescribes at local time `t` (seconds since the
/// timetable's own start).
pub fn timetable_phase(tt: &Timetable, t: f64) -> Phase {
    debug_assert!(t >= 0.0);
    let m = t.round() as u64 % tt.cycle() as u64;
    if m < tt.first_green() as u64 {
        tt.initial_phase
    } else {
        tt.initial_phase.next()
    }
}

/// Change whenever the running phase disagrees with the timetable at `t`,
/// Keep otherwise. Boundaries that fall between decision instants take
/// effect at the next one, so any cycle length works with any step size.
pub fn timetable_action(tt: &Timetable, t: f64, current: Phase) -> Action {
    if timetable_phase(tt, t) == current {
        Action::Keep
    } else {
        Action::Change
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Decision step, seconds.
    pub dt: f64,
    /// Seconds between network updates.
    pub update_interval_s: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub offline_hours: f64,
    pub total_hours: f64,
    pub offline_epochs: usize,
    pub replay_capacity: usize,
    /// Positive factor applied to rewards in TD targets so Q values live
    /// at a scale the optimizer handles; greedy choices are unaffected.
    pub reward_scale: f64,
    /// Constant added to rewards before scaling; centers the typical
    /// steady-state reward near zero. Greedy choices are unaffected.
    pub reward_shift: f64,
    /// During pretraining, recompute TD targets from a frozen snapshot of
    /// the network every this many epochs (fitted-Q iteration). 0 keeps
    /// the moving-target behaviour (targets from the live network).
    pub target_refresh_epochs: usize,
    pub optimizer: OptimizerConfig,
    /// Learning rate for online updates; `None` reuses the offline rate.
    /// Online data is narrow (one policy, one traffic regime at a time), so
    /// the stable online rate is well below the pretraining rate.
    pub online_learning_rate: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dt: 5.0,
            update_interval_s: 300.0,
            gamma: 0.8,
            epsilon: 0.05,
            batch_size: 300,
            offline_hours: 2.0,
            total_hours: 20.0,
            offline_epochs: 200,
            replay_capacity: 1000,
            reward_scale: 1.0,
            reward_shift: 0.0,
            target_refresh_epochs: 0,
            optimizer: OptimizerConfig::default(),
            online_learning_rate: Some(0.01),
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn update_every_steps(&self) -> u64 {
        (self.update_interval_s / self.dt).round() as u64
    }

    pub fn online_hours(&self) -> f64 {
        self.total_hours - self.offline_hours
    }

    /// Optimizer used by the online loop.
    pub fn online_optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self
                .online_learning_rate
                .unwrap_or(self.optimizer.learning_rate),
            ..self.optimizer
        }
    }
}

/// One simulated decision step as logged to steps.csv.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub time_s: f64,
    pub phase: Phase,
    pub action: Action,
    pub reward: RewardBreakdown,
    /// Vehicles in the network after the step.
    pub vehicles: u64,
    /// Pre-update loss, present on update steps only.
    pub loss: Option<f64>,
}

/// Default offline timetable set: symmetric and asymmetric splits so all
/// four phase-action replay cells get populated. The long-cycle entries
/// matter: they are the only offline coverage of "hold the phase while the
/// cross queue builds", without which the fitted Q never learns what
/// over-holding costs and the greedy policy refuses to change phase.
/// The short-cycle entries cover the opposite regime: rapid alternation
/// that keeps queues creeping instead of standing, which is where the
/// stop-duration wait metric is lowest. The long-cycle entries appear a
/// second time at the end so they carry double weight and close out the
/// stream: over-holding is the rarest regime in on-policy data and the
/// easiest lesson for a short pretraining pass to wash out.
pub fn default_offline_timetables() -> Vec<Timetable> {
    [
        (10, 10),
        (20, 20),
        (30, 30),
        (20, 10),
        (10, 20),
        (60, 60),
        (90, 30),
        (30, 90),
        (5, 5),
        (5, 15),
        (15, 5),
        (60, 60),
        (90, 30),
        (30, 90),
    ]
        .iter()
        .map(|&(ns, we)| Timetable {
            ns_green: ns,
            we_green: we,
            initial_phase: Phase::WE,
        })
        .collect()
}

/// Drives the environment with a timetable for `steps` steps, recording
/// one experience and one step record per step. Does not train.
pub fn drive_timetable(
    env: &mut Env,
    tt: &Timetable,
    steps: u64,
    step_offset: u64,
    experiences: &mut Vec<Experience>,
    records: &mut Vec<StepRecord>,
) {
    if env.state.current_phase != tt.initial_phase {
        env.state.switch_phase();
    }
    for i in 0..steps {
        let local_t = i as f64 * env.dt;
        let action = timetable_action(tt, local_t, env.state.current_phase);
        let state = env.observe();
        let phase = state.current_phase;
        let (next_state, reward) = env.step(action);
        experiences.push(Experience {
            state,
            action,
            reward: reward.total,
            next_state,
            phase,
        });
        records.push(StepRecord {
            step: step_offset + i,
            time_s: env.state.clock,
            phase,
            action,
            reward,
            vehicles: env.state.vehicles_inside(),
            loss: None,
        });
    }
}

pub struct OfflineResult {
    pub experiences: Vec<Experience>,
    pub records: Vec<StepRecord>,
    pub epoch_losses: Vec<f64>,
}

/// Collects experiences under each timetable (equal time slices of the
/// offline window), stores them in the palace, then pretrains the network
/// with balanced batches for `offline_epochs` passes.
pub fn offline_pretrain(
    env: &mut Env,
    timetables: &[Timetable],
    net: &mut PhaseGateQNet,
    palace: &mut ReplayPalace,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<OfflineResult, TrainError> {
    if timetables.is_empty() {
        return Err(TrainError::NoTimetables);
    }
    let total_steps = (cfg.offline_hours * 3600.0 / cfg.dt).round() as u64;
    let per_tt = total_steps / timetables.len() as u64;
    let mut experiences = Vec::with_capacity(total_steps as usize);
    let mut records = Vec::with_capacity(total_steps as usize);
    for (k, tt) in timetables.iter().enumerate() {
        // the last slice absorbs the rounding remainder
        let steps = if k + 1 == timetables.len() {
            total_steps - per_tt * (timetables.len() as u64 - 1)
        } else {
            per_tt
        };
        drive_timetable(env, tt, steps, records.len() as u64, &mut experiences, &mut records);
    }
    for e in &experiences {
        palace.store(e.clone());
    }
    let epoch_losses = pretrain_epochs(net, palace, cfg, experiences.len(), rng)?;
    Ok(OfflineResult {
        experiences,
        records,
        epoch_losses,
    })
}

/// Balanced-batch training passes over the collected offline samples.
pub fn pretrain_epochs(
    net: &mut PhaseGateQNet,
    palace: &ReplayPalace,
    cfg: &TrainConfig,
    sample_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, TrainError> {
    let batches_per_epoch = (sample_count / cfg.batch_size).max(1);
    let mut losses = Vec::with_capacity(cfg.offline_epochs);
    let mut target_net = (cfg.target_refresh_epochs > 0).then(|| net.clone());
    for epoch in 0..cfg.offline_epochs {
        if let Some(frozen) = &mut target_net {
            if epoch % cfg.target_refresh_epochs == 0 {
                *frozen = net.clone();
            }
        }
        let mut epoch_loss = 0.0;
        for _ in 0..batches_per_epoch {
            let batch = palace.sample_balanced(cfg.batch_size, rng)?;
            let bootstrap = target_net.as_ref().unwrap_or(net);
            let targets =
                td_targets(&batch, bootstrap, cfg.gamma, cfg.reward_scale, cfg.reward_shift)
                    .map_err(QNetError::from)?;
            epoch_loss += net.train_batch(&batch, &targets, &cfg.optimizer)?;
        }
        losses.push(epoch_loss / batches_per_epoch as f64);
    }
    Ok(losses)
}

/// Online epsilon-greedy control loop. One stored experience per step, one
/// network update every `update_interval_s`. `on_hour` fires at each
/// simulated-hour boundary (for checkpointing).
pub fn online_train(
    env: &mut Env,
    net: &mut PhaseGateQNet,
    palace: &mut ReplayPalace,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    step_offset: u64,
    mut on_hour: impl FnMut(u64, &PhaseGateQNet),
) -> Result<Vec<StepRecord>, TrainError> {
    let steps = (cfg.online_hours() * 3600.0 / cfg.dt).round() as u64;
    let update_every = cfg.update_every_steps();
    let steps_per_hour = (3600.0 / cfg.dt).round() as u64;
    let mut records = Vec::with_capacity(steps as usize);
    for i in 0..steps {
        let state = env.observe();
        let phase = state.current_phase;
        let q = net.q_values(&state).map_err(QNetError::from)?;
        let action = epsilon_greedy(q, cfg.epsilon, rng);
        let (next_state, reward) = env.step(action);
        palace.store(Experience {
            state,
            action,
            reward: reward.total,
            next_state,
            phase,
        });
        let mut loss = None;
        if (i + 1) % update_every == 0 {
            assert!(!palace.is_empty(), "first update fires after stores");
            let batch = palace.sample_balanced(cfg.batch_size, rng)?;
            let targets =
                td_targets(&batch, net, cfg.gamma, cfg.reward_scale, cfg.reward_shift).map_err(QNetError::from)?;
            loss = Some(net.train_batch(&batch, &targets, &cfg.online_optimizer())?);
        }
        records.push(StepRecord {
            step: step_offset + i,
            time_s: env.state.clock,
            phase,
            action,
            reward,
            vehicles: env.state.vehicles_inside(),
            loss,
        });
        if (i + 1) % steps_per_hour == 0 {
            on_hour((i + 1) / steps_per_hour, net);
        }
    }
    Ok(records)
}
