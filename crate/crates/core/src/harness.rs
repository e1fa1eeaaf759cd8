//! Experiment harness: scenario definitions, fixed-plan baselines, hourly
//! metric aggregation, comparison reports, and run output files.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Env, RewardWeights};
use crate::qnet::{PhaseGateQNet, QNetConfig};
use crate::replay::ReplayPalace;
use crate::sim::{
    build_intersection, ArrivalSchedule, Direction, Layout, Phase, ScheduleEntry, NUM_LANES,
};
use crate::training::{
    default_offline_timetables, drive_timetable, offline_pretrain, online_train, StepRecord,
    Timetable, TrainConfig, TrainError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown scenario `{0}` (known: balanced, imbalanced, switch, hangzhou)")]
    UnknownScenario(String),
    #[error("malformed scenario: {0}")]
    BadScenario(String),
    #[error("horizon mismatch: {0} vs {1} hourly rows")]
    HorizonMismatch(usize, usize),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub arrivals: ArrivalSchedule,
    pub total_hours: f64,
}

fn axis_entries(we_rate: f64, ns_rate: f64, start_h: f64, end_h: f64) -> Vec<ScheduleEntry> {
    // a table row for an axis applies to each of its two approaches
    [
        (Direction::East, we_rate),
        (Direction::West, we_rate),
        (Direction::North, ns_rate),
        (Direction::South, ns_rate),
    ]
    .iter()
    .filter(|(_, rate)| *rate > 0.0)
    .map(|&(direction, rate)| ScheduleEntry {
        direction,
        rate,
        start_h,
        end_h,
    })
    .collect()
}

/// Built-in scenarios with their published arrival rates, or a JSON file
/// with a `ScenarioSpec`.
pub fn load_scenario(name_or_path: &str) -> Result<ScenarioSpec, HarnessError> {
    let built_in = |name: &str, entries: Vec<ScheduleEntry>| ScenarioSpec {
        name: name.to_string(),
        arrivals: ArrivalSchedule { entries },
        total_hours: 20.0,
    };
    match name_or_path {
        "balanced" => Ok(built_in("balanced", axis_entries(720.0, 720.0, 0.0, 20.0))),
        "imbalanced" => Ok(built_in(
            "imbalanced",
            axis_entries(1440.0, 240.0, 0.0, 20.0),
        )),
        "switch" => {
            let mut entries = axis_entries(1440.0, 0.0, 0.0, 10.0);
            entries.extend(axis_entries(0.0, 1440.0, 10.0, 20.0));
            Ok(built_in("switch", entries))
        }
        "hangzhou" => Ok(built_in("hangzhou", axis_entries(716.0, 1132.0, 0.0, 20.0))),
        other => {
            let path = Path::new(other);
            if !path.exists() {
                return Err(HarnessError::UnknownScenario(other.to_string()));
            }
            let spec: ScenarioSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
            validate_scenario(&spec)?;
            Ok(spec)
        }
    }
}

fn validate_scenario(spec: &ScenarioSpec) -> Result<(), HarnessError> {
    if spec.total_hours <= 0.0 {
        return Err(HarnessError::BadScenario("total_hours must be > 0".into()));
    }
    for e in &spec.arrivals.entries {
        if e.rate < 0.0 {
            return Err(HarnessError::BadScenario(format!(
                "negative rate {}",
                e.rate
            )));
        }
        if e.start_h >= e.end_h {
            return Err(HarnessError::BadScenario(format!(
                "window {}..{} is empty",
                e.start_h, e.end_h
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPlan {
    pub we_green: u32,
    pub ns_green: u32,
    pub cycle: u32,
}

/// Webster-derived plans, consumed as published constants.
pub fn fixed_plan_for(name: &str) -> Result<FixedPlan, HarnessError> {
    let plan = |we_green, ns_green| FixedPlan {
        we_green,
        ns_green,
        cycle: we_green + ns_green,
    };
    match name {
        "balanced" => Ok(plan(18, 18)),
        "imbalanced" => Ok(plan(33, 6)),
        "switch" => Ok(plan(28, 28)),
        "hangzhou" => Ok(plan(16, 25)),
        other => Err(HarnessError::UnknownScenario(other.to_string())),
    }
}

impl FixedPlan {
    pub fn timetable(&self) -> Timetable {
        Timetable {
            ns_green: self.ns_green,
            we_green: self.we_green,
            initial_phase: Phase::WE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourRow {
    pub hour: u32,
    pub wait_s: f64,
    pub travel_s: f64,
    pub queue: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeans {
    pub wait_s: f64,
    pub travel_s: f64,
    pub queue: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub rows: Vec<HourRow>,
    /// First hour included in the headline means (skips RL offline hours).
    pub headline_start_hour: u32,
    pub headline: RunMeans,
    /// Vehicles that completed their trip within the horizon.
    pub completed: u64,
    /// Vehicles still in the network (or deferred) at the end.
    pub stragglers: u64,
}

struct MetricAccum {
    wait_sum: f64,
    vehicle_steps: f64,
    travel_sum: f64,
    completed: u64,
    queue_sum: f64,
    reward_sum: f64,
    steps: u64,
}

impl MetricAccum {
    fn new() -> Self {
        MetricAccum {
            wait_sum: 0.0,
            vehicle_steps: 0.0,
            travel_sum: 0.0,
            completed: 0,
            queue_sum: 0.0,
            reward_sum: 0.0,
            steps: 0,
        }
    }

    fn push(&mut self, r: &StepRecord) {
        self.wait_sum += r.reward.sum_wait;
        self.vehicle_steps += r.vehicles as f64;
        self.travel_sum += r.reward.passed_travel_time;
        self.completed += r.reward.passed_count;
        self.queue_sum += r.reward.sum_queue;
        self.reward_sum += r.reward.total;
        self.steps += 1;
    }

    fn means(&self) -> RunMeans {
        let div = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        RunMeans {
            wait_s: div(self.wait_sum, self.vehicle_steps),
            travel_s: div(self.travel_sum, self.completed as f64),
            queue: div(self.queue_sum, (self.steps * NUM_LANES as u64) as f64),
            reward: div(self.reward_sum, self.steps as f64),
        }
    }
}

/// Hourly aggregation of a step log.
///
/// avg wait is per vehicle-step, avg travel time is per completed vehicle,
/// avg queue is per lane-step, avg reward is per step.
pub fn aggregate_metrics(
    scenario: &str,
    records: &[StepRecord],
    dt: f64,
    headline_start_hour: u32,
    stragglers: u64,
) -> MetricsReport {
    let steps_per_hour = (3600.0 / dt).round() as usize;
    let mut rows = Vec::new();
    let mut headline = MetricAccum::new();
    let mut completed = 0;
    for (hour, chunk) in records.chunks(steps_per_hour).enumerate() {
        let mut acc = MetricAccum::new();
        for r in chunk {
            acc.push(r);
            if hour as u32 >= headline_start_hour {
                headline.push(r);
            }
        }
        completed += acc.completed;
        let m = acc.means();
        rows.push(HourRow {
            hour: hour as u32,
            wait_s: m.wait_s,
            travel_s: m.travel_s,
            queue: m.queue,
            reward: m.reward,
        });
    }
    MetricsReport {
        scenario: scenario.to_string(),
        rows,
        headline_start_hour,
        headline: headline.means(),
        completed,
        stragglers,
    }
}

/// Everything a run needs, loadable from one JSON file. CLI flags override
/// `scenario` and the training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub training: TrainConfig,
    pub network: QNetConfig,
    pub simulator: Layout,
    pub reward: RewardWeights,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Run horizon: the shorter of the scenario's span and the configured
/// training horizon, so a short config can preview a long scenario.
fn effective_hours(scenario: &ScenarioSpec, cfg: &RunConfig) -> f64 {
    scenario.total_hours.min(cfg.training.total_hours)
}

fn pending_stragglers(env: &Env) -> u64 {
    let backlog: u64 = env.state.lanes.iter().map(|l| l.deferred).sum();
    env.state.vehicles_inside() + backlog
}

fn build_env(
    scenario: &ScenarioSpec,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Env, HarnessError> {
    let state = build_intersection(&cfg.simulator, seed)?;
    let mut env = Env::new(state, scenario.arrivals.clone(), cfg.reward);
    env.grid = cfg.network.grid;
    env.dt = cfg.training.dt;
    Ok(env)
}

/// Drives the scenario with the fixed plan's timetable over the effective
/// horizon (the shorter of the scenario's span and the configured one).
pub fn run_fixed_baseline(
    scenario: &ScenarioSpec,
    plan: &FixedPlan,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(MetricsReport, Vec<StepRecord>), HarnessError> {
    let mut env = build_env(scenario, cfg, seed)?;
    let steps = (effective_hours(scenario, cfg) * 3600.0 / cfg.training.dt).round() as u64;
    let mut experiences = Vec::new();
    let mut records = Vec::new();
    drive_timetable(
        &mut env,
        &plan.timetable(),
        steps,
        0,
        &mut experiences,
        &mut records,
    );
    let stragglers = pending_stragglers(&env);
    let report = aggregate_metrics(&scenario.name, &records, cfg.training.dt, 0, stragglers);
    Ok((report, records))
}

pub struct RlRunOutput {
    pub report: MetricsReport,
    pub records: Vec<StepRecord>,
    pub net: PhaseGateQNet,
}

/// Offline pretrain then online train on the scenario. Headline metrics
/// start after the offline hours. If `out_dir` is given, checkpoints are
/// written there every simulated online hour.
pub fn run_rl(
    scenario: &ScenarioSpec,
    cfg: &RunConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<RlRunOutput, HarnessError> {
    let mut train_cfg = cfg.training;
    train_cfg.seed = seed;
    train_cfg.total_hours = effective_hours(scenario, cfg);
    let mut env = build_env(scenario, cfg, seed)?;
    let mut net = PhaseGateQNet::new(cfg.network, seed.wrapping_add(0x9e37_79b9));
    let mut palace = ReplayPalace::new(train_cfg.replay_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));

    let ckpt_dir = out_dir.map(|d| d.join("checkpoints"));
    if let Some(dir) = &ckpt_dir {
        fs::create_dir_all(dir)?;
    }

    let offline = offline_pretrain(
        &mut env,
        &default_offline_timetables(),
        &mut net,
        &mut palace,
        &train_cfg,
        &mut rng,
    )?;
    if let Some(dir) = &ckpt_dir {
        net.save(&dir.join("pretrained.json"))
            .map_err(TrainError::from)?;
    }

    let mut records = offline.records;
    let step_offset = records.len() as u64;
    let online_records = online_train(
        &mut env,
        &mut net,
        &mut palace,
        &train_cfg,
        &mut rng,
        step_offset,
        |hour, net| {
            if let Some(dir) = &ckpt_dir {
                let _ = net.save(&dir.join(format!("hour_{hour:02}.json")));
            }
        },
    )?;
    records.extend(online_records);

    let stragglers = pending_stragglers(&env);
    let report = aggregate_metrics(
        &scenario.name,
        &records,
        train_cfg.dt,
        train_cfg.offline_hours.ceil() as u32,
        stragglers,
    );
    Ok(RlRunOutput {
        report,
        records,
        net,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub rl: f64,
    pub fixed: f64,
    pub pct_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub rows: Vec<ComparisonRow>,
}

pub fn percent_change(rl: f64, fixed: f64) -> f64 {
    if fixed == 0.0 {
        if rl == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(rl)
        }
    } else {
        (rl - fixed) / fixed * 100.0
    }
}

/// Per-metric percent changes of the RL headline means against the fixed
/// plan's.
pub fn compare(rl: &MetricsReport, fixed: &MetricsReport) -> Result<Comparison, HarnessError> {
    if rl.rows.len() != fixed.rows.len() {
        return Err(HarnessError::HorizonMismatch(
            rl.rows.len(),
            fixed.rows.len(),
        ));
    }
    let pairs = [
        ("wait_s", rl.headline.wait_s, fixed.headline.wait_s),
        ("travel_s", rl.headline.travel_s, fixed.headline.travel_s),
        ("queue", rl.headline.queue, fixed.headline.queue),
        ("reward", rl.headline.reward, fixed.headline.reward),
    ];
    Ok(Comparison {
        scenario: rl.scenario.clone(),
        rows: pairs
            .iter()
            .map(|&(metric, rl, fixed)| ComparisonRow {
                metric: metric.to_string(),
                rl,
                fixed,
                pct_change: percent_change(rl, fixed),
            })
            .collect(),
    })
}

pub fn comparison_table(c: &Comparison) -> String {
    let mut out = format!(
        "scenario: {}\n{:<10} {:>12} {:>12} {:>10}\n",
        c.scenario, "metric", "rl", "fixed", "change"
    );
    for row in &c.rows {
        out.push_str(&format!(
            "{:<10} {:>12.3} {:>12.3} {:>9.1}%\n",
            row.metric, row.rl, row.fixed, row.pct_change
        ));
    }
    out
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = String::from("metric,rl,fixed,pct_change\n");
    for row in &c.rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            row.metric, row.rl, row.fixed, row.pct_change
        ));
    }
    out
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("hour,wait_s,travel_s,queue,reward\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            row.hour, row.wait_s, row.travel_s, row.queue, row.reward
        ));
    }
    out
}

pub fn steps_csv(records: &[StepRecord]) -> String {
    let mut out = String::from("step,sim_time_s,phase,action,reward,loss_if_update\n");
    for r in records {
        let loss = r.loss.map(|l| format!("{l:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.1},{:?},{:?},{:.6},{}\n",
            r.step, r.time_s, r.phase, r.action, r.reward.total, loss
        ));
    }
    out
}

pub fn summary_text(report: &MetricsReport, seed: u64) -> String {
    format!(
        "scenario: {}\nseed: {}\nhours: {}\nheadline from hour: {}\n\
         mean wait (s): {:.3}\nmean travel (s): {:.3}\nmean queue: {:.3}\nmean reward: {:.3}\n\
         completed vehicles: {}\nstragglers: {}\n",
        report.scenario,
        seed,
        report.rows.len(),
        report.headline_start_hour,
        report.headline.wait_s,
        report.headline.travel_s,
        report.headline.queue,
        report.headline.reward,
        report.completed,
        report.stragglers
    )
}

/// Writes metrics.csv, steps.csv, summary.txt, and summary.json to the run
/// directory.
pub fn write_run_outputs(
    dir: &Path,
    report: &MetricsReport,
    records: &[StepRecord],
    seed: u64,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    fs::write(dir.join("steps.csv"), steps_csv(records))?;
    fs::write(dir.join("summary.txt"), summary_text(report, seed))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

pub fn load_report(dir: &Path) -> Result<MetricsReport, HarnessError> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join("summary.json"),
    )?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_match_published_rates() {
        let balanced = load_scenario("balanced").unwrap();
        assert_eq!(balanced.total_hours, 20.0);
        for dir in Direction::ALL {
            assert_eq!(balanced.arrivals.rate_for(dir, 0.0), 720.0);
        }
        let imb = load_scenario("imbalanced").unwrap();
        assert_eq!(imb.arrivals.rate_for(Direction::East, 3600.0), 1440.0);
        assert_eq!(imb.arrivals.rate_for(Direction::North, 3600.0), 240.0);
        let switch = load_scenario("switch").unwrap();
        assert_eq!(switch.arrivals.rate_for(Direction::West, 0.0), 1440.0);
        assert_eq!(switch.arrivals.rate_for(Direction::North, 0.0), 0.0);
        assert_eq!(
            switch.arrivals.rate_for(Direction::West, 10.5 * 3600.0),
            0.0
        );
        assert_eq!(
            switch.arrivals.rate_for(Direction::North, 10.5 * 3600.0),
            1440.0
        );
        let hz = load_scenario("hangzhou").unwrap();
        assert_eq!(hz.arrivals.rate_for(Direction::East, 0.0), 716.0);
        assert_eq!(hz.arrivals.rate_for(Direction::South, 0.0), 1132.0);
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(matches!(
            load_scenario("rush-hour"),
            Err(HarnessError::UnknownScenario(_))
        ));
    }

    #[test]
    fn fixed_plans_match_published_table() {
        let cases = [
            ("balanced", 18, 18, 36),
            ("imbalanced", 33, 6, 39),
            ("switch", 28, 28, 56),
            ("hangzhou", 16, 25, 41),
        ];
        for (name, we, ns, cycle) in cases {
            let plan = fixed_plan_for(name).unwrap();
            assert_eq!(plan.we_green, we);
            assert_eq!(plan.ns_green, ns);
            assert_eq!(plan.cycle, cycle);
            assert_eq!(plan.cycle, plan.we_green + plan.ns_green);
        }
        assert!(fixed_plan_for("webster").is_err());
    }

    #[test]
    fn compare_reproduces_published_percentages() {
        assert!((percent_change(6.2, 14.5) - (-57.24137931034483)).abs() < 1e-9);
        let rounded = (percent_change(6.2, 14.5) * 10.0).round() / 10.0;
        assert_eq!(rounded, -57.2);
        assert_eq!(percent_change(0.0, 80.3), -100.0);
    }

    fn dummy_report(wait: f64, hours: usize) -> MetricsReport {
        MetricsReport {
            scenario: "test".into(),
            rows: (0..hours)
                .map(|h| HourRow {
                    hour: h as u32,
                    wait_s: wait,
                    travel_s: 100.0,
                    queue: 1.0,
                    reward: -1.0,
                })
                .collect(),
            headline_start_hour: 0,
            headline: RunMeans {
                wait_s: wait,
                travel_s: 100.0,
                queue: 1.0,
                reward: -1.0,
            },
            completed: 10,
            stragglers: 0,
        }
    }

    #[test]
    fn compare_identical_reports_is_zero() {
        let r = dummy_report(10.0, 5);
        let c = compare(&r, &r).unwrap();
        assert!(c.rows.iter().all(|row| row.pct_change == 0.0));
    }

    #[test]
    fn compare_is_antisymmetric_in_sign() {
        let a = dummy_report(5.0, 5);
        let b = dummy_report(10.0, 5);
        let ab = compare(&a, &b).unwrap();
        let ba = compare(&b, &a).unwrap();
        assert!(ab.rows[0].pct_change < 0.0);
        assert!(ba.rows[0].pct_change > 0.0);
    }

    #[test]
    fn compare_rejects_horizon_mismatch() {
        let a = dummy_report(5.0, 5);
        let b = dummy_report(5.0, 6);
        assert!(matches!(
            compare(&a, &b),
            Err(HarnessError::HorizonMismatch(5, 6))
        ));
    }

    #[test]
    fn zero_arrival_baseline_is_all_quiet() {
        let scenario = ScenarioSpec {
            name: "quiet".into(),
            arrivals: ArrivalSchedule::default(),
            total_hours: 1.0,
        };
        let plan = fixed_plan_for("balanced").unwrap();
        let cfg = RunConfig::default();
        let (report, _) = run_fixed_baseline(&scenario, &plan, &cfg, 0).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.headline.wait_s, 0.0);
        assert_eq!(report.headline.queue, 0.0);
        assert_eq!(report.completed, 0);
    }

    #[test]
    fn baseline_is_deterministic() {
        let mut scenario = load_scenario("hangzhou").unwrap();
        scenario.total_hours = 1.0;
        let plan = fixed_plan_for("hangzhou").unwrap();
        let cfg = RunConfig::default();
        let (a, _) = run_fixed_baseline(&scenario, &plan, &cfg, 9).unwrap();
        let (b, _) = run_fixed_baseline(&scenario, &plan, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(metrics_csv(&a), metrics_csv(&b));
    }

    #[test]
    fn switch_under_symmetric_plan_accumulates_wait() {
        let mut scenario = load_scenario("switch").unwrap();
        scenario.total_hours = 1.0;
        let plan = fixed_plan_for("switch").unwrap();
        let cfg = RunConfig::default();
        let (report, _) = run_fixed_baseline(&scenario, &plan, &cfg, 1).unwrap();
        assert!(
            report.headline.wait_s > 0.0,
            "half the cycle is wasted green"
        );
    }

    #[test]
    fn metrics_csv_header_is_exact() {
        let r = dummy_report(1.0, 2);
        assert!(metrics_csv(&r).starts_with("hour,wait_s,travel_s,queue,reward\n"));
    }

    #[test]
    fn scenario_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.json");
        let spec = ScenarioSpec {
            name: "custom".into(),
            arrivals: ArrivalSchedule {
                entries: vec![ScheduleEntry {
                    direction: Direction::East,
                    rate: 500.0,
                    start_h: 0.0,
                    end_h: 2.0,
                }],
            },
            total_hours: 2.0,
        };
        fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
        let loaded = load_scenario(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded, spec);
    }

    #[test]
    fn malformed_scenario_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let spec = ScenarioSpec {
            name: "bad".into(),
            arrivals: ArrivalSchedule {
                entries: vec![ScheduleEntry {
                    direction: Direction::East,
                    rate: -5.0,
                    start_h: 0.0,
                    end_h: 2.0,
                }],
            },
            total_hours: 2.0,
        };
        fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
        assert!(matches!(
            load_scenario(path.to_str().unwrap()),
            Err(HarnessError::BadScenario(_))
        ));
    }
}
