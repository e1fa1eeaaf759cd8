use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use traffic_rl::harness::{
    compare, comparison_csv, comparison_table, fixed_plan_for, load_report, load_scenario,
    run_fixed_baseline, run_rl, summary_text, write_run_outputs, RunConfig,
};

#[derive(Parser)]
#[command(name = "traffic-rl", about = "Adaptive traffic-light control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the RL controller on a scenario and write run outputs.
    Train {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the fixed-plan baseline for a scenario.
    Baseline {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the hourly metrics and run-level means of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Compare an RL run directory against a fixed-plan run directory.
    Compare {
        #[arg(long)]
        rl: PathBuf,
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train {
            scenario,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(&config)?;
            let spec = load_scenario(&scenario)?;
            eprintln!(
                "training on `{}` for {} h (seed {seed})",
                spec.name, spec.total_hours
            );
            let run = run_rl(&spec, &cfg, seed, Some(&out))?;
            write_run_outputs(&out, &run.report, &run.records, seed)?;
            print!("{}", summary_text(&run.report, seed));
        }
        Command::Baseline {
            scenario,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(&config)?;
            let spec = load_scenario(&scenario)?;
            let plan = fixed_plan_for(&spec.name)?;
            eprintln!(
                "fixed plan WE={} NS={} on `{}` for {} h (seed {seed})",
                plan.we_green, plan.ns_green, spec.name, spec.total_hours
            );
            let (report, records) = run_fixed_baseline(&spec, &plan, &cfg, seed)?;
            write_run_outputs(&out, &report, &records, seed)?;
            print!("{}", summary_text(&report, seed));
        }
        Command::Report { run } => {
            let report = load_report(&run)?;
            let csv = std::fs::read_to_string(run.join("metrics.csv"))?;
            print!("{csv}");
            print!("{}", summary_text(&report, 0));
        }
        Command::Compare { rl, fixed, out } => {
            let rl_report = load_report(&rl)?;
            let fixed_report = load_report(&fixed)?;
            let cmp = compare(&rl_report, &fixed_report)?;
            print!("{}", comparison_table(&cmp));
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                std::fs::write(out.join("comparison.csv"), comparison_csv(&cmp))?;
            }
        }
    }
    Ok(())
}
