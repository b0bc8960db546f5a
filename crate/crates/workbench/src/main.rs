use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use predfeed_core::delay::PerturbationMetrics;
use predfeed_core::simulator::{simulate, sweep};
use predfeed_workbench::config::Overrides;
use predfeed_workbench::report::{self, write_report, DEFAULT_WINDOW, DEFAULT_WINDOW_START, FEASIBILITY_C};
use predfeed_workbench::{export_csv, scenario, Scenario, ScenarioId, WorkbenchError};
use serde::Serialize;

/// Predictor-feedback simulations under perturbed input delays.
#[derive(Parser)]
#[command(name = "predfeed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    Sup,
    L1,
    Vanishing,
    MovingAvg,
    Feasibility,
}

#[derive(clap::Args)]
struct Common {
    /// dc-motor, teleop or linear-scalar
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum, default_value = "on")]
    perturbation: OnOff,
    /// Configuration file of key=value lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting; may repeat, wins over --config
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV, SVG plots and a JSON report
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test the scenario's delay perturbation against one smallness condition
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        criterion: Criterion,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        delta_window: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW_START)]
        delta_start: f64,
        /// Pass threshold; defaults: sup 0.5, l1 2.5, vanishing 1e-2, moving-avg 0.1
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run one scenario per parameter value, in parallel
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit status: pass, assertion failure, configuration error, runtime fault.
enum Status {
    Pass,
    Fail,
    Config(anyhow::Error),
    Fault(anyhow::Error),
}

fn build(common: &Common) -> Result<Scenario, anyhow::Error> {
    let id: ScenarioId = common.scenario.parse()?;
    let mut s = scenario(id, matches!(common.perturbation, OnOff::On));
    let mut overrides = match &common.config {
        Some(p) => Overrides::from_file(p)?,
        None => Overrides::new(),
    };
    for a in &common.set {
        overrides.push_assignment(a)?;
    }
    s.apply(&overrides)?;
    Ok(s)
}

fn classify(e: WorkbenchError) -> Status {
    match e {
        WorkbenchError::Config(_) => Status::Config(e.into()),
        WorkbenchError::Core(
            predfeed_core::Error::Parameter(_)
            | predfeed_core::Error::Dimension(_)
            | predfeed_core::Error::NotHurwitz { .. },
        ) => Status::Config(e.into()),
        _ => Status::Fault(e.into()),
    }
}

fn simulate_cmd(common: &Common, out: &Path) -> Status {
    let s = match build(common) {
        Ok(s) => s,
        Err(e) => return Status::Config(e),
    };
    match report::run(&s, Some(out)) {
        Ok((_, r)) => {
            println!(
                "{}: {} = {:.6e} (threshold {:.3e}) {}",
                r.scenario,
                r.assertion.description,
                r.assertion.value,
                r.assertion.threshold,
                if r.pass { "PASS" } else { "FAIL" }
            );
            match r.fault {
                Some(f) => Status::Fault(anyhow::anyhow!("run stopped early: {f}")),
                None if r.pass => Status::Pass,
                None => Status::Fail,
            }
        }
        Err(e) => classify(e),
    }
}

fn check_cmd(common: &Common, criterion: Criterion, window: f64, start: f64, threshold: Option<f64>) -> Status {
    let s = match build(common) {
        Ok(s) => s,
        Err(e) => return Status::Config(e),
    };
    let horizon = s.config.t_end - s.config.t0;
    let needs_run = matches!(criterion, Criterion::Feasibility) || !s.delay.is_time_only();
    let traj = if needs_run {
        match simulate(&s.plant, &s.controller, &s.delay, &s.config) {
            Ok(t) if t.fault.is_none() => Some(t),
            Ok(t) => {
                let f = t.fault.unwrap();
                return Status::Fault(anyhow::anyhow!("{:?} at t = {}: {}", f.kind, f.time, f.message));
            }
            Err(e) => return classify(e.into()),
        }
    } else {
        None
    };
    if let Criterion::Feasibility = criterion {
        let traj = traj.expect("simulated above");
        return match s.delay.check_feasibility(&s.plant, &traj, FEASIBILITY_C) {
            Ok(f) => {
                println!(
                    "feasibility (c = {FEASIBILITY_C}): rate margin {:.6e}, delay margin {:.6e} over {} samples {}",
                    f.rate_margin,
                    f.delay_margin,
                    f.samples,
                    if f.pass { "PASS" } else { "FAIL" }
                );
                if f.pass {
                    Status::Pass
                } else {
                    Status::Fail
                }
            }
            Err(e) => classify(e.into()),
        };
    }
    // only the moving average depends on the window; keep it inside the run otherwise
    let (window, start) = if matches!(criterion, Criterion::MovingAvg) {
        (window, start)
    } else {
        let w = window.min(horizon / 2.0);
        (w, start.min(horizon - w).max(0.0))
    };
    let metrics = match &traj {
        Some(t) => PerturbationMetrics::from_trajectory(t, window, start),
        None => s.delay.perturbation_metrics(horizon, s.config.step, window, start),
    };
    let m = match metrics {
        Ok(m) => m,
        Err(e) => return Status::Config(e.into()),
    };
    let (name, value, default) = match criterion {
        Criterion::Sup => ("sup(|delta| + |delta'|)", m.sup_magnitude_plus_rate, 0.5),
        Criterion::L1 => ("integral of |delta| + |delta'|", m.l1_norm, 2.5),
        Criterion::Vanishing => ("tail sup(|delta| + |delta'|)", m.tail_sup, 1e-2),
        Criterion::MovingAvg => ("moving average of |delta| + |delta'|", m.moving_average, 0.1),
        Criterion::Feasibility => unreachable!(),
    };
    let thr = threshold.unwrap_or(default);
    let pass = value <= thr;
    println!(
        "{name} = {value:.6e} (threshold {thr:.3e}) {}",
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

#[derive(Serialize)]
struct SweepEntry {
    value: f64,
    csv: Option<PathBuf>,
    error: Option<String>,
    assertion: Option<report::AssertionOutcome>,
}

fn sweep_cmd(common: &Common, param: &str, values: &[f64], out: &Path) -> Status {
    let s = match build(common) {
        Ok(s) => s,
        Err(e) => return Status::Config(e),
    };
    let runs = match sweep(&s.plant, &s.controller, &s.delay, &s.config, param, values) {
        Ok(r) => r,
        Err(e) => return classify(e.into()),
    };
    if let Err(e) = std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())) {
        return Status::Fault(e);
    }
    let (mut failed, mut faulted) = (false, false);
    let mut entries = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        let mut entry = SweepEntry {
            value: r.value,
            csv: None,
            error: None,
            assertion: None,
        };
        match r.outcome {
            Ok(traj) => {
                let path = out.join(format!("{}-{i:03}.csv", s.name()));
                if let Err(e) = export_csv(&traj, &path) {
                    return Status::Fault(e.into());
                }
                let a = report::evaluate(&s, &traj);
                if let Some(f) = &traj.fault {
                    faulted = true;
                    entry.error = Some(format!("{:?} at t = {}: {}", f.kind, f.time, f.message));
                }
                failed |= !a.pass;
                println!(
                    "{param} = {}: {} = {:.6e} {}",
                    r.value,
                    a.description,
                    a.value,
                    if a.pass && traj.fault.is_none() { "PASS" } else { "FAIL" }
                );
                entry.csv = Some(path);
                entry.assertion = Some(a);
            }
            Err(e) => {
                faulted = true;
                println!("{param} = {}: error: {e}", r.value);
                entry.error = Some(e.to_string());
            }
        }
        entries.push(entry);
    }
    if let Err(e) = write_report(&entries, &out.join(format!("{}-sweep.json", s.name()))) {
        return Status::Fault(e.into());
    }
    if faulted {
        Status::Fault(anyhow::anyhow!("at least one sweep member stopped with a fault"))
    } else if failed {
        Status::Fail
    } else {
        Status::Pass
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match &cli.command {
        Command::Simulate { common, out } => simulate_cmd(common, out),
        Command::Check {
            common,
            criterion,
            delta_window,
            delta_start,
            threshold,
        } => check_cmd(common, *criterion, *delta_window, *delta_start, *threshold),
        Command::Sweep {
            common,
            param,
            values,
            out,
        } => sweep_cmd(common, param, values, out),
    };
    match status {
        Status::Pass => ExitCode::SUCCESS,
        Status::Fail => ExitCode::from(1),
        Status::Config(e) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Status::Fault(e) => {
            eprintln!("runtime fault: {e:#}");
            ExitCode::from(3)
        }
    }
}
