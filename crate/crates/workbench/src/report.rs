//! Running a scenario and summarizing the result.

use std::path::{Path, PathBuf};

use predfeed_core::delay::{central_differences, PerturbationMetrics};
use predfeed_core::lyapunov::decay_fit;
use predfeed_core::simulator::simulate;
use predfeed_core::trajectory::Trajectory;
use serde::Serialize;

use crate::error::{Result, WorkbenchError};
use crate::export::{export_plot, write_csv, Table};
use crate::scenario::{Assertion, Scenario};

/// Rate bound `c` used by the feasibility check.
pub const FEASIBILITY_C: f64 = 0.5;
/// Default averaging window and start for the moving-average metric.
pub const DEFAULT_WINDOW: f64 = 2.0 * std::f64::consts::PI;
pub const DEFAULT_WINDOW_START: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub description: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub r: f64,
    pub lambda: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub sup: f64,
    pub l1: f64,
    pub tail_sup: f64,
    pub moving_average: f64,
    pub window: f64,
    pub start: f64,
}

impl From<PerturbationMetrics> for Metrics {
    fn from(m: PerturbationMetrics) -> Self {
        Self {
            sup: m.sup_magnitude_plus_rate,
            l1: m.l1_norm,
            tail_sup: m.tail_sup,
            moving_average: m.moving_average,
            window: m.window,
            start: m.start,
        }
    }
}

/// Everything here except `feasibility` is a function of the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub final_time: f64,
    /// Shifted state at the last row.
    pub final_state: Vec<f64>,
    /// `Σ|X_i|` at the last row.
    pub final_residual: f64,
    /// Fit of `|X|` after the first nominal delay.
    pub state_decay: Option<Fit>,
    pub vl_decay: Option<Fit>,
    pub pil_decay: Option<Fit>,
    pub perturbation: Option<Metrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub rate_margin: f64,
    pub delay_margin: f64,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub perturbation: bool,
    pub csv: PathBuf,
    pub plots: Vec<PathBuf>,
    pub params: Vec<(String, f64)>,
    pub fault: Option<String>,
    pub summary: Summary,
    pub feasibility: Option<Feasibility>,
    pub assertion: AssertionOutcome,
    pub pass: bool,
}

fn fit(times: &[f64], values: &[f64]) -> Option<Fit> {
    decay_fit(times, values).ok().map(|f| Fit {
        r: f.r,
        lambda: f.lambda,
        residual: f.residual,
    })
}

/// Recompute the summary from a CSV table. `nominal_delay` only selects
/// where the decay fits begin.
pub fn summarize(table: &Table, nominal_delay: f64) -> Result<Summary> {
    let t = table
        .column("t")
        .ok_or_else(|| WorkbenchError::Config("table has no `t` column".into()))?;
    if t.is_empty() {
        return Err(WorkbenchError::Config("table has no rows".into()));
    }
    let last = t.len() - 1;
    let final_state = table.state(last);
    let from = t.partition_point(|s| *s < t[0] + nominal_delay);
    let tail = |v: &[f64]| fit(&t[from..], &v[from..]);
    let norms: Vec<f64> = (0..t.len())
        .map(|k| table.state(k).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let perturbation = table.column("delta").and_then(|d| {
        let rate = central_differences(t, d);
        let span = t[last] - t[0];
        let window = DEFAULT_WINDOW.min(span / 2.0);
        let start = DEFAULT_WINDOW_START.min(span - window).max(0.0);
        PerturbationMetrics::from_samples(t, d, &rate, window, start)
            .ok()
            .map(Metrics::from)
    });
    Ok(Summary {
        final_time: t[last],
        final_residual: final_state.iter().map(|v| v.abs()).sum(),
        final_state,
        state_decay: tail(&norms),
        vl_decay: table.column("VL").and_then(tail),
        pil_decay: table.column("PiL").and_then(tail),
        perturbation,
    })
}

/// Check the scenario's assertion on a run.
pub fn evaluate(scenario: &Scenario, traj: &Trajectory) -> AssertionOutcome {
    let at = |time: f64| traj.index_of(time.min(traj.t_end()));
    match &scenario.assertion {
        Assertion::FinalResidual { time, threshold } => {
            let k = at(*time);
            let value: f64 = traj.x(k).iter().map(|v| v.abs()).sum();
            AssertionOutcome {
                description: format!("sum |X_i| at t = {}", traj.time[k]),
                value,
                threshold: *threshold,
                pass: value < *threshold,
            }
        }
        Assertion::Tracking { time, a, b, threshold } => {
            let k = at(*time);
            let value = (traj.x(k)[*a] - traj.x(k)[*b]).abs();
            AssertionOutcome {
                description: format!("|x{} - x{}| at t = {}", a + 1, b + 1, traj.time[k]),
                value,
                threshold: *threshold,
                pass: value < *threshold,
            }
        }
        Assertion::ClosedForm { tolerance } => match scenario.closed_form() {
            Some(exact) => {
                let value = (0..traj.len())
                    .map(|k| (traj.x(k)[0] - exact(traj.time[k])).abs())
                    .fold(0.0, f64::max);
                AssertionOutcome {
                    description: "max |X - closed form|".into(),
                    value,
                    threshold: *tolerance,
                    pass: value <= *tolerance,
                }
            }
            None => {
                let from = traj.index_of(traj.t0() + traj.nominal_delay);
                let norms: Vec<f64> = (from..traj.len()).map(|k| traj.state_norm(k)).collect();
                let lambda = fit(&traj.time[from..], &norms).map_or(f64::NAN, |f| f.lambda);
                AssertionOutcome {
                    description: "decay rate of |X| (closed form not applicable)".into(),
                    value: lambda,
                    threshold: 0.0,
                    pass: lambda > 0.0,
                }
            }
        },
    }
}

/// Simulate, then write `<name>.csv`, one SVG per plot and return the
/// report. Nothing is written when `out_dir` is `None`.
pub fn run(scenario: &Scenario, out_dir: Option<&Path>) -> Result<(Trajectory, RunReport)> {
    let traj = simulate(&scenario.plant, &scenario.controller, &scenario.delay, &scenario.config)?;
    let table = Table::from_trajectory(&traj);
    let name = scenario.name().to_string();
    let mut csv = PathBuf::new();
    let mut plots = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
        csv = dir.join(format!("{name}.csv"));
        write_csv(&table, &csv)?;
        for p in &scenario.plots {
            let path = dir.join(format!("{name}-{}.svg", p.stem));
            export_plot(&table, &p.title, &p.channels, &path)?;
            plots.push(path);
        }
    }
    let summary = summarize(&table, scenario.delay.nominal)?;
    let feasibility = if traj.fault.is_none() {
        scenario
            .delay
            .check_feasibility(&scenario.plant, &traj, FEASIBILITY_C)
            .ok()
            .map(|f| Feasibility {
                rate_margin: f.rate_margin,
                delay_margin: f.delay_margin,
                samples: f.samples,
                pass: f.pass,
            })
    } else {
        None
    };
    let assertion = evaluate(scenario, &traj);
    let fault = traj
        .fault
        .as_ref()
        .map(|f| format!("{:?} at t = {}: {}", f.kind, f.time, f.message));
    let report = RunReport {
        scenario: name,
        perturbation: scenario.perturbation,
        csv,
        plots,
        params: scenario.config.params.clone(),
        pass: fault.is_none() && assertion.pass,
        fault,
        summary,
        feasibility,
        assertion,
    };
    if let Some(dir) = out_dir {
        write_report(&report, &dir.join(format!("{}.json", report.scenario)))?;
    }
    Ok((traj, report))
}

pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(report).map_err(|e| WorkbenchError::Config(format!("serializing report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| WorkbenchError::io(path, e))
}
