//! Fixed-step closed-loop integration of a plant with perturbed input
//! delay under predictor feedback.
//!
//! Each step advances `Ẋ = f(X, U(t − D̂ − s_j δ(t, X)))` with classical
//! fourth-order stages, re-evaluating `δ` with the stage state. The control
//! at the new grid time is then solved from the predictor and appended to
//! the input history. The predictor integral depends on the newest control
//! value itself, so that value is found by a short fixed-point iteration.

use rayon::prelude::*;

use crate::delay::{DelayKind, DelayModel};
use crate::error::{Error, Result};
use crate::history::{InputHistory, Interpolation, Side};
use crate::predictor::{ControllerSpec, PlantModel};
use crate::trajectory::{Fault, FaultKind, Trajectory};

/// Input data on `[t0 − D̂ − max(0, δ), t0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialInput {
    Constant(Vec<f64>),
    /// Increasing `(θ, U(θ))` samples ending at `t0`.
    Samples(Vec<(f64, Vec<f64>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub name: String,
    pub t0: f64,
    pub t_end: f64,
    pub step: f64,
    pub x0: Vec<f64>,
    pub initial_input: InitialInput,
    pub interpolation: Interpolation,
    /// Record `P̂(t_k)`.
    pub record_predictor: bool,
    /// Append `VL` and `PiL` channels after the run (linear controllers).
    pub lyapunov_diagnostics: bool,
    /// `|X|` above this ends the run with a blow-up fault.
    pub blowup: f64,
    /// Scalar parameters copied into the trajectory metadata.
    pub params: Vec<(String, f64)>,
}

impl SimConfig {
    pub fn new(x0: Vec<f64>, m: usize, t_end: f64) -> Self {
        Self {
            name: "run".into(),
            t0: 0.0,
            t_end,
            step: 1e-3,
            x0,
            initial_input: InitialInput::Constant(vec![0.0; m]),
            interpolation: Interpolation::Linear,
            record_predictor: true,
            lyapunov_diagnostics: false,
            blowup: 1e9,
            params: Vec::new(),
        }
    }

    fn steps(&self) -> usize {
        ((self.t_end - self.t0) / self.step).round() as usize
    }
}

/// Relative tolerance of the implicit control solve.
const CONTROL_TOL: f64 = 1e-13;
const CONTROL_MAX_ITER: usize = 30;

struct Stages {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

struct Runner<'a> {
    plant: &'a PlantModel,
    spec: &'a ControllerSpec,
    delay: &'a DelayModel,
    hist: InputHistory,
    buf: Vec<f64>,
    uin: Vec<f64>,
}

impl Runner<'_> {
    /// `Ẋ` at a stage; `lag` is the ODE-driven `δ` when there is one.
    fn stage(
        &mut self,
        t: f64,
        x: &[f64],
        lag: Option<f64>,
        side: Side,
        out: &mut [f64],
    ) -> std::result::Result<(), Fault> {
        let delta = lag.unwrap_or_else(|| self.delay.value(t, x));
        for j in 0..self.plant.m() {
            let total = self.delay.nominal + self.delay.channel_scale(j) * delta;
            if !(total > 0.0) {
                return Err(Fault {
                    time: t,
                    kind: FaultKind::Feasibility,
                    message: format!("total delay of input {} is {total} ≤ 0", j + 1),
                });
            }
            let theta = t - total;
            if self.hist.end().is_some_and(|e| theta > e + 1e-12 * e.abs().max(1.0)) {
                return Err(Fault {
                    time: t,
                    kind: FaultKind::Feasibility,
                    message: format!("total delay of input {} is {total}, shorter than the step", j + 1),
                });
            }
            self.hist
                .eval_into(theta, side, &mut self.buf)
                .map_err(|e| fault(t, &e))?;
            self.uin[j] = self.buf[j];
        }
        self.plant.rhs(x, &self.uin, out);
        Ok(())
    }

    /// Times in `(t, t_next)` at which some channel's delayed argument
    /// passes the history jump, in increasing order. The state is frozen at
    /// its value at `t` for this search.
    fn crossings(&self, t: f64, t_next: f64, x: &[f64]) -> Vec<f64> {
        let Some(tj) = self.hist.jump_time() else {
            return Vec::new();
        };
        let margin = 1e-9 * (t_next - t);
        let mut out = Vec::new();
        for j in 0..self.plant.m() {
            let g = |s: f64| s - self.delay.channel_delay(j, s, x) - tj;
            if !(g(t) < 0.0 && g(t_next) > 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (t, t_next);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
            }
            if hi > t + margin && hi < t_next - margin {
                out.push(hi);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// One classical RK4 step of length `h` from `t`; an ODE-driven `δ`
    /// rides along as an extra component.
    fn rk4(
        &mut self,
        t: f64,
        h: f64,
        x: &mut [f64],
        lag: &mut Option<f64>,
        ws: &mut Stages,
    ) -> std::result::Result<(), Fault> {
        let n = x.len();
        let delay = self.delay;
        let ode = |tt: f64, v: f64| delay.ode_rhs(tt, v).unwrap_or(0.0);
        let (tm, t_next, l) = (t + 0.5 * h, t + h, *lag);
        let Stages { k1, k2, k3, k4, tmp } = ws;
        self.stage(t, x, l, Side::Right, k1)?;
        let lk1 = l.map(|v| ode(t, v));
        let l2 = l.zip(lk1).map(|(v, d)| v + 0.5 * h * d);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.stage(tm, tmp, l2, Side::Right, k2)?;
        let lk2 = l2.map(|v| ode(tm, v));
        let l3 = l.zip(lk2).map(|(v, d)| v + 0.5 * h * d);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.stage(tm, tmp, l3, Side::Right, k3)?;
        let lk3 = l3.map(|v| ode(tm, v));
        let l4 = l.zip(lk3).map(|(v, d)| v + h * d);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        self.stage(t_next, tmp, l4, Side::Left, k4)?;
        let lk4 = l4.map(|v| ode(t_next, v));
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let (Some(v), Some(a), Some(b), Some(c), Some(d)) = (l, lk1, lk2, lk3, lk4) {
            *lag = Some(v + h / 6.0 * (a + 2.0 * b + 2.0 * c + d));
        }
        Ok(())
    }

    /// Solve `U(t) = control(X, û(·, t))` where `û(1, t) = U(t)`.
    fn control(&mut self, t: f64, x: &[f64], first: bool) -> std::result::Result<(Vec<f64>, Vec<f64>), Fault> {
        let guess = self.hist.last_value().expect("history is never empty").to_vec();
        if first {
            self.hist.start_at(t, &guess)
        } else {
            self.hist.push(t, &guess)
        }
        .map_err(|e| fault(t, &e))?;
        let mut prev = guess;
        for _ in 0..CONTROL_MAX_ITER {
            let obs = self
                .hist
                .observer_grid(t, self.spec.nominal_delay, self.spec.grid)
                .map_err(|e| fault(t, &e))?;
            let (p, u) = self.spec.control(self.plant, x, &obs, t).map_err(|e| fault(t, &e))?;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Fault {
                    time: t,
                    kind: FaultKind::Divergence,
                    message: "control is not finite".into(),
                });
            }
            self.hist.replace_last(&u).map_err(|e| fault(t, &e))?;
            let change = u
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
                .fold(0.0, f64::max);
            prev = u;
            if change <= CONTROL_TOL {
                return Ok((p, prev));
            }
        }
        // the last iterate is already stored; accept it
        let obs = self
            .hist
            .observer_grid(t, self.spec.nominal_delay, self.spec.grid)
            .map_err(|e| fault(t, &e))?;
        let (p, _) = self.spec.control(self.plant, x, &obs, t).map_err(|e| fault(t, &e))?;
        Ok((p, prev))
    }
}

fn fault(t: f64, e: &Error) -> Fault {
    let kind = match e {
        Error::OutOfRange { .. } | Error::Coverage { .. } => FaultKind::Coverage,
        Error::Divergence { .. } => FaultKind::Divergence,
        Error::NonInvertible { .. } => FaultKind::Feasibility,
        _ => FaultKind::Domain,
    };
    Fault {
        time: t,
        kind,
        message: e.to_string(),
    }
}

fn validate(plant: &PlantModel, spec: &ControllerSpec, delay: &DelayModel, cfg: &SimConfig) -> Result<()> {
    let (n, m) = (plant.n(), plant.m());
    if !(cfg.step > 0.0) || !cfg.step.is_finite() {
        return Err(Error::Parameter(format!("step must be positive, got {}", cfg.step)));
    }
    if !(cfg.t_end > cfg.t0) {
        return Err(Error::Parameter(format!(
            "t_end ({}) must exceed t0 ({})",
            cfg.t_end, cfg.t0
        )));
    }
    if cfg.steps() == 0 {
        return Err(Error::Parameter("horizon is shorter than one step".into()));
    }
    if cfg.x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, plant has {n}",
            cfg.x0.len()
        )));
    }
    if let Some(g) = spec.gains() {
        if g.a.nrows() != n || g.b.ncols() != m {
            return Err(Error::Dimension(format!(
                "controller is {}×{}, plant is {n}×{m}",
                g.a.nrows(),
                g.b.ncols()
            )));
        }
    }
    if (spec.nominal_delay - delay.nominal).abs() > 0.0 {
        return Err(Error::Parameter(format!(
            "controller D̂ = {} differs from the delay model's D̂ = {}",
            spec.nominal_delay, delay.nominal
        )));
    }
    if delay.channel_scales.len() > 1 && delay.channel_scales.len() != m {
        return Err(Error::Dimension(format!(
            "{} delay channel scales for {m} inputs",
            delay.channel_scales.len()
        )));
    }
    if !(cfg.blowup > 0.0) {
        return Err(Error::Parameter("blow-up threshold must be positive".into()));
    }
    Ok(())
}

/// Initial `δ` for ODE-driven kinds, taken at `t0`.
fn lag_at(delay: &DelayModel, t0: f64) -> Option<f64> {
    match delay.ode_initial() {
        Some((start, initial)) if start == t0 => Some(initial),
        Some(_) => Some(delay.value(t0, &[])),
        None => None,
    }
}

/// Run the closed loop. Configuration errors are returned as `Err`; faults
/// during the run end the trajectory early and are recorded in it.
pub fn simulate(plant: &PlantModel, spec: &ControllerSpec, delay: &DelayModel, cfg: &SimConfig) -> Result<Trajectory> {
    validate(plant, spec, delay, cfg)?;
    let (n, m) = (plant.n(), plant.m());
    let (h, t0) = (cfg.step, cfg.t0);
    let d_hat = delay.nominal;

    let mut lag = lag_at(delay, t0);
    let delta0 = lag.unwrap_or_else(|| delay.value(t0, &cfg.x0));
    let reach = (0..m).map(|j| delay.channel_scale(j) * delta0).fold(0.0, f64::max);
    if !(d_hat
        + (0..m)
            .map(|j| delay.channel_scale(j) * delta0)
            .fold(f64::INFINITY, f64::min)
        > 0.0)
    {
        return Err(Error::Parameter(format!(
            "total delay at t0 is not positive (δ(t0) = {delta0})"
        )));
    }
    let need = d_hat + reach;

    // initial data, on the run's own time grid where possible
    let (window, initial) = match &cfg.initial_input {
        InitialInput::Constant(c) => {
            if c.len() != m {
                return Err(Error::Dimension(format!(
                    "initial input has {} entries, plant has {m} inputs",
                    c.len()
                )));
            }
            let back = 2.0 * need + d_hat;
            let count = (back / h).ceil() as usize;
            let samples: Vec<(f64, Vec<f64>)> = (0..=count).rev().map(|k| (t0 - k as f64 * h, c.clone())).collect();
            (back, samples)
        }
        InitialInput::Samples(s) => {
            let (first, last) = match (s.first(), s.last()) {
                (Some(a), Some(b)) => (a.0, b.0),
                _ => return Err(Error::Parameter("initial input samples are empty".into())),
            };
            if (last - t0).abs() > 1e-12 * t0.abs().max(1.0) || first > t0 - need {
                return Err(Error::Coverage {
                    need_start: t0 - need,
                    need_end: t0,
                    have_start: first,
                    have_end: last,
                });
            }
            if s.iter().any(|(_, u)| u.len() != m) {
                return Err(Error::Dimension("initial input sample dimension".into()));
            }
            (t0 - first, s.clone())
        }
    };
    let mut hist = InputHistory::new(m, window.max(need + h), cfg.interpolation)?;
    for (t, u) in &initial {
        hist.push(*t, u)?;
    }

    let steps = cfg.steps();
    let mut traj = Trajectory {
        name: cfg.name.clone(),
        params: cfg.params.clone(),
        step: h,
        n,
        m,
        nominal_delay: d_hat,
        time: Vec::with_capacity(steps + 1),
        state: Vec::with_capacity(n * (steps + 1)),
        input: Vec::with_capacity(m * (steps + 1)),
        delta: Vec::with_capacity(steps + 1),
        predictor: cfg.record_predictor.then(|| Vec::with_capacity(n * (steps + 1))),
        diagnostics: Vec::new(),
        initial_input: initial,
        interpolation: cfg.interpolation,
        fault: None,
    };

    let mut run = Runner {
        plant,
        spec,
        delay,
        hist,
        buf: vec![0.0; m],
        uin: vec![0.0; m],
    };
    let mut x = cfg.x0.clone();
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], u: &[f64], p: &[f64], dl: f64| {
        traj.time.push(t);
        traj.state.extend_from_slice(x);
        traj.input.extend_from_slice(u);
        traj.delta.push(dl);
        if let Some(pp) = traj.predictor.as_mut() {
            pp.extend_from_slice(p);
        }
    };

    match run.control(t0, &x, true) {
        Ok((p, u)) => record(&mut traj, t0, &x, &u, &p, delta0),
        Err(f) => {
            traj.fault = Some(f);
            return Ok(traj);
        }
    }

    let mut ws = Stages::new(n);
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let t_next = t0 + (k + 1) as f64 * h;
        // never integrate across the start-time jump of the input
        let mut a = t;
        let mut outcome = Ok(());
        for b in run.crossings(t, t_next, &x).into_iter().chain(std::iter::once(t_next)) {
            outcome = run.rk4(a, b - a, &mut x, &mut lag, &mut ws);
            if outcome.is_err() {
                break;
            }
            a = b;
        }
        if let Err(f) = outcome {
            traj.fault = Some(f);
            break;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > cfg.blowup {
            traj.fault = Some(Fault {
                time: t_next,
                kind: FaultKind::BlowUp,
                message: format!("|X| = {norm:e} exceeds {:e}", cfg.blowup),
            });
            break;
        }
        let dl = lag.unwrap_or_else(|| delay.value(t_next, &x));
        match run.control(t_next, &x, false) {
            Ok((p, u)) => record(&mut traj, t_next, &x, &u, &p, dl),
            Err(f) => {
                traj.fault = Some(f);
                break;
            }
        }
    }

    if cfg.lyapunov_diagnostics && spec.gains().is_some() {
        crate::lyapunov::attach_diagnostics(&mut traj, spec, delay)?;
    }
    Ok(traj)
}

/// Names accepted by [`set_parameter`] and [`sweep`].
pub const PARAMETERS: &[&str] = &[
    "delay.nominal",
    "delay.constant",
    "delay.bias",
    "delay.amplitude",
    "delay.frequency",
    "delay.state_gain",
    "delay.offset",
    "delay.forcing",
    "delay.rate",
    "delay.initial",
    "controller.grid",
    "sim.step",
    "sim.t_end",
];

/// Set a named scalar (one of [`PARAMETERS`]) of the delay model,
/// controller or configuration.
pub fn set_parameter(
    spec: &mut ControllerSpec,
    delay: &mut DelayModel,
    cfg: &mut SimConfig,
    key: &str,
    value: f64,
) -> Result<()> {
    let bad_kind =
        |key: &str, kind: &DelayKind| Error::Parameter(format!("`{key}` does not apply to delay kind {kind:?}"));
    match key {
        "delay.nominal" => {
            *spec = spec.rebuilt(value, spec.grid)?;
            delay.nominal = value;
        }
        "controller.grid" => {
            if !(value >= 8.0 && value.fract() == 0.0) {
                return Err(Error::Parameter(format!(
                    "controller.grid must be an integer >= 8, got {value}"
                )));
            }
            *spec = spec.rebuilt(spec.nominal_delay, value as usize)?;
        }
        "sim.step" => cfg.step = value,
        "sim.t_end" => cfg.t_end = value,
        "delay.constant" => match &mut delay.kind {
            DelayKind::Constant(c) => *c = value,
            k @ DelayKind::Zero => *k = DelayKind::Constant(value),
            k => return Err(bad_kind(key, k)),
        },
        "delay.amplitude" | "delay.bias" | "delay.frequency" => {
            if matches!(delay.kind, DelayKind::Zero) {
                delay.kind = DelayKind::TimeSinusoidal {
                    bias: 0.0,
                    amplitude: 0.0,
                    frequency: 1.0,
                };
            }
            match (&mut delay.kind, key) {
                (DelayKind::TimeSinusoidal { amplitude, .. }, "delay.amplitude")
                | (
                    DelayKind::StateQuadratic {
                        time_amplitude: amplitude,
                        ..
                    },
                    "delay.amplitude",
                ) => *amplitude = value,
                (DelayKind::TimeSinusoidal { bias, .. }, "delay.bias") => *bias = value,
                (DelayKind::TimeSinusoidal { frequency, .. }, "delay.frequency")
                | (DelayKind::StateQuadratic { frequency, .. }, "delay.frequency") => *frequency = value,
                (k, _) => return Err(bad_kind(key, k)),
            }
        }
        "delay.state_gain" | "delay.offset" => match &mut delay.kind {
            DelayKind::StateQuadratic { state_gain, offset, .. } => {
                if key == "delay.state_gain" {
                    *state_gain = value
                } else {
                    *offset = value
                }
            }
            k => return Err(bad_kind(key, k)),
        },
        "delay.forcing" | "delay.rate" | "delay.initial" => match &mut delay.kind {
            DelayKind::FirstOrderLag {
                rate, forcing, initial, ..
            } => match key {
                "delay.forcing" => *forcing = value,
                "delay.rate" => *rate = value,
                _ => *initial = value,
            },
            k => return Err(bad_kind(key, k)),
        },
        _ => return Err(Error::Parameter(format!("unknown parameter `{key}`"))),
    }
    Ok(())
}

/// One member of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: f64,
    pub outcome: Result<Trajectory>,
}

/// Independent runs over `values` of one named parameter, in parallel,
/// returned in input order. A failing member does not stop the others.
pub fn sweep(
    plant: &PlantModel,
    spec: &ControllerSpec,
    delay: &DelayModel,
    cfg: &SimConfig,
    parameter: &str,
    values: &[f64],
) -> Result<Vec<SweepRun>> {
    if !PARAMETERS.contains(&parameter) {
        return Err(Error::Parameter(format!("unknown parameter `{parameter}`")));
    }
    Ok(values
        .par_iter()
        .map(|&v| {
            let (mut s, mut d, mut c) = (spec.clone(), delay.clone(), cfg.clone());
            let outcome = set_parameter(&mut s, &mut d, &mut c, parameter, v).and_then(|_| {
                c.params.push((parameter.to_string(), v));
                simulate(plant, &s, &d, &c)
            });
            SweepRun { value: v, outcome }
        })
        .collect())
}
