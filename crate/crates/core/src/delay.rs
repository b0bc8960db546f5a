//! Nominal-plus-perturbed input delays.
//!
//! The plant sees input channel `j` delayed by `D̂ + s_j δ(t, X)`, where
//! `D̂` is the nominal delay the controller is designed for, `δ` the unknown
//! perturbation and `s_j` a per-channel scale (1 for single-input plants).
//! This module evaluates `δ` with its partial derivatives, maps between
//! "now" and the delayed/predicted times `φ` and `σ = φ⁻¹`, and measures
//! the perturbation in the norms the robustness conditions are stated in.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::history::Side;
use crate::predictor::PlantModel;
use crate::trajectory::Trajectory;

/// `(δ, δ')` as a function of time only.
pub type TimeFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Sampled perturbation read from a `t,delta` CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    times: Vec<f64>,
    values: Vec<f64>,
    rates: Vec<f64>,
}

impl Trace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::Parameter(
                "a delay trace needs at least two (t, delta) rows".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("trace times must be strictly increasing".into()));
        }
        let rates = central_differences(&times, &values);
        Ok(Self { times, values, rates })
    }

    /// Read a two-column CSV with header `t,delta`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?
            .clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "delta" {
            return Err(Error::Parameter(format!(
                "{}: expected header `t,delta`, found `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
            let parse = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("{} row {}: {e}", path.display(), line + 2)))
            };
            times.push(parse(0)?);
            values.push(parse(1)?);
        }
        Self::new(times, values)
    }

    /// Linear interpolation of value and (node-wise) rate; held constant
    /// outside the sampled range, where the rate is zero.
    fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.times.len();
        if t <= self.times[0] {
            return (self.values[0], if t == self.times[0] { self.rates[0] } else { 0.0 });
        }
        if t >= self.times[n - 1] {
            return (
                self.values[n - 1],
                if t == self.times[n - 1] { self.rates[n - 1] } else { 0.0 },
            );
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let lerp = |v: &[f64]| v[k] + w * (v[k + 1] - v[k]);
        (lerp(&self.values), lerp(&self.rates))
    }
}

/// Second-order finite differences on a possibly non-uniform grid:
/// three-point central inside, three-point one-sided at the ends.
pub fn central_differences(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n == 2 {
        let r = (v[1] - v[0]) / (t[1] - t[0]);
        return vec![r, r];
    }
    // derivative of the quadratic through three points, evaluated at `at`
    let quad = |i: usize, at: f64| {
        let (t0, t1, t2) = (t[i], t[i + 1], t[i + 2]);
        let (v0, v1, v2) = (v[i], v[i + 1], v[i + 2]);
        v0 * (2.0 * at - t1 - t2) / ((t0 - t1) * (t0 - t2))
            + v1 * (2.0 * at - t0 - t2) / ((t1 - t0) * (t1 - t2))
            + v2 * (2.0 * at - t0 - t1) / ((t2 - t0) * (t2 - t1))
    };
    let mut out = Vec::with_capacity(n);
    out.push(quad(0, t[0]));
    for i in 1..n - 1 {
        out.push(quad(i - 1, t[i]));
    }
    out.push(quad(n - 3, t[n - 1]));
    out
}

/// Shape of the perturbation `δ(t, X)`.
#[derive(Clone)]
pub enum DelayKind {
    Zero,
    Constant(f64),
    /// `bias + amplitude · sin²(frequency · t)`
    TimeSinusoidal {
        bias: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `state_gain · (X[state_index] + offset)² + time_amplitude · sin²(frequency · t)`
    StateQuadratic {
        state_index: usize,
        offset: f64,
        state_gain: f64,
        time_amplitude: f64,
        frequency: f64,
    },
    /// Solution of `δ' = −rate·δ + forcing·sin²(t)`, `δ(start) = initial`.
    FirstOrderLag {
        rate: f64,
        forcing: f64,
        initial: f64,
        start: f64,
    },
    Tabulated(Trace),
    /// User-supplied `(δ(t), δ'(t))`.
    TimeFunction(TimeFn),
}

impl fmt::Debug for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::TimeSinusoidal {
                bias,
                amplitude,
                frequency,
            } => f
                .debug_struct("TimeSinusoidal")
                .field("bias", bias)
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .finish(),
            Self::StateQuadratic {
                state_index,
                offset,
                state_gain,
                time_amplitude,
                frequency,
            } => f
                .debug_struct("StateQuadratic")
                .field("state_index", state_index)
                .field("offset", offset)
                .field("state_gain", state_gain)
                .field("time_amplitude", time_amplitude)
                .field("frequency", frequency)
                .finish(),
            Self::FirstOrderLag {
                rate,
                forcing,
                initial,
                start,
            } => f
                .debug_struct("FirstOrderLag")
                .field("rate", rate)
                .field("forcing", forcing)
                .field("initial", initial)
                .field("start", start)
                .finish(),
            Self::Tabulated(tr) => write!(f, "Tabulated({} rows)", tr.times.len()),
            Self::TimeFunction(_) => write!(f, "TimeFunction"),
        }
    }
}

/// `δ` together with its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEval {
    pub delta: f64,
    pub delta_t: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DelayModel {
    pub nominal: f64,
    pub kind: DelayKind,
    /// Per-input-channel multiplier on `δ`.
    pub channel_scales: Vec<f64>,
}

impl DelayModel {
    pub fn new(nominal: f64, kind: DelayKind) -> Result<Self> {
        if !(nominal > 0.0) {
            return Err(Error::Parameter(format!(
                "nominal delay must be positive, got {nominal}"
            )));
        }
        Ok(Self {
            nominal,
            kind,
            channel_scales: vec![1.0],
        })
    }

    pub fn with_channel_scales(mut self, scales: Vec<f64>) -> Self {
        self.channel_scales = scales;
        self
    }

    pub fn channel_scale(&self, channel: usize) -> f64 {
        self.channel_scales.get(channel).copied().unwrap_or(1.0)
    }

    /// Whether `δ` ignores the state.
    pub fn is_time_only(&self) -> bool {
        !matches!(self.kind, DelayKind::StateQuadratic { state_gain, .. } if state_gain != 0.0)
    }

    /// Whether the kind carries an ODE-driven internal state.
    pub fn is_ode_driven(&self) -> bool {
        matches!(self.kind, DelayKind::FirstOrderLag { .. })
    }

    /// `δ(t, X)` alone (no allocation).
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        match &self.kind {
            DelayKind::Zero => 0.0,
            DelayKind::Constant(c) => *c,
            DelayKind::TimeSinusoidal {
                bias,
                amplitude,
                frequency,
            } => bias + amplitude * (frequency * t).sin().powi(2),
            DelayKind::StateQuadratic {
                state_index,
                offset,
                state_gain,
                time_amplitude,
                frequency,
            } => {
                let z = x.get(*state_index).copied().unwrap_or(0.0) + offset;
                state_gain * z * z + time_amplitude * (frequency * t).sin().powi(2)
            }
            DelayKind::FirstOrderLag { .. } => self.lag_closed_form(t).0,
            DelayKind::Tabulated(tr) => tr.eval(t).0,
            DelayKind::TimeFunction(f) => f(t).0,
        }
    }

    /// `(δ, δ_t, ∇δ)`; `∇δ ≡ 0` for time-only kinds.
    pub fn eval(&self, t: f64, x: &[f64]) -> DelayEval {
        let mut grad = vec![0.0; x.len()];
        let (delta, delta_t) = match &self.kind {
            DelayKind::Zero => (0.0, 0.0),
            DelayKind::Constant(c) => (*c, 0.0),
            DelayKind::TimeSinusoidal {
                bias,
                amplitude,
                frequency,
            } => {
                let (s, c) = (frequency * t).sin_cos();
                (bias + amplitude * s * s, 2.0 * amplitude * frequency * s * c)
            }
            DelayKind::StateQuadratic {
                state_index,
                offset,
                state_gain,
                time_amplitude,
                frequency,
            } => {
                let z = x.get(*state_index).copied().unwrap_or(0.0) + offset;
                if let Some(g) = grad.get_mut(*state_index) {
                    *g = 2.0 * state_gain * z;
                }
                let (s, c) = (frequency * t).sin_cos();
                (
                    state_gain * z * z + time_amplitude * s * s,
                    2.0 * time_amplitude * frequency * s * c,
                )
            }
            DelayKind::FirstOrderLag { .. } => self.lag_closed_form(t),
            DelayKind::Tabulated(tr) => tr.eval(t),
            DelayKind::TimeFunction(f) => f(t),
        };
        DelayEval { delta, delta_t, grad }
    }

    /// Right-hand side of the lag ODE, for kinds that have one.
    pub fn ode_rhs(&self, t: f64, delta: f64) -> Option<f64> {
        match self.kind {
            DelayKind::FirstOrderLag { rate, forcing, .. } => Some(-rate * delta + forcing * t.sin().powi(2)),
            _ => None,
        }
    }

    /// Initial internal state for ODE-driven kinds.
    pub fn ode_initial(&self) -> Option<(f64, f64)> {
        match self.kind {
            DelayKind::FirstOrderLag { initial, start, .. } => Some((start, initial)),
            _ => None,
        }
    }

    /// Closed form of the lag ODE with `sin² t = (1 − cos 2t)/2` forcing.
    fn lag_closed_form(&self, t: f64) -> (f64, f64) {
        let DelayKind::FirstOrderLag {
            rate,
            forcing,
            initial,
            start,
        } = self.kind
        else {
            unreachable!()
        };
        let delta = if rate == 0.0 {
            initial + 0.5 * forcing * (t - start) - 0.25 * forcing * ((2.0 * t).sin() - (2.0 * start).sin())
        } else {
            let den = rate * rate + 4.0;
            let particular = |s: f64| {
                0.5 * forcing / rate - forcing * rate / (2.0 * den) * (2.0 * s).cos() - forcing / den * (2.0 * s).sin()
            };
            particular(t) + (initial - particular(start)) * (-rate * (t - start)).exp()
        };
        (delta, -rate * delta + forcing * t.sin().powi(2))
    }

    /// Total delay seen by `channel`: `D̂ + s_j δ(t, X)`.
    pub fn channel_delay(&self, channel: usize, t: f64, x: &[f64]) -> f64 {
        self.nominal + self.channel_scale(channel) * self.value(t, x)
    }

    /// `φ(t) = t − D̂ − δ(t, X)`.
    pub fn delayed_time(&self, t: f64, x: &[f64]) -> f64 {
        self.delayed_time_channel(0, t, x)
    }

    pub fn delayed_time_channel(&self, channel: usize, t: f64, x: &[f64]) -> f64 {
        t - self.channel_delay(channel, t, x)
    }

    /// `σ(t) = φ⁻¹(t)`, the solution of `σ = t + D̂ + δ(σ, X(σ))`.
    ///
    /// State-dependent kinds read `X(σ)` off a recorded trajectory.
    pub fn predicted_time(&self, t: f64, traj: Option<&Trajectory>) -> Result<f64> {
        self.predicted_time_channel(0, t, traj)
    }

    pub fn predicted_time_channel(&self, channel: usize, t: f64, traj: Option<&Trajectory>) -> Result<f64> {
        let scale = self.channel_scale(channel);
        let needs_state = !self.is_time_only();
        if needs_state && traj.is_none() {
            return Err(Error::Parameter(
                "state-dependent delay needs a recorded trajectory to evaluate σ".into(),
            ));
        }
        let mut x = vec![0.0; traj.map_or(0, |tr| tr.n)];
        let mut g = |s: f64| -> Result<f64> {
            if needs_state {
                traj.expect("checked above").state_at(s, &mut x)?;
            }
            Ok(s - t - self.nominal - scale * self.value(s, &x))
        };
        let tol = |s: f64| 1e-12 * (1.0 + s.abs());

        let g_lo = g(t)?;
        if !(g_lo < 0.0) {
            return Err(Error::NonInvertible {
                lo: t,
                hi: t,
                reason: format!("total delay {} is not positive at t", -g_lo),
            });
        }

        // damped fixed point σ ← σ − ω g(σ)
        let mut s = t - g_lo;
        let mut r = g(s)?;
        let mut omega = 1.0;
        for _ in 0..200 {
            if r.abs() <= tol(s) {
                return Ok(s);
            }
            let cand = s - omega * r;
            let rc = g(cand)?;
            if rc.abs() < r.abs() {
                s = cand;
                r = rc;
                omega = (omega * 1.5).min(1.0);
            } else {
                omega *= 0.5;
                if omega < 1e-6 {
                    break;
                }
            }
        }

        // bisection fallback on [t, hi]
        let (lo, mut hi) = (t, t + 2.0 * (t - g_lo - t).max(self.nominal));
        let mut g_hi = g(hi)?;
        let mut grow = 0;
        while g_hi <= 0.0 {
            grow += 1;
            if grow > 60 {
                return Err(Error::NonInvertible {
                    lo,
                    hi,
                    reason: "could not bracket a root of σ − t − D̂ − δ(σ)".into(),
                });
            }
            hi = t + 2.0 * (hi - t);
            g_hi = g(hi)?;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let gm = g(mid)?;
            if gm.abs() <= tol(mid) {
                return Ok(mid);
            }
            if gm < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= f64::EPSILON * b.abs().max(1.0) {
                break;
            }
        }
        let root = 0.5 * (a + b);
        let res = g(root)?;
        if res.abs() <= 1e-10 * (1.0 + root.abs()) {
            Ok(root)
        } else {
            Err(Error::NonInvertible {
                lo: a,
                hi: b,
                reason: format!("σ equation has a discontinuous sign change (residual {res})"),
            })
        }
    }

    /// Check the well-posedness conditions of the actual predictor along a
    /// recorded run: `c > δ_t + ∇δ·f` and `D̂ + δ > 0`, both evaluated at
    /// `(σ(θ), P*(θ) = X(σ(θ)))` for every grid time `θ` whose `σ(θ)` is
    /// still inside the run.
    pub fn check_feasibility(&self, plant: &PlantModel, traj: &Trajectory, c: f64) -> Result<FeasibilityReport> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Parameter(format!("c must lie in (0, 1], got {c}")));
        }
        let hist = traj.input_history()?;
        let (n, m) = (traj.n, traj.m);
        let mut p = vec![0.0; n];
        let mut u = vec![0.0; m];
        let mut dx = vec![0.0; n];
        let mut report = FeasibilityReport {
            rate_margin: f64::INFINITY,
            delay_margin: f64::INFINITY,
            samples: 0,
            pass: false,
        };
        for k in 0..traj.len() {
            let theta = traj.time[k];
            let mut done = false;
            for ch in 0..m.max(1) {
                let scale = self.channel_scale(ch);
                let sigma = match self.predicted_time_channel(ch, theta, Some(traj)) {
                    Ok(s) if s <= traj.t_end() => s,
                    Ok(_) | Err(Error::Coverage { .. }) => {
                        done = true;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                traj.state_at(sigma, &mut p)?;
                let ev = self.eval(sigma, &p);
                let mut g = scale * ev.delta_t;
                if ev.grad.iter().any(|v| *v != 0.0) {
                    for (j, uj) in u.iter_mut().enumerate() {
                        let phi = self.delayed_time_channel(j, sigma, &p);
                        let mut v = [0.0];
                        if m == 1 {
                            v[0] = traj.u(k)[0];
                        } else {
                            hist.eval_into(phi, Side::Right, &mut v[..])?;
                        }
                        *uj = v[0];
                    }
                    plant.rhs(&p, &u, &mut dx);
                    g += scale * ev.grad.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
                }
                report.rate_margin = report.rate_margin.min(c - g);
                report.delay_margin = report.delay_margin.min(self.nominal + scale * ev.delta);
            }
            if done {
                break;
            }
            report.samples += 1;
        }
        if report.samples == 0 {
            return Err(Error::Coverage {
                need_start: traj.t0(),
                need_end: traj.t0() + self.nominal,
                have_start: traj.t0(),
                have_end: traj.t_end(),
            });
        }
        report.pass = report.rate_margin > 0.0 && report.delay_margin > 0.0;
        Ok(report)
    }

    /// Perturbation norms of a time-only `δ` over `[0, horizon]`.
    pub fn perturbation_metrics(
        &self,
        horizon: f64,
        step: f64,
        window: f64,
        start: f64,
    ) -> Result<PerturbationMetrics> {
        if !self.is_time_only() {
            return Err(Error::Parameter(
                "state-dependent delay: compute metrics from a trajectory".into(),
            ));
        }
        if !(horizon > 0.0 && step > 0.0) {
            return Err(Error::Parameter("horizon and step must be positive".into()));
        }
        let count = (horizon / step).round() as usize;
        let times: Vec<f64> = (0..=count).map(|k| k as f64 * horizon / count as f64).collect();
        let (vals, rates): (Vec<f64>, Vec<f64>) = times
            .iter()
            .map(|&t| {
                let e = self.eval(t, &[]);
                (e.delta, e.delta_t)
            })
            .unzip();
        PerturbationMetrics::from_samples(&times, &vals, &rates, window, start)
    }

    /// `π₀* = 1/sup(D̂ + δ)` and `π₁* = 1/sup(1 − δ')` over
    /// `[σ(0), horizon]`, sampled densely.
    pub fn assumption_constants(&self, horizon: f64) -> Result<AssumptionConstants> {
        if !self.is_time_only() {
            return Err(Error::Parameter(
                "assumption constants are defined for time-only perturbations".into(),
            ));
        }
        let from = self.predicted_time(0.0, None)?;
        if !(horizon > from) {
            return Err(Error::Parameter(format!(
                "horizon {horizon} does not reach past σ(0) = {from}"
            )));
        }
        let count = ((horizon - from) / 1e-3).ceil().max(1e4) as usize;
        let mut sup_total = f64::NEG_INFINITY;
        let mut sup_slope = f64::NEG_INFINITY;
        let mut min_total = f64::INFINITY;
        let mut max_rate = f64::NEG_INFINITY;
        for k in 0..=count {
            let t = from + (horizon - from) * k as f64 / count as f64;
            let e = self.eval(t, &[]);
            sup_total = sup_total.max(self.nominal + e.delta);
            min_total = min_total.min(self.nominal + e.delta);
            sup_slope = sup_slope.max(1.0 - e.delta_t);
            max_rate = max_rate.max(e.delta_t);
        }
        Ok(AssumptionConstants {
            pi0: 1.0 / sup_total,
            pi1: 1.0 / sup_slope,
            rate_below_one: max_rate < 1.0,
            delay_positive: min_total > 0.0,
            horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// `min (c − (δ_t + ∇δ·f))` along the run.
    pub rate_margin: f64,
    /// `min (D̂ + δ)` along the run.
    pub delay_margin: f64,
    /// Number of grid times evaluated.
    pub samples: usize,
    pub pass: bool,
}

/// Norms of `|δ| + |δ'|` used by the robustness conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationMetrics {
    /// `sup (|δ| + |δ'|)`
    pub sup_magnitude_plus_rate: f64,
    /// `∫ (|δ'| + |δ|)`
    pub l1_norm: f64,
    /// `sup (|δ| + |δ'|)` over the last quarter of the horizon
    pub tail_sup: f64,
    /// `max_{t ≥ T} (1/Δ) ∫_t^{t+Δ} (|δ'| + |δ|)`
    pub moving_average: f64,
    pub window: f64,
    pub start: f64,
}

impl PerturbationMetrics {
    /// Metrics from samples of `δ` and `δ'` on an increasing grid, by
    /// composite trapezoid quadrature.
    pub fn from_samples(times: &[f64], delta: &[f64], rate: &[f64], window: f64, start: f64) -> Result<Self> {
        if !(window > 0.0) {
            return Err(Error::Parameter(format!("window Δ must be positive, got {window}")));
        }
        if !(start >= 0.0) {
            return Err(Error::Parameter(format!("start T must be nonnegative, got {start}")));
        }
        if times.len() < 2 || delta.len() != times.len() || rate.len() != times.len() {
            return Err(Error::Parameter("metrics need matching samples (≥ 2)".into()));
        }
        let g: Vec<f64> = delta.iter().zip(rate).map(|(d, r)| d.abs() + r.abs()).collect();
        let mut cumulative = vec![0.0; g.len()];
        for k in 1..g.len() {
            cumulative[k] = cumulative[k - 1] + 0.5 * (times[k] - times[k - 1]) * (g[k] + g[k - 1]);
        }
        let (t0, t_end) = (times[0], *times.last().unwrap());
        let tail_from = t_end - 0.25 * (t_end - t0);
        let sup = g.iter().copied().fold(0.0, f64::max);
        let tail_sup = times
            .iter()
            .zip(&g)
            .filter(|(t, _)| **t >= tail_from)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);

        let cum_at = |t: f64| {
            let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            cumulative[k - 1] + w * (cumulative[k] - cumulative[k - 1])
        };
        let tol = 1e-9 * t_end.abs().max(1.0);
        let mut moving = f64::NEG_INFINITY;
        for (k, &t) in times.iter().enumerate() {
            if t + tol < start {
                continue;
            }
            if t + window > t_end + tol {
                break;
            }
            let avg = (cum_at((t + window).min(t_end)) - cumulative[k]) / window;
            moving = moving.max(avg);
        }
        if moving == f64::NEG_INFINITY {
            return Err(Error::Parameter(format!(
                "no averaging window [t, t+{window}] with t ≥ {start} fits in [{t0}, {t_end}]"
            )));
        }
        Ok(Self {
            sup_magnitude_plus_rate: sup,
            l1_norm: *cumulative.last().unwrap(),
            tail_sup,
            moving_average: moving,
            window,
            start,
        })
    }

    /// Metrics of the `δ` channel recorded along a run; `δ'` by central
    /// differences.
    pub fn from_trajectory(traj: &Trajectory, window: f64, start: f64) -> Result<Self> {
        let rate = central_differences(&traj.time, &traj.delta);
        Self::from_samples(&traj.time, &traj.delta, &rate, window, start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    /// `1 / sup (D̂ + δ)`
    pub pi0: f64,
    /// `1 / sup (1 − δ')`
    pub pi1: f64,
    /// `δ' < 1` on the sampled horizon
    pub rate_below_one: bool,
    /// `D̂ + δ > 0` on the sampled horizon
    pub delay_positive: bool,
    /// Suprema are taken over this truncated horizon only.
    pub horizon: f64,
}
