//! Linear-case analysis: backstepping transform, observer error, the
//! Lyapunov functional `V_L`, the norms `Π_L` and `Γ_L`, and empirical
//! decay envelopes.

use nalgebra::DMatrix;

use crate::delay::{central_differences, DelayModel};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::history::{InputHistory, Side};
use crate::linalg;
use crate::predictor::{ControllerSpec, LinearMarch};
use crate::trajectory::Trajectory;

/// Constants of `V_L = XᵀPX + b₁∫e^{bx}ũ² + D̂b₂∫(1+x)ŵ² + D̂b₂∫(1+x)ŵ_x²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovConfig {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
    pub nominal_delay: f64,
    /// Residual of `(A+BK)ᵀP + P(A+BK) + Q`, relative to `|Q|`.
    pub residual: f64,
}

/// `P` from the Lyapunov equation of `A + BK`, then
/// `b = (1 − π₁**)·max{1, 1/π₁**} + 1`, `b₂ = 8|PB|/λ_min(Q)` and
/// `b₁ = b₂(1 + 8D̂²|K|e^{|A|D̂}|B|²(2 + |A|²))`.
pub fn make_lyapunov_config(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    nominal_delay: f64,
    pi1: f64,
) -> Result<LyapunovConfig> {
    if !(pi1 > 0.0 && pi1 <= 1.0) {
        return Err(Error::Parameter(format!("π₁** must lie in (0, 1], got {pi1}")));
    }
    if !(nominal_delay > 0.0) {
        return Err(Error::Parameter("nominal delay must be positive".into()));
    }
    let closed = a + b * k;
    let max_real = linalg::max_real_eigenvalue(&closed);
    if !(max_real < 0.0) {
        return Err(Error::NotHurwitz { max_real });
    }
    if (q - q.transpose()).norm() > 1e-12 * q.norm() {
        return Err(Error::Parameter("Q must be symmetric".into()));
    }
    let q_min = linalg::min_symmetric_eigenvalue(q);
    if !(q_min > 0.0) {
        return Err(Error::Parameter(format!(
            "Q must be positive definite, smallest eigenvalue {q_min}"
        )));
    }
    let p = linalg::solve_lyapunov(&closed, q)?;
    let residual = linalg::lyapunov_residual(&closed, &p, q);
    if !(residual <= 1e-10) {
        return Err(Error::Linalg(format!("Lyapunov residual {residual:e} exceeds 1e-10")));
    }
    let norm_a = linalg::spectral_norm(a);
    let norm_b = linalg::spectral_norm(b);
    let norm_k = linalg::spectral_norm(k);
    let d = nominal_delay;
    let b_const = (1.0 - pi1) * f64::max(1.0, 1.0 / pi1) + 1.0;
    let b2 = 8.0 * linalg::spectral_norm(&(&p * b)) / q_min;
    let b1 = b2 * (1.0 + 8.0 * d * d * norm_k * (norm_a * d).exp() * norm_b * norm_b * (2.0 + norm_a * norm_a));
    Ok(LyapunovConfig {
        p,
        q: q.clone(),
        b: b_const,
        b1,
        b2,
        nominal_delay,
        residual,
    })
}

/// `ŵ(x) = û(x) − K e^{AD̂x} X − D̂K ∫_0^x e^{AD̂(x−y)} B û(y) dy`.
pub fn backstep(
    x: &[f64],
    uhat: &GridFunction,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    nominal_delay: f64,
) -> GridFunction {
    let march = LinearMarch::new(a, b, nominal_delay, uhat.cells());
    transform(x, uhat, k, &march, -1.0)
}

/// `û(x) = ŵ(x) + K e^{(A+BK)D̂x} X + D̂K ∫_0^x e^{(A+BK)D̂(x−y)} B ŵ(y) dy`.
pub fn inverse_backstep(
    x: &[f64],
    w: &GridFunction,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    nominal_delay: f64,
) -> GridFunction {
    let closed = a + b * k;
    let march = LinearMarch::new(&closed, b, nominal_delay, w.cells());
    transform(x, w, k, &march, 1.0)
}

fn transform(x: &[f64], v: &GridFunction, k: &DMatrix<f64>, march: &LinearMarch, sign: f64) -> GridFunction {
    let q = march.solve(x, v);
    let m = v.dim();
    let mut out = v.clone();
    out.set_jump(None);
    for i in 0..=v.cells() {
        let qi = q.value(i);
        let row = out.value_mut(i);
        for r in 0..m {
            let kq: f64 = (0..qi.len()).map(|c| k[(r, c)] * qi[c]).sum();
            row[r] += sign * kq;
        }
    }
    out
}

/// Arrival time of the control issued at `t` on `channel`, `σ(t)`; needs a
/// time-only perturbation.
fn sigma(delay: &DelayModel, channel: usize, t: f64) -> Result<f64> {
    if !delay.is_time_only() {
        return Err(Error::Parameter(
            "the actuator state is evaluated for time-only perturbations".into(),
        ));
    }
    delay.predicted_time_channel(channel, t, None)
}

/// Actual actuator state `u(x, t) = U(φ(t + x(σ(t) − t)))` on `M + 1`
/// nodes; `u(1, t) = U(t)` is copied, not recomputed.
pub fn actuator_state(hist: &InputHistory, delay: &DelayModel, t: f64, cells: usize) -> Result<GridFunction> {
    let m = hist.dim();
    let mut out = GridFunction::zeros(m, cells);
    let mut buf = vec![0.0; m];
    for j in 0..m {
        let s = sigma(delay, j, t)?;
        for i in 0..=cells {
            if i == cells {
                hist.eval_into(t, Side::Right, &mut buf)?;
            } else {
                let x = i as f64 / cells as f64;
                let arg = t + x * (s - t);
                hist.eval_into(delay.delayed_time_channel(j, arg, &[]), Side::Right, &mut buf)?;
            }
            out.value_mut(i)[j] = buf[j];
        }
    }
    Ok(out)
}

/// `ũ = u − û` with `ũ(1, t) = 0` exactly.
pub fn observer_error(u: &GridFunction, uhat: &GridFunction) -> GridFunction {
    let mut out = GridFunction::zeros(u.dim(), u.cells());
    for i in 0..u.cells() {
        for (o, (a, b)) in out.value_mut(i).iter_mut().zip(u.value(i).iter().zip(uhat.value(i))) {
            *o = a - b;
        }
    }
    out
}

/// `ũ(·, t)` read off a recorded run.
pub fn observer_error_at(traj: &Trajectory, delay: &DelayModel, t: f64, cells: usize) -> Result<GridFunction> {
    let hist = traj.input_history()?;
    let u = actuator_state(&hist, delay, t, cells)?;
    let uhat = hist.observer_grid(t, delay.nominal, cells)?;
    Ok(observer_error(&u, &uhat))
}

/// `V_L` by trapezoid quadrature; `ŵ_x` by grid differences.
pub fn lyapunov_value(x: &[f64], w: &GridFunction, u_tilde: &GridFunction, cfg: &LyapunovConfig) -> f64 {
    let n = x.len();
    let mut xpx = 0.0;
    for i in 0..n {
        for j in 0..n {
            xpx += x[i] * cfg.p[(i, j)] * x[j];
        }
    }
    let wx = w.derivative();
    let b = cfg.b;
    xpx + cfg.b1 * u_tilde.weighted_square_integral(|s| (b * s).exp())
        + cfg.nominal_delay * cfg.b2 * w.weighted_square_integral(|s| 1.0 + s)
        + cfg.nominal_delay * cfg.b2 * wx.weighted_square_integral(|s| 1.0 + s)
}

/// `Γ_L = |X|² + ∫u² + ∫û² + ∫û_x²`.
pub fn norm_gamma_l(x: &[f64], u: &GridFunction, uhat: &GridFunction, uhat_x: &GridFunction) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() + u.square_integral() + uhat.square_integral() + uhat_x.square_integral()
}

/// Input record split at the start-time discontinuity, with cumulative
/// trapezoid integrals of `|U|²` and `|U̇|²` on each piece.
#[derive(Debug, Clone)]
pub struct InputSeries {
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone)]
struct Piece {
    t: Vec<f64>,
    sq: Vec<f64>,
    dsq: Vec<f64>,
}

impl Piece {
    fn new(t: Vec<f64>, u: Vec<Vec<f64>>, m: usize) -> Self {
        let len = t.len();
        let mut rate_sq = vec![0.0; len];
        if len >= 2 {
            for c in 0..m {
                let col: Vec<f64> = u.iter().map(|v| v[c]).collect();
                let d = central_differences(&t, &col);
                for (r, dv) in rate_sq.iter_mut().zip(d) {
                    *r += dv * dv;
                }
            }
        }
        let sq_vals: Vec<f64> = u.iter().map(|v| v.iter().map(|a| a * a).sum()).collect();
        let cum = |vals: &[f64]| {
            let mut c = vec![0.0; len];
            for k in 1..len {
                c[k] = c[k - 1] + 0.5 * (t[k] - t[k - 1]) * (vals[k] + vals[k - 1]);
            }
            c
        };
        Self {
            sq: cum(&sq_vals),
            dsq: cum(&rate_sq),
            t,
        }
    }

    fn integral(&self, cum: &[f64], a: f64, b: f64) -> f64 {
        let (lo, hi) = (self.t[0], *self.t.last().unwrap());
        let (a, b) = (a.max(lo), b.min(hi));
        if !(b > a) {
            return 0.0;
        }
        let at = |s: f64| {
            let k = self.t.partition_point(|&v| v <= s).clamp(1, self.t.len() - 1);
            let w = (s - self.t[k - 1]) / (self.t[k] - self.t[k - 1]);
            cum[k - 1] + w * (cum[k] - cum[k - 1])
        };
        at(b) - at(a)
    }
}

impl InputSeries {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let m = traj.m;
        let mut pieces = Vec::new();
        if traj.initial_input.len() >= 2 {
            let (t, u): (Vec<f64>, Vec<Vec<f64>>) = traj.initial_input.iter().cloned().unzip();
            pieces.push(Piece::new(t, u, m));
        }
        let u: Vec<Vec<f64>> = (0..traj.len()).map(|k| traj.u(k).to_vec()).collect();
        pieces.push(Piece::new(traj.time.clone(), u, m));
        Self { pieces }
    }

    pub fn start(&self) -> f64 {
        self.pieces[0].t[0]
    }

    pub fn end(&self) -> f64 {
        *self.pieces.last().unwrap().t.last().unwrap()
    }

    /// `∫_a^b |U|²`.
    pub fn square_integral(&self, a: f64, b: f64) -> f64 {
        self.pieces.iter().map(|p| p.integral(&p.sq, a, b)).sum()
    }

    /// `∫_a^b |U̇|²`, excluding the discontinuity itself.
    pub fn rate_square_integral(&self, a: f64, b: f64) -> f64 {
        self.pieces.iter().map(|p| p.integral(&p.dsq, a, b)).sum()
    }

    /// `Π_L(t)` given `|X(t)|²` and the largest scaled `δ(t)`.
    pub fn pi_l(&self, x_sq: f64, t: f64, nominal_delay: f64, delta: f64) -> Result<f64> {
        let from = t - nominal_delay - delta.max(0.0);
        let tol = 1e-9 * t.abs().max(1.0);
        if from < self.start() - tol || t > self.end() + tol {
            return Err(Error::Coverage {
                need_start: from,
                need_end: t,
                have_start: self.start(),
                have_end: self.end(),
            });
        }
        Ok(x_sq + self.square_integral(from, t) + self.rate_square_integral(t - nominal_delay, t))
    }
}

/// `Π_L(t) = |X(t)|² + ∫_{t−D̂−max{0,δ}}^t U² + ∫_{t−D̂}^t U̇²`.
pub fn norm_pi_l(traj: &Trajectory, delay: &DelayModel, t: f64) -> Result<f64> {
    let series = InputSeries::from_trajectory(traj);
    let k = traj.index_of(t);
    let delta = scaled_delta(delay, traj.m, traj.delta[k]);
    series.pi_l(traj.state_norm(k).powi(2), traj.time[k], delay.nominal, delta)
}

fn scaled_delta(delay: &DelayModel, m: usize, delta: f64) -> f64 {
    (0..m).map(|j| delay.channel_scale(j) * delta).fold(0.0, f64::max)
}

/// Transport speed `π(x, t) = (1 + x(σ̇ − 1)) / (σ − t)` of the perturbed
/// actuator state, with `σ̇ = 1/(1 − δ'(σ))`.
pub fn transport_speed(delay: &DelayModel, t: f64, x: f64) -> Result<f64> {
    let s = sigma(delay, 0, t)?;
    let rate = delay.eval(s, &[]).delta_t;
    if !(rate < 1.0) {
        return Err(Error::NonInvertible {
            lo: t,
            hi: s,
            reason: format!("δ'(σ) = {rate} ≥ 1"),
        });
    }
    let sigma_dot = 1.0 / (1.0 - rate);
    Ok((1.0 + x * (sigma_dot - 1.0)) / (s - t))
}

/// `γ(t) = max{|δ(σ)|, |δ(σ)(1 − δ'(σ)) − D̂δ'(σ)|}`.
pub fn gamma(delay: &DelayModel, t: f64) -> Result<f64> {
    let s = sigma(delay, 0, t)?;
    let e = delay.eval(s, &[]);
    let d = delay.nominal;
    Ok(e.delta.abs().max((e.delta * (1.0 - e.delta_t) - d * e.delta_t).abs()))
}

/// `γ(t) = max_x |1/π(x, t) − D̂|`; `1/π` is monotone in `x`, so the
/// extremes sit at the ends.
pub fn gamma_from_speed(delay: &DelayModel, t: f64) -> Result<f64> {
    let d = delay.nominal;
    let g0 = (1.0 / transport_speed(delay, t, 0.0)? - d).abs();
    let g1 = (1.0 / transport_speed(delay, t, 1.0)? - d).abs();
    Ok(g0.max(g1))
}

/// Every quantity of the transformed system at one time of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedState {
    pub w: GridFunction,
    pub w_x: GridFunction,
    pub u_tilde: GridFunction,
    pub x_norm: f64,
    pub v_l: f64,
    pub pi_l: f64,
    pub gamma_l: f64,
    pub gamma: f64,
}

pub fn transformed_state(
    traj: &Trajectory,
    spec: &ControllerSpec,
    delay: &DelayModel,
    cfg: &LyapunovConfig,
    t: f64,
) -> Result<TransformedState> {
    let g = spec
        .gains()
        .ok_or_else(|| Error::Parameter("the transformed state needs a linear controller".into()))?;
    let hist = traj.input_history()?;
    let series = InputSeries::from_trajectory(traj);
    let k = traj.index_of(t);
    let t = traj.time[k];
    let x = traj.x(k);
    let uhat = hist.observer_grid(t, spec.nominal_delay, spec.grid)?;
    let u = actuator_state(&hist, delay, t, spec.grid)?;
    let u_tilde = observer_error(&u, &uhat);
    let w = backstep(x, &uhat, &g.a, &g.b, &g.k, spec.nominal_delay);
    let x_sq = traj.state_norm(k).powi(2);
    Ok(TransformedState {
        w_x: w.derivative(),
        v_l: lyapunov_value(x, &w, &u_tilde, cfg),
        pi_l: series.pi_l(x_sq, t, delay.nominal, scaled_delta(delay, traj.m, traj.delta[k]))?,
        gamma_l: norm_gamma_l(x, &u, &uhat, &uhat.derivative()),
        gamma: gamma(delay, t)?,
        x_norm: x_sq.sqrt(),
        w,
        u_tilde,
    })
}

/// Append `VL` and `PiL` channels to a linear run. `π₁**` is estimated on
/// the run's own horizon; `Q = I`.
pub fn attach_diagnostics(traj: &mut Trajectory, spec: &ControllerSpec, delay: &DelayModel) -> Result<()> {
    let Some(g) = spec.gains() else {
        return Ok(());
    };
    if traj.is_empty() || !delay.is_time_only() {
        return Ok(());
    }
    let pi1 = match delay.assumption_constants(traj.t_end().max(traj.t0() + 1.0) + 2.0 * delay.nominal) {
        Ok(c) => c.pi1.min(1.0),
        Err(_) => 1.0,
    };
    let n = traj.n;
    let cfg = make_lyapunov_config(&g.a, &g.b, &g.k, &DMatrix::identity(n, n), spec.nominal_delay, pi1)?;
    let hist = traj.input_history()?;
    let series = InputSeries::from_trajectory(traj);
    let march = LinearMarch::new(&g.a, &g.b, spec.nominal_delay, spec.grid);
    let mut vl = Vec::with_capacity(traj.len());
    let mut pil = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let t = traj.time[k];
        let x = traj.x(k);
        let uhat = hist.observer_grid(t, spec.nominal_delay, spec.grid)?;
        let u = actuator_state(&hist, delay, t, spec.grid)?;
        let w = transform(x, &uhat, &g.k, &march, -1.0);
        vl.push(lyapunov_value(x, &w, &observer_error(&u, &uhat), &cfg));
        let delta = scaled_delta(delay, traj.m, traj.delta[k]);
        pil.push(series.pi_l(traj.state_norm(k).powi(2), t, delay.nominal, delta)?);
    }
    traj.diagnostics.push(("VL".into(), vl));
    traj.diagnostics.push(("PiL".into(), pil));
    Ok(())
}

/// Exponential envelope `v ≈ R v₀ e^{−λ(t − t₀)}` from a log-linear
/// least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub r: f64,
    pub lambda: f64,
    /// RMS residual of the fit in `log v`.
    pub residual: f64,
}

pub fn decay_fit(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 10 {
        return Err(Error::Parameter("decay fit needs at least 10 (t, v) pairs".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!("decay fit needs positive values, found {v}")));
    }
    let n = times.len() as f64;
    let t0 = times[0];
    let ts: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (mt, my) = (ts.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Parameter("decay fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let residual = (ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        r: (intercept - ys[0]).exp(),
        lambda: -slope,
        residual,
    })
}
