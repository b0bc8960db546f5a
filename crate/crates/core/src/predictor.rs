//! Certainty-equivalence predictors and predictor-feedback laws.
//!
//! Both predictor paths march the spatial form of the predictor,
//! `dp̂/dx = D̂ f(p̂, û(x))`, `p̂(0) = X`, across the observer grid. The
//! linear path integrates each cell exactly against the linear interpolant
//! of `û`; the nonlinear path uses classical fourth-order stages.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::history::{InputHistory, Side};
use crate::linalg::{self, HoldWeights};
use crate::trajectory::Trajectory;

/// `f(X, u, out)` writes `Ẋ` into `out`.
pub type VectorField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Nominal law `κ(t, X, out)`; may fail outside its domain.
pub type NominalLaw = Arc<dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync>;

#[derive(Clone)]
pub struct PlantModel {
    n: usize,
    m: usize,
    f: VectorField,
    equilibrium: Option<Vec<f64>>,
    linear: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("equilibrium", &self.equilibrium)
            .field("linear", &self.linear.is_some())
            .finish()
    }
}

impl PlantModel {
    /// Plant `Ẋ = f(X, u)` in coordinates where the origin is an
    /// equilibrium; `f(0, 0) = 0` is checked to within `1e-12`.
    pub fn new(n: usize, m: usize, f: VectorField) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Dimension("state and input dimensions must be positive".into()));
        }
        let mut out = vec![0.0; n];
        f(&vec![0.0; n], &vec![0.0; m], &mut out);
        let r = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(r <= 1e-12) {
            return Err(Error::Parameter(format!(
                "f(0, 0) must vanish in shifted coordinates, |f(0,0)| = {r:e}"
            )));
        }
        Ok(Self {
            n,
            m,
            f,
            equilibrium: None,
            linear: None,
        })
    }

    /// `Ẋ = AX + Bu`.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "A must be n×n and B n×m, got {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let m = b.ncols();
        let (a2, b2) = (a.clone(), b.clone());
        let f: VectorField = Arc::new(move |x, u, out| {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += a2[(i, j)] * x[j];
                }
                for j in 0..m {
                    s += b2[(i, j)] * u[j];
                }
                out[i] = s;
            }
        });
        let mut p = Self::new(n, m, f)?;
        p.linear = Some((a, b));
        Ok(p)
    }

    /// Record the equilibrium in the original (unshifted) coordinates.
    pub fn with_equilibrium(mut self, eq: Vec<f64>) -> Self {
        self.equilibrium = Some(eq);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn equilibrium(&self) -> Option<&[f64]> {
        self.equilibrium.as_deref()
    }

    /// `(A, B)` when the plant was built with [`PlantModel::linear`].
    pub fn linear_parts(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        self.linear.as_ref().map(|(a, b)| (a, b))
    }

    pub fn rhs(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.f)(x, u, out)
    }
}

/// Linear gain data `(A, B, K)` with the exact-march cache.
#[derive(Debug, Clone)]
pub struct LinearGains {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub k: DMatrix<f64>,
    kernel: LinearMarch,
}

#[derive(Clone)]
pub enum ControllerKind {
    Linear(LinearGains),
    Nonlinear(NominalLaw),
}

impl fmt::Debug for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear(g) => f.debug_tuple("Linear").field(g).finish(),
            Self::Nonlinear(_) => write!(f, "Nonlinear"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    /// Nominal delay `D̂`.
    pub nominal_delay: f64,
    /// Spatial grid size `M` of the predictor.
    pub grid: usize,
}

impl ControllerSpec {
    /// `U = K P̂` with `P̂` the exact linear predictor. `A + BK` must be
    /// Hurwitz.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>, k: DMatrix<f64>, nominal_delay: f64, grid: usize) -> Result<Self> {
        check_common(nominal_delay, grid)?;
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || k.shape() != (b.ncols(), n) {
            return Err(Error::Dimension(format!(
                "need A n×n, B n×m, K m×n; got {:?}, {:?}, {:?}",
                a.shape(),
                b.shape(),
                k.shape()
            )));
        }
        let closed = &a + &b * &k;
        let max_real = linalg::max_real_eigenvalue(&closed);
        if !(max_real < 0.0) {
            return Err(Error::NotHurwitz { max_real });
        }
        let kernel = LinearMarch::new(&a, &b, nominal_delay, grid);
        Ok(Self {
            kind: ControllerKind::Linear(LinearGains { a, b, k, kernel }),
            nominal_delay,
            grid,
        })
    }

    /// `U(t) = κ(t + D̂, P̂(t))` with `P̂` from the nonlinear march.
    pub fn nonlinear(law: NominalLaw, nominal_delay: f64, grid: usize) -> Result<Self> {
        check_common(nominal_delay, grid)?;
        Ok(Self {
            kind: ControllerKind::Nonlinear(law),
            nominal_delay,
            grid,
        })
    }

    pub fn gains(&self) -> Option<&LinearGains> {
        match &self.kind {
            ControllerKind::Linear(g) => Some(g),
            ControllerKind::Nonlinear(_) => None,
        }
    }

    /// Same controller on a different grid or nominal delay.
    pub fn rebuilt(&self, nominal_delay: f64, grid: usize) -> Result<Self> {
        match &self.kind {
            ControllerKind::Linear(g) => Self::linear(g.a.clone(), g.b.clone(), g.k.clone(), nominal_delay, grid),
            ControllerKind::Nonlinear(law) => Self::nonlinear(law.clone(), nominal_delay, grid),
        }
    }

    /// Predictor and control from the observer grid `û(·, t)`.
    pub fn control(
        &self,
        plant: &PlantModel,
        x: &[f64],
        observer: &GridFunction,
        t: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            ControllerKind::Linear(g) => {
                let p = g.kernel.terminal(x, observer);
                let u = apply_gain(&g.k, &p);
                Ok((p, u))
            }
            ControllerKind::Nonlinear(law) => {
                let pred = march(plant, x, observer, self.nominal_delay)?;
                let p = pred.terminal().to_vec();
                let mut u = vec![0.0; plant.m()];
                nonlinear_control(&pred, law, t, self.nominal_delay, &mut u)?;
                Ok((p, u))
            }
        }
    }
}

fn check_common(nominal_delay: f64, grid: usize) -> Result<()> {
    if !(nominal_delay > 0.0) {
        return Err(Error::Parameter(format!(
            "nominal delay must be positive, got {nominal_delay}"
        )));
    }
    if grid < 8 {
        return Err(Error::Parameter(format!("predictor grid M must be >= 8, got {grid}")));
    }
    Ok(())
}

fn apply_gain(k: &DMatrix<f64>, p: &[f64]) -> Vec<f64> {
    (k * DVector::from_column_slice(p)).as_slice().to_vec()
}

/// Exact cell-by-cell solution of `dq/dx = D̂(F q + G v(x))` for `v`
/// linear on each cell. With `F = A` this is the linear predictor; with
/// `F = A + BK` it is the kernel of the inverse backstepping transform.
#[derive(Debug, Clone)]
pub struct LinearMarch {
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    d_hat: f64,
    cells: usize,
    full: CellWeights,
}

#[derive(Debug, Clone)]
struct CellWeights {
    transition: DMatrix<f64>,
    far: DMatrix<f64>,
    near: DMatrix<f64>,
}

impl CellWeights {
    fn new(f: &DMatrix<f64>, g: &DMatrix<f64>, d_hat: f64, width: f64) -> Self {
        let HoldWeights { transition, far, near } = linalg::hold_weights(&(f * d_hat), width);
        Self {
            transition,
            far: far * g * d_hat,
            near: near * g * d_hat,
        }
    }

    fn step(&self, q: &[f64], v0: &[f64], v1: &[f64], out: &mut [f64]) {
        let n = q.len();
        let mv = |m: &DMatrix<f64>, v: &[f64], i: usize| -> f64 { (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum() };
        for (i, o) in out.iter_mut().enumerate().take(n) {
            *o = mv(&self.transition, q, i) + mv(&self.far, v0, i) + mv(&self.near, v1, i);
        }
    }
}

impl LinearMarch {
    pub fn new(f: &DMatrix<f64>, g: &DMatrix<f64>, d_hat: f64, cells: usize) -> Self {
        let full = CellWeights::new(f, g, d_hat, 1.0 / cells as f64);
        Self {
            f: f.clone(),
            g: g.clone(),
            d_hat,
            cells,
            full,
        }
    }

    /// `q(x_i)` at every node, starting from `q(0) = q0`.
    pub fn solve(&self, q0: &[f64], v: &GridFunction) -> GridFunction {
        let n = q0.len();
        let mut out = GridFunction::zeros(n, v.cells());
        out.value_mut(0).copy_from_slice(q0);
        let mut cur = q0.to_vec();
        let mut next = vec![0.0; n];
        let mut node = 0usize;
        let mut pos = 0.0;
        let full_width = 1.0 / v.cells() as f64;
        v.for_each_segment(|s| {
            let w = s.x1 - s.x0;
            if v.cells() == self.cells && (w - full_width).abs() <= 1e-12 * full_width {
                self.full.step(&cur, s.v0, s.v1, &mut next);
            } else {
                CellWeights::new(&self.f, &self.g, self.d_hat, w).step(&cur, s.v0, s.v1, &mut next);
            }
            std::mem::swap(&mut cur, &mut next);
            pos = s.x1;
            // a segment ends on a node unless it stops at an interior jump
            let i = (pos * v.cells() as f64).round() as usize;
            if (v.node(i) - pos).abs() <= 1e-12 && i > node {
                node = i;
                out.value_mut(i).copy_from_slice(&cur);
            }
        });
        out
    }

    /// `q(1)` only.
    pub fn terminal(&self, q0: &[f64], v: &GridFunction) -> Vec<f64> {
        let sol = self.solve(q0, v);
        sol.value(sol.cells()).to_vec()
    }
}

/// Predictor values `p̂(x_i, t)` on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub grid: GridFunction,
}

impl PredictorState {
    /// `P̂(t) = p̂(1, t)`.
    pub fn terminal(&self) -> &[f64] {
        self.grid.value(self.grid.cells())
    }
}

/// Standard linear predictor
/// `P̂ = e^{AD̂} X + ∫_{t−D̂}^t e^{A(t−θ)} B U(θ) dθ` and `U = K P̂`.
pub fn linear_predictor(
    x: &[f64],
    history: &InputHistory,
    spec: &ControllerSpec,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = spec
        .gains()
        .ok_or_else(|| Error::Parameter("linear_predictor needs a linear controller".into()))?;
    let obs = history.observer_grid(t, spec.nominal_delay, spec.grid)?;
    let p = g.kernel.terminal(x, &obs);
    let u = apply_gain(&g.k, &p);
    Ok((p, u))
}

/// `p̂(x) = X + D̂ ∫_0^x f(p̂(y), û(y)) dy` by a fourth-order march.
pub fn nonlinear_predictor(
    x: &[f64],
    observer: &GridFunction,
    plant: &PlantModel,
    spec: &ControllerSpec,
) -> Result<PredictorState> {
    if observer.cells() != spec.grid {
        return Err(Error::Dimension(format!(
            "observer grid has {} cells, controller expects {}",
            observer.cells(),
            spec.grid
        )));
    }
    march(plant, x, observer, spec.nominal_delay)
}

fn march(plant: &PlantModel, x: &[f64], obs: &GridFunction, d_hat: f64) -> Result<PredictorState> {
    let n = plant.n();
    if x.len() != n || obs.dim() != plant.m() {
        return Err(Error::Dimension(format!(
            "state has {} entries, observer {}; plant is {}×{}",
            x.len(),
            obs.dim(),
            n,
            plant.m()
        )));
    }
    let m = plant.m();
    let mut out = GridFunction::zeros(n, obs.cells());
    out.value_mut(0).copy_from_slice(x);
    let mut p = x.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut umid = vec![0.0; m];
    let mut node = 0usize;
    let mut failure = None;
    obs.for_each_segment(|s| {
        if failure.is_some() {
            return;
        }
        let w = d_hat * (s.x1 - s.x0);
        for j in 0..m {
            umid[j] = 0.5 * (s.v0[j] + s.v1[j]);
        }
        plant.rhs(&p, s.v0, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * w * k1[i];
        }
        plant.rhs(&tmp, &umid, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * w * k2[i];
        }
        plant.rhs(&tmp, &umid, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + w * k3[i];
        }
        plant.rhs(&tmp, s.v1, &mut k4);
        for i in 0..n {
            p[i] += w / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if p.iter().any(|v| !v.is_finite()) {
            failure = Some(s.x1);
            return;
        }
        let i = (s.x1 * obs.cells() as f64).round() as usize;
        if (obs.node(i) - s.x1).abs() <= 1e-12 && i > node {
            node = i;
            out.value_mut(i).copy_from_slice(&p);
        }
    });
    if let Some(x) = failure {
        return Err(Error::Divergence { x });
    }
    Ok(PredictorState { grid: out })
}

/// `U(t) = κ(t + D̂, P̂(t))`.
pub fn nonlinear_control(pred: &PredictorState, law: &NominalLaw, t: f64, d_hat: f64, out: &mut [f64]) -> Result<()> {
    let p = pred.terminal();
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { x: 1.0 });
    }
    law(t + d_hat, p, out)
}

/// The actual predictor `P*(θ) = X(σ(θ))` on `θ ∈ [φ(t), t]`, read off a
/// recorded run, and the residual of its integral equation
/// `P*(θ) = X(t) + ∫_{φ(t)}^θ f(P*(s), U(s)) / (1 − G(s)) ds`
/// with `G = δ_t + ∇δ·f` at `(σ(s), P*(s))`.
///
/// Multi-input plants use channel 0's delay for `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActualPredictor {
    pub theta: Vec<f64>,
    /// Row-major, `n` entries per `θ`.
    pub pstar: Vec<f64>,
    pub residual: f64,
}

pub fn actual_predictor_diagnostic(
    traj: &Trajectory,
    plant: &PlantModel,
    delay: &DelayModel,
    t: f64,
) -> Result<ActualPredictor> {
    let n = traj.n;
    let hist = traj.input_history()?;
    let mut xt = vec![0.0; n];
    traj.state_at(t, &mut xt)?;
    let phi = delay.delayed_time(t, &xt);
    if !(phi < t) {
        return Err(Error::NonInvertible {
            lo: phi,
            hi: t,
            reason: "total delay is not positive".into(),
        });
    }
    // nodes on the run's time grid, so the interpolated input is linear between them
    let (t0, h) = (traj.t0(), traj.step);
    let first = ((phi - t0) / h).floor() as i64 + 1;
    let mut theta = vec![phi];
    let mut k = first;
    loop {
        let th = t0 + k as f64 * h;
        if th >= t - 1e-9 * h {
            break;
        }
        if th > phi + 1e-9 * h {
            theta.push(th);
        }
        k += 1;
    }
    theta.push(t);
    // the state has a derivative jump wherever a delayed argument meets the input jump
    let kinks: Vec<f64> = match hist.jump_time() {
        Some(tj) => (0..traj.m)
            .filter_map(|j| delay.predicted_time_channel(j, tj, Some(traj)).ok())
            .collect(),
        None => Vec::new(),
    };
    let mut pstar = vec![0.0; n * theta.len()];
    // integrand with the input read from the left and from the right of each node
    let mut left = vec![0.0; n * theta.len()];
    let mut right = vec![0.0; n * theta.len()];
    let mut u = vec![0.0; traj.m];
    let mut fx = vec![0.0; n];
    for (i, &th) in theta.iter().enumerate() {
        let p = &mut pstar[i * n..(i + 1) * n];
        // σ(φ(t)) = t: the first point is read back exactly
        let s = if i == 0 {
            p.copy_from_slice(&xt);
            t
        } else {
            let s = delay.predicted_time(th, Some(traj))?;
            cubic_state(traj, s, &kinks, p)?;
            s
        };
        for (side, out) in [(Side::Left, &mut left), (Side::Right, &mut right)] {
            hist.eval_into(th, side, &mut u)?;
            plant.rhs(p, &u, &mut fx);
            let ev = delay.eval(s, p);
            let g = ev.delta_t + ev.grad.iter().zip(&fx).map(|(a, b)| a * b).sum::<f64>();
            for k in 0..n {
                out[i * n + k] = fx[k] / (1.0 - g);
            }
        }
    }
    let mut acc = vec![0.0; n];
    let mut residual: f64 = 0.0;
    for i in 1..theta.len() {
        let h = theta[i] - theta[i - 1];
        for k in 0..n {
            acc[k] += 0.5 * h * (right[(i - 1) * n + k] + left[i * n + k]);
            residual = residual.max((pstar[i * n + k] - xt[k] - acc[k]).abs());
        }
    }
    Ok(ActualPredictor { theta, pstar, residual })
}

/// Cubic Lagrange reading of the state through four nearby samples, taken
/// from one side of any kink so the stencil never straddles one.
fn cubic_state(traj: &Trajectory, t: f64, kinks: &[f64], out: &mut [f64]) -> Result<()> {
    traj.state_at(t, out)?;
    let len = traj.len();
    if len < 4 {
        return Ok(());
    }
    let (t0, h) = (traj.t0(), traj.step);
    let s = (t - t0) / h;
    let mut lo = 0usize;
    let mut hi = len - 1;
    for &c in kinks {
        let kc = (c - t0) / h;
        if kc <= s + 1e-9 {
            lo = lo.max(kc.ceil().max(0.0) as usize);
        } else {
            hi = hi.min(kc.floor().max(0.0) as usize);
        }
    }
    if hi < lo + 3 {
        // too few clean samples: keep the linear reading
        return Ok(());
    }
    let k = ((s.floor() as i64 - 1).max(lo as i64) as usize).min(hi - 3);
    let w = s - k as f64;
    out.fill(0.0);
    for j in 0..4 {
        let l: f64 = (0..4)
            .filter(|&i| i != j)
            .map(|i| (w - i as f64) / (j as f64 - i as f64))
            .product();
        for (o, v) in out.iter_mut().zip(traj.x(k + j)) {
            *o += l * v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::Interpolation;
    use approx::assert_relative_eq;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn const_history(c: f64, from: f64, to: f64) -> InputHistory {
        let mut h = InputHistory::new(1, 10.0, Interpolation::Linear).unwrap();
        h.push(from, &[c]).unwrap();
        h.push(to, &[c]).unwrap();
        h
    }

    #[test]
    fn linear_predictor_examples() {
        let spec = ControllerSpec::linear(m1(0.0), m1(1.0), m1(-1.0), 1.0, 16).unwrap();
        let (p, u) = linear_predictor(&[1.0], &const_history(0.0, -2.0, 0.0), &spec, 0.0).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(u[0], -1.0, epsilon = 1e-14);
        let (p, u) = linear_predictor(&[1.0], &const_history(0.7, -2.0, 0.0), &spec, 0.0).unwrap();
        assert_relative_eq!(p[0], 1.7, epsilon = 1e-13);
        assert_relative_eq!(u[0], -1.7, epsilon = 1e-13);

        let spec = ControllerSpec::linear(m1(1.0), m1(1.0), m1(-2.0), 0.5, 16).unwrap();
        let (p, u) = linear_predictor(&[1.0], &const_history(0.0, -2.0, 0.0), &spec, 0.0).unwrap();
        assert!((p[0] - 0.5f64.exp()).abs() < 1e-6);
        assert!((u[0] + 2.0 * 0.5f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn linear_predictor_exact_on_affine_history() {
        // A = a, B = 1: P̂ = e^{aD}X + ∫_0^D e^{a s} U(t − s) ds, U(θ) = θ
        let (a, d, t) = (-0.4, 1.3, 2.0);
        let spec = ControllerSpec::linear(m1(a), m1(1.0), m1(-1.0), d, 8).unwrap();
        let mut h = InputHistory::new(1, 10.0, Interpolation::Linear).unwrap();
        h.push(-1.0, &[-1.0]).unwrap();
        h.push(t, &[t]).unwrap();
        let (p, _) = linear_predictor(&[0.5], &h, &spec, t).unwrap();
        // ∫_0^D e^{as}(t − s) ds
        let e = (a * d).exp();
        let int_e = (e - 1.0) / a;
        let int_se = ((a * d - 1.0) * e + 1.0) / (a * a);
        let exact = e * 0.5 + t * int_e - int_se;
        assert_relative_eq!(p[0], exact, epsilon = 1e-13);
    }

    #[test]
    fn controller_rejects_bad_specs() {
        assert!(matches!(
            ControllerSpec::linear(m1(1.0), m1(1.0), m1(-0.5), 1.0, 16),
            Err(Error::NotHurwitz { .. })
        ));
        assert!(ControllerSpec::linear(m1(0.0), m1(1.0), m1(-1.0), 1.0, 4).is_err());
        assert!(ControllerSpec::linear(m1(0.0), m1(1.0), m1(-1.0), 0.0, 16).is_err());
    }

    #[test]
    fn plant_requires_origin_equilibrium() {
        let f: VectorField = Arc::new(|_x, _u, out| out[0] = 1.0);
        assert!(PlantModel::new(1, 1, f).is_err());
    }

    #[test]
    fn nonlinear_predictor_examples() {
        let f: VectorField = Arc::new(|_x, u, out| out[0] = u[0]);
        let plant = PlantModel::new(1, 1, f).unwrap();
        let law: NominalLaw = Arc::new(|_, x, out| {
            out[0] = -x[0];
            Ok(())
        });
        let spec = ControllerSpec::nonlinear(law, 1.0, 10).unwrap();
        let obs = GridFunction::zeros(1, 10);
        let pred = nonlinear_predictor(&[0.3], &obs, &plant, &spec).unwrap();
        assert!(pred.grid.values().iter().all(|v| *v == 0.3));

        // third DC-motor channel: Ẋ₃ = −X₃ + u, u ≡ 0
        let f: VectorField = Arc::new(|x, u, out| out[0] = -x[0] + u[0]);
        let plant = PlantModel::new(1, 1, f).unwrap();
        let obs = GridFunction::zeros(1, 100);
        let spec = spec.rebuilt(1.0, 100).unwrap();
        let pred = nonlinear_predictor(&[0.1], &obs, &plant, &spec).unwrap();
        assert!((pred.terminal()[0] - 0.1 * (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(pred.grid.value(0), &[0.1]);
    }

    #[test]
    fn nonlinear_control_identity_and_zero() {
        let pred = PredictorState {
            grid: GridFunction::from_values(1, 1, vec![0.0, 2.0]),
        };
        let lin: NominalLaw = Arc::new(|_, x, out| {
            out[0] = -3.0 * x[0];
            Ok(())
        });
        let mut u = [0.0];
        nonlinear_control(&pred, &lin, 0.0, 1.0, &mut u).unwrap();
        assert_eq!(u[0], -6.0);
        let zero: NominalLaw = Arc::new(|_, _, out| {
            out[0] = 0.0;
            Ok(())
        });
        nonlinear_control(&pred, &zero, 0.0, 1.0, &mut u).unwrap();
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn march_divergence_is_reported() {
        let f: VectorField = Arc::new(|x, _u, out| out[0] = x[0] * x[0]);
        let plant = PlantModel::new(1, 1, f).unwrap();
        let obs = GridFunction::zeros(1, 16);
        let err = march(&plant, &[1e200], &obs, 1.0).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn march_splits_interior_jump() {
        // Ẋ = u, û = 0 on [0, 0.55), 1 on [0.55, 1]: P̂ = X + D̂·0.45
        let f: VectorField = Arc::new(|_x, u, out| out[0] = u[0]);
        let plant = PlantModel::new(1, 1, f).unwrap();
        let mut obs = GridFunction::from_fn(1, 10, |x, o| o[0] = if x >= 0.55 { 1.0 } else { 0.0 });
        obs.set_jump(Some(crate::grid::GridJump {
            x: 0.55,
            left: vec![0.0],
            right: vec![1.0],
        }));
        let pred = march(&plant, &[0.0], &obs, 2.0).unwrap();
        assert_relative_eq!(pred.terminal()[0], 0.9, epsilon = 1e-14);
        let lm = LinearMarch::new(&m1(0.0), &m1(1.0), 2.0, 10);
        assert_relative_eq!(lm.terminal(&[0.0], &obs)[0], 0.9, epsilon = 1e-14);
    }
}
