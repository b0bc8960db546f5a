//! Uniform-grid record of a closed-loop run.

use crate::error::{Error, Result};
use crate::history::{InputHistory, Interpolation};

/// Why a run stopped before its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Non-finite state or `|X|` above the blow-up threshold.
    BlowUp,
    /// Total delay `D̂ + δ` became non-positive.
    Feasibility,
    /// A history lookup fell outside the stored window.
    Coverage,
    /// The control law left its domain of definition.
    Domain,
    /// The predictor march produced a non-finite value.
    Divergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub time: f64,
    pub kind: FaultKind,
    pub message: String,
}

/// Time series of a run. Rows are indexed by step `k`, `t_k = t0 + k·h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub name: String,
    /// Scalar run parameters, in insertion order.
    pub params: Vec<(String, f64)>,
    pub step: f64,
    pub n: usize,
    pub m: usize,
    pub nominal_delay: f64,
    pub time: Vec<f64>,
    /// Row-major `n` entries per step.
    pub state: Vec<f64>,
    /// Commanded control `U(t_k)`, `m` entries per step.
    pub input: Vec<f64>,
    /// Delay perturbation `δ(t_k, X(t_k))` (before channel scaling).
    pub delta: Vec<f64>,
    /// Certainty-equivalence predictor `P̂(t_k)`, when recorded.
    pub predictor: Option<Vec<f64>>,
    /// Named scalar diagnostic channels (same length as `time`).
    pub diagnostics: Vec<(String, Vec<f64>)>,
    /// Initial input data pushed before `t0`; the last entry sits at `t0`.
    pub initial_input: Vec<(f64, Vec<f64>)>,
    pub interpolation: Interpolation,
    pub fault: Option<Fault>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.time[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.time.last().expect("empty trajectory")
    }

    pub fn x(&self, k: usize) -> &[f64] {
        &self.state[k * self.n..(k + 1) * self.n]
    }

    pub fn u(&self, k: usize) -> &[f64] {
        &self.input[k * self.m..(k + 1) * self.m]
    }

    pub fn phat(&self, k: usize) -> Option<&[f64]> {
        self.predictor.as_ref().map(|p| &p[k * self.n..(k + 1) * self.n])
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|p| p.1)
    }

    /// Index of the grid point nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.t0()) / self.step).round();
        (k.max(0.0) as usize).min(self.len() - 1)
    }

    /// `X(t)` by linear interpolation on the grid.
    pub fn state_at(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let (a, b) = (self.t0(), self.t_end());
        let tol = 1e-12 * t.abs().max(1.0);
        if !(t >= a - tol && t <= b + tol) {
            return Err(Error::Coverage {
                need_start: t,
                need_end: t,
                have_start: a,
                have_end: b,
            });
        }
        let s = ((t - a) / self.step).clamp(0.0, (self.len() - 1) as f64);
        let k = (s.floor() as usize).min(self.len().saturating_sub(2));
        let w = s - k as f64;
        if self.len() == 1 {
            out.copy_from_slice(self.x(0));
            return Ok(());
        }
        let (x0, x1) = (self.x(k), self.x(k + 1));
        for i in 0..self.n {
            out[i] = x0[i] + w * (x1[i] - x0[i]);
        }
        Ok(())
    }

    /// Rebuild the full input history of the run (initial data, the jump
    /// at `t0`, then every commanded control) without eviction.
    pub fn input_history(&self) -> Result<InputHistory> {
        let first = self.initial_input.first().map(|s| s.0).unwrap_or_else(|| self.t0());
        let window = (self.t_end() - first).max(self.step) + 1.0;
        let mut h = InputHistory::new(self.m, window, self.interpolation)?;
        for (t, u) in &self.initial_input {
            h.push(*t, u)?;
        }
        if self.initial_input.is_empty() {
            h.push(self.t0(), self.u(0))?;
        } else {
            h.start_at(self.t0(), self.u(0))?;
        }
        for k in 1..self.len() {
            h.push(self.time[k], self.u(k))?;
        }
        Ok(h)
    }

    /// Euclidean norm of the state at step `k`.
    pub fn state_norm(&self, k: usize) -> f64 {
        self.x(k).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Scalar trajectory with `X(t) = f(t)`, `U ≡ 0` on `[0, t_end]`.
    pub fn scalar(step: f64, t_end: f64, f: impl Fn(f64) -> f64) -> Trajectory {
        let steps = (t_end / step).round() as usize;
        let time: Vec<f64> = (0..=steps).map(|k| k as f64 * step).collect();
        Trajectory {
            name: "fixture".into(),
            params: vec![],
            step,
            n: 1,
            m: 1,
            nominal_delay: 1.0,
            state: time.iter().map(|&t| f(t)).collect(),
            input: vec![0.0; time.len()],
            delta: vec![0.0; time.len()],
            predictor: None,
            diagnostics: vec![],
            initial_input: vec![(-5.0, vec![0.0]), (0.0, vec![0.0])],
            interpolation: Interpolation::Linear,
            fault: None,
            time,
        }
    }
}
