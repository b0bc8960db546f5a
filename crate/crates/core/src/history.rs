//! Sliding record of applied control values.
//!
//! The same buffer serves point lookups `U(θ)` for the delayed plant input
//! and the actuator-state estimate `û(x, t) = U(t + D̂(x − 1))` used by the
//! predictor. A run's initial data and its first computed control generally
//! disagree at the start time, so the buffer can carry one recorded
//! discontinuity and answer one-sided limits there.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridJump};

/// Interpolation between stored samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Interpolation {
    /// Hold the most recent sample: `U(θ) = U(t_i)` on `[t_i, t_{i+1})`.
    PiecewiseConstantLeft,
    #[default]
    Linear,
    /// Four-point Lagrange on the samples around `θ`; fourth-order accurate.
    Cubic,
}

/// Which one-sided limit to return at a discontinuity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Side {
    /// Right-continuous value (the stored sample).
    #[default]
    Right,
    /// Limit from below.
    Left,
}

#[derive(Debug, Clone, PartialEq)]
struct Jump {
    time: f64,
    left: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InputHistory {
    dim: usize,
    window: f64,
    order: Interpolation,
    // evicted samples stay in front of `head` until the next compaction
    head: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    jump: Option<Jump>,
}

fn snap_tol(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

impl InputHistory {
    /// Empty history for `dim`-dimensional inputs. Samples older than
    /// twice `window` behind the newest one are evicted.
    pub fn new(dim: usize, window: f64, order: Interpolation) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("input dimension must be positive".into()));
        }
        if !(window > 0.0) {
            return Err(Error::Parameter(format!("window must be positive, got {window}")));
        }
        Ok(Self {
            dim,
            window,
            order,
            head: 0,
            times: Vec::new(),
            values: Vec::new(),
            jump: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn interpolation(&self) -> Interpolation {
        self.order
    }

    pub fn len(&self) -> usize {
        self.times.len() - self.head
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn ts(&self) -> &[f64] {
        &self.times[self.head..]
    }

    /// First covered time.
    pub fn start(&self) -> Option<f64> {
        self.ts().first().copied()
    }

    /// Last covered time.
    pub fn end(&self) -> Option<f64> {
        self.ts().last().copied()
    }

    pub fn last_value(&self) -> Option<&[f64]> {
        let n = self.len();
        (n > 0).then(|| self.sample(n - 1))
    }

    /// Time of the recorded discontinuity, if it is still in the window.
    pub fn jump_time(&self) -> Option<f64> {
        self.jump.as_ref().map(|j| j.time)
    }

    /// Iterate over stored `(time, value)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        (0..self.len()).map(move |i| (self.ts()[i], self.sample(i)))
    }

    fn sample(&self, i: usize) -> &[f64] {
        let lo = (self.head + i) * self.dim;
        &self.values[lo..lo + self.dim]
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(Error::Dimension(format!(
                "history holds {}-vectors, got {}",
                self.dim,
                u.len()
            )));
        }
        Ok(())
    }

    /// Append a sample. Time must strictly exceed the last sample time.
    pub fn push(&mut self, t: f64, u: &[f64]) -> Result<()> {
        self.check_dim(u)?;
        if let Some(last) = self.end() {
            if !(t > last) {
                return Err(Error::NonMonotone { last, t });
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(u);
        self.evict();
        Ok(())
    }

    /// Overwrite the newest sample (used while a control value is being
    /// solved for at the newest time).
    pub fn replace_last(&mut self, u: &[f64]) -> Result<()> {
        self.check_dim(u)?;
        if self.is_empty() {
            return Err(Error::Parameter("replace_last on an empty history".into()));
        }
        let base = self.values.len() - self.dim;
        self.values[base..].copy_from_slice(u);
        Ok(())
    }

    /// Turn the newest sample into a discontinuity: its current value
    /// becomes the left limit and `u` the value from time `t` on.
    ///
    /// This is how a run starts: the initial data is pushed up to `t0`,
    /// then `start_at(t0, U(t0))` records the first computed control.
    pub fn start_at(&mut self, t: f64, u: &[f64]) -> Result<()> {
        self.check_dim(u)?;
        let last = self
            .end()
            .ok_or_else(|| Error::Parameter("start_at needs initial data".into()))?;
        if (last - t).abs() > snap_tol(t) {
            return Err(Error::Parameter(format!(
                "start_at({t}) must coincide with the last initial sample at {last}"
            )));
        }
        let left = self.sample(self.len() - 1).to_vec();
        self.jump = Some(Jump { time: last, left });
        self.replace_last(u)
    }

    fn evict(&mut self) {
        let Some(newest) = self.end() else { return };
        let keep_from = newest - 2.0 * self.window;
        // keep one sample at or before keep_from so the window stays covered
        while self.len() > 2 && self.times[self.head + 1] <= keep_from {
            self.head += 1;
        }
        if let Some(j) = &self.jump {
            if self.start().is_some_and(|t0| j.time <= t0) {
                self.jump = None;
            }
        }
        if self.head > 1024 && self.head > self.len() {
            self.times.drain(..self.head);
            self.values.drain(..self.head * self.dim);
            self.head = 0;
        }
    }

    fn out_of_range(&self, theta: f64) -> Error {
        Error::OutOfRange {
            theta,
            start: self.start().unwrap_or(f64::NAN),
            end: self.end().unwrap_or(f64::NAN),
        }
    }

    /// `U(θ)` (right-continuous).
    pub fn eval(&self, theta: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(theta, Side::Right, &mut out)?;
        Ok(out)
    }

    /// `U(θ)` or its left limit, written into `out`.
    pub fn eval_into(&self, theta: f64, side: Side, out: &mut [f64]) -> Result<()> {
        let ts = self.ts();
        let n = ts.len();
        if n == 0 {
            return Err(self.out_of_range(theta));
        }
        let (first, last) = (ts[0], ts[n - 1]);
        let tol = snap_tol(theta);
        if !(theta >= first - tol && theta <= last + tol) {
            return Err(self.out_of_range(theta));
        }
        let theta = theta.clamp(first, last);
        if n == 1 {
            out.copy_from_slice(self.sample(0));
            return Ok(());
        }
        // index of the first sample strictly after θ, snapped
        let mut k = ts.partition_point(|&s| s <= theta);
        if k < n && (ts[k] - theta).abs() <= tol {
            k += 1;
        }
        let hit = k >= 1 && (theta - ts[k - 1]).abs() <= tol;

        if hit {
            let i = k - 1;
            if side == Side::Left && i > 0 {
                return self.left_limit_at(i, out);
            }
            out.copy_from_slice(self.sample(i));
            return Ok(());
        }
        // θ strictly inside (t_{k-1}, t_k)
        let i = k - 1;
        match self.order {
            Interpolation::PiecewiseConstantLeft => out.copy_from_slice(self.sample(i)),
            Interpolation::Linear => {
                let (t0, t1) = (ts[i], ts[i + 1]);
                let w = (theta - t0) / (t1 - t0);
                let v0 = self.sample(i);
                let v1 = self.right_end_value(i + 1);
                for d in 0..self.dim {
                    out[d] = v0[d] + w * (v1[d] - v0[d]);
                }
            }
            Interpolation::Cubic => self.lagrange(i, theta, out),
        }
        Ok(())
    }

    fn jump_index(&self) -> Option<usize> {
        let j = self.jump.as_ref()?;
        let ts = self.ts();
        let k = ts.partition_point(|&s| s < j.time);
        (k < ts.len() && ts[k] == j.time).then_some(k)
    }

    /// Value of sample `i` as seen from the segment on its left.
    fn right_end_value(&self, i: usize) -> &[f64] {
        match (self.jump_index(), &self.jump) {
            (Some(k), Some(j)) if k == i => &j.left,
            _ => self.sample(i),
        }
    }

    fn left_limit_at(&self, i: usize, out: &mut [f64]) -> Result<()> {
        match self.order {
            Interpolation::PiecewiseConstantLeft => out.copy_from_slice(self.sample(i - 1)),
            _ => out.copy_from_slice(self.right_end_value(i)),
        }
        Ok(())
    }

    /// Four-point Lagrange interpolation on the samples around segment `i`,
    /// never crossing the recorded discontinuity.
    fn lagrange(&self, i: usize, theta: f64, out: &mut [f64]) {
        let ts = self.ts();
        let n = ts.len();
        // piece = [lo, hi] sample indices on one side of the jump
        let (lo, hi) = match self.jump_index() {
            Some(k) if i < k => (0, k),
            Some(k) => (k, n - 1),
            None => (0, n - 1),
        };
        let span = hi - lo;
        let count = span.min(3) + 1;
        let start = if count < 4 {
            lo
        } else {
            i.saturating_sub(1).clamp(lo, hi - 3)
        };
        let left_piece = matches!(self.jump_index(), Some(k) if i < k);
        out.iter_mut().for_each(|v| *v = 0.0);
        for a in start..start + count {
            let mut w = 1.0;
            for b in start..start + count {
                if a != b {
                    w *= (theta - ts[b]) / (ts[a] - ts[b]);
                }
            }
            let v = if left_piece {
                self.right_end_value(a)
            } else {
                self.sample(a)
            };
            for d in 0..self.dim {
                out[d] += w * v[d];
            }
        }
    }

    /// Actuator-state estimate `û(x_i, t) = U(t + D̂(x_i − 1))` on the grid
    /// `x_i = i/M`. A discontinuity inside `(t − D̂, t]` is carried over as
    /// a grid jump so downstream quadratures can split on it.
    pub fn observer_grid(&self, t: f64, d_hat: f64, m: usize) -> Result<GridFunction> {
        if m == 0 {
            return Err(Error::Parameter("observer grid needs M >= 1".into()));
        }
        let need = t - d_hat;
        let (start, end) = match (self.start(), self.end()) {
            (Some(s), Some(e)) => (s, e),
            _ => return Err(self.out_of_range(need)),
        };
        if need < start - snap_tol(need) || t > end + snap_tol(t) {
            return Err(Error::Coverage {
                need_start: need,
                need_end: t,
                have_start: start,
                have_end: end,
            });
        }
        let mut grid = GridFunction::zeros(self.dim, m);
        for i in 0..=m {
            let theta = if i == m {
                t
            } else {
                t + d_hat * (i as f64 / m as f64 - 1.0)
            };
            self.eval_into(theta, Side::Right, grid.value_mut(i))?;
        }
        if let Some(j) = &self.jump {
            if j.time > need && j.time <= t + snap_tol(t) {
                let x = ((j.time - t) / d_hat + 1.0).clamp(0.0, 1.0);
                let mut left = vec![0.0; self.dim];
                let mut right = vec![0.0; self.dim];
                self.eval_into(j.time, Side::Left, &mut left)?;
                self.eval_into(j.time, Side::Right, &mut right)?;
                grid.set_jump(Some(GridJump { x, left, right }));
            }
        }
        Ok(grid)
    }
}
