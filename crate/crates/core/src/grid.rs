//! Vector-valued functions sampled on the uniform spatial grid
//! `x_i = i/M, i = 0..=M`, with at most one jump discontinuity.
//!
//! The actuator-state estimate inherits a jump from the input history at
//! the start of a run (initial data on the left, the first computed control
//! on the right). Quadratures and the predictor march split the cell that
//! contains the jump so they never average across it.

/// One-sided limits at a discontinuity located at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridJump {
    pub x: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A piece of the grid on which the function is treated as linear.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub x0: f64,
    pub x1: f64,
    pub v0: &'a [f64],
    pub v1: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    cells: usize,
    values: Vec<f64>,
    jump: Option<GridJump>,
}

impl GridFunction {
    pub fn zeros(dim: usize, cells: usize) -> Self {
        assert!(cells >= 1, "grid needs at least one cell");
        Self {
            dim,
            cells,
            values: vec![0.0; dim * (cells + 1)],
            jump: None,
        }
    }

    /// Build from row-major node values (`(cells + 1) * dim` entries).
    pub fn from_values(dim: usize, cells: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), dim * (cells + 1), "grid value count");
        Self {
            dim,
            cells,
            values,
            jump: None,
        }
    }

    /// Sample `f(x_i)` at every node.
    pub fn from_fn(dim: usize, cells: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut g = Self::zeros(dim, cells);
        for i in 0..=cells {
            let x = g.node(i);
            f(x, g.value_mut(i));
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            1.0
        } else {
            i as f64 / self.cells as f64
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jump(&self) -> Option<&GridJump> {
        self.jump.as_ref()
    }

    /// Attach a discontinuity. A jump within roundoff of a node is moved
    /// onto it; one at `x <= 0` is outside the open domain and is dropped.
    pub fn set_jump(&mut self, jump: Option<GridJump>) {
        let m = self.cells as f64;
        self.jump = jump
            .map(|mut j| {
                let s = (j.x * m).round();
                if (j.x * m - s).abs() <= 1e-9 {
                    j.x = if s == m { 1.0 } else { s / m };
                }
                j
            })
            .filter(|j| j.x > 0.0 && j.x <= 1.0);
    }

    /// Index of the cell whose interior or right end holds the jump.
    fn jump_cell(&self) -> Option<usize> {
        self.jump.as_ref().map(|j| {
            let s = j.x * self.cells as f64;
            let c = if (s - s.round()).abs() <= 1e-9 {
                s.round()
            } else {
                s.ceil()
            } as usize;
            c.clamp(1, self.cells) - 1
        })
    }

    /// Call `f` on every linear piece, left to right. The jump cell is
    /// split in two; a zero-width piece is skipped.
    pub fn for_each_segment(&self, mut f: impl FnMut(Segment<'_>)) {
        let jc = self.jump_cell();
        for i in 0..self.cells {
            let (x0, x1) = (self.node(i), self.node(i + 1));
            match (jc, &self.jump) {
                (Some(c), Some(j)) if c == i => {
                    if j.x > x0 {
                        f(Segment {
                            x0,
                            x1: j.x,
                            v0: self.value(i),
                            v1: &j.left,
                        });
                    }
                    if x1 > j.x {
                        f(Segment {
                            x0: j.x,
                            x1,
                            v0: &j.right,
                            v1: self.value(i + 1),
                        });
                    }
                }
                _ => f(Segment {
                    x0,
                    x1,
                    v0: self.value(i),
                    v1: self.value(i + 1),
                }),
            }
        }
    }

    /// `∫_0^1 w(x) g(x)ᵀg(x) dx` by the trapezoid rule on the segments.
    pub fn weighted_square_integral(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_segment(|s| {
            let a: f64 = s.v0.iter().map(|v| v * v).sum();
            let b: f64 = s.v1.iter().map(|v| v * v).sum();
            acc += 0.5 * (s.x1 - s.x0) * (weight(s.x0) * a + weight(s.x1) * b);
        });
        acc
    }

    pub fn square_integral(&self) -> f64 {
        self.weighted_square_integral(|_| 1.0)
    }

    /// Second-order finite-difference derivative in `x` (central inside,
    /// one-sided at both ends). The jump, if any, is ignored.
    pub fn derivative(&self) -> GridFunction {
        let m = self.cells;
        let dx = self.spacing();
        let mut out = GridFunction::zeros(self.dim, m);
        for i in 0..=m {
            for k in 0..self.dim {
                let v = |j: usize| self.value(j)[k];
                out.value_mut(i)[k] = if m == 1 {
                    (v(1) - v(0)) / dx
                } else if i == 0 {
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * dx)
                } else if i == m {
                    (3.0 * v(m) - 4.0 * v(m - 1) + v(m - 2)) / (2.0 * dx)
                } else {
                    (v(i + 1) - v(i - 1)) / (2.0 * dx)
                };
            }
        }
        out
    }

    /// Largest absolute node value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
