//! The example closed loops: a network-controlled DC motor, a bilateral
//! teleoperation pair and a scalar linear benchmark with a closed form.
//!
//! All plants are written in coordinates shifted so that the set-point is
//! the origin. `Scenario::offsets` maps back to physical units.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use predfeed_core::delay::{DelayKind, DelayModel, Trace};
use predfeed_core::history::Interpolation;
use predfeed_core::predictor::{ControllerSpec, NominalLaw, PlantModel, VectorField};
use predfeed_core::simulator::{set_parameter, InitialInput, SimConfig};
use predfeed_core::Error as CoreError;
use serde::Serialize;

use crate::config::{parse_f64, Overrides};
use crate::error::{Result, WorkbenchError};

/// Frozen from the calibration runs at the default settings (see README).
pub const DC_MOTOR_RESIDUAL_THRESHOLD: f64 = 1e-4;
pub const TELEOP_TRACKING_THRESHOLD: f64 = 1e-8;
pub const LINEAR_SCALAR_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    DcMotor,
    Teleop,
    LinearScalar,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [Self::DcMotor, Self::Teleop, Self::LinearScalar];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::DcMotor => "dc-motor",
            Self::Teleop => "teleop",
            Self::LinearScalar => "linear-scalar",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = WorkbenchError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            WorkbenchError::Config(format!(
                "unknown scenario `{s}` (expected dc-motor, teleop or linear-scalar)"
            ))
        })
    }
}

/// Expected qualitative outcome of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assertion {
    /// `Σ|X_i(t)|` in shifted coordinates, at `min(time, horizon)`.
    FinalResidual { time: f64, threshold: f64 },
    /// `|X_a(t) − X_b(t)|` at `min(time, horizon)`.
    Tracking {
        time: f64,
        a: usize,
        b: usize,
        threshold: f64,
    },
    /// Max error against the piecewise closed form of the scalar loop
    /// with `δ ≡ 0`. With any other delay the run must instead decay.
    ClosedForm { tolerance: f64 },
}

/// One curve of a plot: CSV column plus a constant offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotChannel {
    pub label: String,
    pub column: String,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSpec {
    pub stem: String,
    pub title: String,
    pub channels: Vec<PlotChannel>,
}

/// Physical parameters of the field-controlled DC motor and its
/// feedback-linearizing gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcMotorParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
    pub theta: f64,
    pub omega0: f64,
    /// Closed-loop gains of the linearized chain: `Ż₃ = K₁Z₁ + K₂Z₂ + K₃Z₃`.
    pub gains: [f64; 3],
}

impl Default for DcMotorParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            k: 1.0,
            theta: 1.0,
            omega0: 2.0,
            gains: [-1.0, -3.0, -3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopParams {
    /// Viscous term in `ẍ + damping·ẋ = τ` for both manipulators.
    pub damping: f64,
    pub kp: f64,
    pub bm: f64,
    pub bs: f64,
    pub setpoint: f64,
}

impl Default for TeleopParams {
    fn default() -> Self {
        Self {
            damping: 1.0,
            kp: 2.0,
            bm: 2.0,
            bs: 2.0,
            setpoint: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub perturbation: bool,
    pub plant: PlantModel,
    pub controller: ControllerSpec,
    pub delay: DelayModel,
    pub config: SimConfig,
    pub assertion: Assertion,
    /// Set-point in physical coordinates; `physical = X + offsets`.
    pub offsets: Vec<f64>,
    pub state_labels: Vec<String>,
    pub plots: Vec<PlotSpec>,
    dc_motor: Option<DcMotorParams>,
    teleop: Option<TeleopParams>,
}

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn channel(label: &str, column: &str, offset: f64) -> PlotChannel {
    PlotChannel {
        label: label.into(),
        column: column.into(),
        offset,
    }
}

/// Feedback-linearizing law of the DC motor, evaluated at the shifted
/// state `p`.
pub fn dc_motor_law(par: DcMotorParams, p: &[f64]) -> predfeed_core::Result<f64> {
    let DcMotorParams {
        a,
        b,
        c,
        k,
        theta,
        omega0,
        gains,
    } = par;
    let omega = p[0] + omega0;
    let ia = p[1] + k / b;
    let i_f = p[2];
    let lead = k - 2.0 * b * ia;
    let dia = -b * ia + k - c * i_f * omega;
    let z1 = theta * ia * ia + c * omega * omega - theta * k * k / (b * b) - c * omega0 * omega0;
    let z2 = 2.0 * theta * ia * (k - b * ia);
    let z3 = 2.0 * theta * lead * dia;
    let gamma = -2.0 * c * theta * lead * omega;
    let alpha = 2.0 * c * a * theta * lead * i_f * omega
        - 2.0 * b * theta * (3.0 * k - 4.0 * b * ia - 2.0 * c * i_f * omega) * dia
        - 2.0 * c * theta * theta * lead * i_f * i_f * ia;
    if !(gamma.abs() > 1e-9) || !gamma.is_finite() {
        return Err(CoreError::Domain(format!(
            "linearizing gain vanishes at ω = {omega:.3e}, i_a = {ia:.3e}"
        )));
    }
    Ok((gains[0] * z1 + gains[1] * z2 + gains[2] * z3 - alpha) / gamma)
}

fn dc_motor_controller(par: DcMotorParams, d_hat: f64, grid: usize) -> predfeed_core::Result<ControllerSpec> {
    let law: NominalLaw = Arc::new(move |_t, p, out| {
        out[0] = dc_motor_law(par, p)?;
        Ok(())
    });
    ControllerSpec::nonlinear(law, d_hat, grid)
}

fn dc_motor_plant(par: DcMotorParams) -> predfeed_core::Result<PlantModel> {
    let DcMotorParams {
        a,
        b,
        c,
        k,
        theta,
        omega0,
        ..
    } = par;
    let f: VectorField = Arc::new(move |x, u, out| {
        out[0] = theta * x[1] * x[2] + theta * k / b * x[2];
        out[1] = -b * x[1] - c * x[2] * x[0] - c * omega0 * x[2];
        out[2] = -a * x[2] + u[0];
    });
    Ok(PlantModel::new(3, 1, f)?.with_equilibrium(vec![omega0, k / b, 0.0]))
}

/// Field-controlled DC motor over a network, nominal delay 1 s. With the
/// perturbation on, `δ = 0.5 i_a² + 0.2 sin² t`.
pub fn scenario_dc_motor(perturbation: bool) -> Scenario {
    let par = DcMotorParams::default();
    let plant = dc_motor_plant(par).expect("DC motor vector field vanishes at the set-point");
    let controller = dc_motor_controller(par, 1.0, 100).expect("valid grid");
    let kind = if perturbation {
        DelayKind::StateQuadratic {
            state_index: 1,
            offset: par.k / par.b,
            state_gain: 0.5,
            time_amplitude: 0.2,
            frequency: 1.0,
        }
    } else {
        DelayKind::Zero
    };
    let delay = DelayModel::new(1.0, kind).expect("positive nominal delay");
    let mut config = SimConfig::new(vec![-1.0, -0.2, 0.1], 1, 40.0);
    config.name = "dc-motor".into();
    let offsets = vec![par.omega0, par.k / par.b, 0.0];
    Scenario {
        id: ScenarioId::DcMotor,
        perturbation,
        plant,
        controller,
        delay,
        config,
        assertion: Assertion::FinalResidual {
            time: 40.0,
            threshold: DC_MOTOR_RESIDUAL_THRESHOLD,
        },
        plots: vec![
            PlotSpec {
                stem: "currents".into(),
                title: "Field and armature currents".into(),
                channels: vec![channel("i_f", "x3", 0.0), channel("i_a", "x2", offsets[1])],
            },
            PlotSpec {
                stem: "speed-voltage".into(),
                title: "Angular velocity and field voltage".into(),
                channels: vec![channel("omega", "x1", offsets[0]), channel("U", "u1", 0.0)],
            },
        ],
        offsets,
        state_labels: labels(&["omega - omega0", "i_a - k/b", "i_f"]),
        dc_motor: Some(par),
        teleop: None,
    }
}

fn teleop_loop(par: TeleopParams, d_hat: f64, grid: usize) -> predfeed_core::Result<(PlantModel, ControllerSpec)> {
    let c = par.damping;
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        0.0, -c, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 0.0, -c,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        0.0, 0.0,
        1.0, 0.0,
        0.0, 0.0,
        0.0, 1.0,
    ]);
    // coupling spring, local damping and set-point spring, in shifted positions
    #[rustfmt::skip]
    let k = DMatrix::from_row_slice(2, 4, &[
        -2.0 * par.kp, -par.bm, par.kp, 0.0,
        par.kp, 0.0, -2.0 * par.kp, -par.bs,
    ]);
    let plant = PlantModel::linear(a.clone(), b.clone())?.with_equilibrium(vec![par.setpoint, 0.0, par.setpoint, 0.0]);
    let spec = ControllerSpec::linear(a, b, k, d_hat, grid)?;
    Ok((plant, spec))
}

/// Master/slave manipulators `ẍ + ẋ = τ` behind one network. The slave
/// channel sees twice the perturbation; `δ' = −δ + 0.1 sin² t`, `δ(0) = 1`.
pub fn scenario_teleoperation(perturbation: bool) -> Scenario {
    let par = TeleopParams::default();
    let (plant, controller) = teleop_loop(par, 1.0, 100).expect("teleoperation gains are stabilizing");
    let kind = if perturbation {
        DelayKind::FirstOrderLag {
            rate: 1.0,
            forcing: 0.1,
            initial: 1.0,
            start: 0.0,
        }
    } else {
        DelayKind::Zero
    };
    let delay = DelayModel::new(1.0, kind)
        .expect("positive nominal delay")
        .with_channel_scales(vec![1.0, 2.0]);
    let r = par.setpoint;
    let mut config = SimConfig::new(vec![-r, 0.0, 1.0 - r, 0.0], 2, 40.0);
    config.name = "teleop".into();
    Scenario {
        id: ScenarioId::Teleop,
        perturbation,
        plant,
        controller,
        delay,
        config,
        assertion: Assertion::Tracking {
            time: 30.0,
            a: 0,
            b: 2,
            threshold: TELEOP_TRACKING_THRESHOLD,
        },
        offsets: vec![r, 0.0, r, 0.0],
        state_labels: labels(&["x_m - r", "v_m", "x_s - r", "v_s"]),
        plots: vec![
            PlotSpec {
                stem: "positions".into(),
                title: "Master and slave positions".into(),
                channels: vec![channel("x_m", "x1", r), channel("x_s", "x3", r)],
            },
            PlotSpec {
                stem: "torques".into(),
                title: "Master and slave torques".into(),
                channels: vec![channel("tau_m", "u1", 0.0), channel("tau_s", "u2", 0.0)],
            },
        ],
        dc_motor: None,
        teleop: Some(par),
    }
}

/// `Ẋ = X + U(t − 1 − δ)`, `U = −2P̂`, `X(0) = 1`, zero initial input.
pub fn scenario_linear_scalar() -> Scenario {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let plant = PlantModel::linear(one(1.0), one(1.0)).expect("scalar plant");
    let controller = ControllerSpec::linear(one(1.0), one(1.0), one(-2.0), 1.0, 100).expect("A + BK = -1");
    let delay = DelayModel::new(1.0, DelayKind::Zero).expect("positive nominal delay");
    let mut config = SimConfig::new(vec![1.0], 1, 10.0);
    config.name = "linear-scalar".into();
    config.lyapunov_diagnostics = true;
    Scenario {
        id: ScenarioId::LinearScalar,
        perturbation: false,
        plant,
        controller,
        delay,
        config,
        assertion: Assertion::ClosedForm {
            tolerance: LINEAR_SCALAR_TOLERANCE,
        },
        offsets: vec![0.0],
        state_labels: labels(&["x"]),
        plots: vec![PlotSpec {
            stem: "state-input".into(),
            title: "State and input".into(),
            channels: vec![channel("X", "x1", 0.0), channel("U", "u1", 0.0)],
        }],
        dc_motor: None,
        teleop: None,
    }
}

/// Build a scenario by id. `perturbation` is ignored by the linear
/// benchmark, whose delay is chosen through `delay.kind`.
pub fn scenario(id: ScenarioId, perturbation: bool) -> Scenario {
    match id {
        ScenarioId::DcMotor => scenario_dc_motor(perturbation),
        ScenarioId::Teleop => scenario_teleoperation(perturbation),
        ScenarioId::LinearScalar => scenario_linear_scalar(),
    }
}

/// Keys understood by [`Scenario::apply`] in addition to the numeric
/// simulator parameters.
pub const SCENARIO_KEYS: &[&str] = &[
    "delay.kind",
    "delay.trace",
    "sim.interpolation",
    "sim.diagnostics",
    "sim.predictor",
    "plant.damping",
    "controller.k1",
    "controller.k2",
    "controller.k3",
    "assert.threshold",
    "assert.time",
];

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(WorkbenchError::Config(format!("`{key}` expects on/off, got `{value}`"))),
    }
}

fn delay_kind_named(name: &str) -> Result<DelayKind> {
    Ok(match name {
        "zero" => DelayKind::Zero,
        "constant" => DelayKind::Constant(0.0),
        "sinusoidal" => DelayKind::TimeSinusoidal {
            bias: 0.0,
            amplitude: 0.2,
            frequency: 1.0,
        },
        "exponential" => DelayKind::TimeFunction(Arc::new(|t: f64| {
            let e = (-t).exp();
            (e, -e)
        })),
        "lag" => DelayKind::FirstOrderLag {
            rate: 1.0,
            forcing: 0.1,
            initial: 1.0,
            start: 0.0,
        },
        _ => {
            return Err(WorkbenchError::Config(format!(
                "unknown delay.kind `{name}` (zero, constant, sinusoidal, exponential, lag)"
            )))
        }
    })
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.config.name
    }

    /// Apply overrides in order; `delay.kind` and `delay.trace` are applied
    /// first so that shape parameters refer to the new kind.
    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        let first = |k: &str| k == "delay.kind" || k == "delay.trace";
        let ordered = overrides
            .iter()
            .filter(|(k, _)| first(k))
            .chain(overrides.iter().filter(|(k, _)| !first(k)));
        for (key, value) in ordered {
            self.apply_one(key, value)?;
        }
        Ok(())
    }

    fn apply_one(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "delay.kind" => self.delay.kind = delay_kind_named(value)?,
            "delay.trace" => self.delay.kind = DelayKind::Tabulated(Trace::from_csv(std::path::Path::new(value))?),
            "sim.interpolation" => {
                self.config.interpolation = match value {
                    "linear" => Interpolation::Linear,
                    "cubic" => Interpolation::Cubic,
                    "hold" => Interpolation::PiecewiseConstantLeft,
                    _ => {
                        return Err(WorkbenchError::Config(format!(
                            "sim.interpolation expects linear, cubic or hold, got `{value}`"
                        )))
                    }
                }
            }
            "sim.diagnostics" => self.config.lyapunov_diagnostics = flag(key, value)?,
            "sim.predictor" => self.config.record_predictor = flag(key, value)?,
            "plant.damping" => {
                let mut par = self
                    .teleop
                    .ok_or_else(|| WorkbenchError::Config(format!("`{key}` applies to the teleop scenario only")))?;
                par.damping = parse_f64(key, value)?;
                let (plant, spec) = teleop_loop(par, self.controller.nominal_delay, self.controller.grid)
                    .map_err(|e| WorkbenchError::Config(e.to_string()))?;
                self.plant = plant;
                self.controller = spec;
                self.teleop = Some(par);
            }
            "controller.k1" | "controller.k2" | "controller.k3" => {
                let mut par = self
                    .dc_motor
                    .ok_or_else(|| WorkbenchError::Config(format!("`{key}` applies to the dc-motor scenario only")))?;
                let i = key.as_bytes()[key.len() - 1] - b'1';
                par.gains[i as usize] = parse_f64(key, value)?;
                self.controller = dc_motor_controller(par, self.controller.nominal_delay, self.controller.grid)?;
                self.dc_motor = Some(par);
                self.config.params.push((key.to_string(), par.gains[i as usize]));
            }
            "assert.threshold" | "assert.time" => {
                let v = parse_f64(key, value)?;
                match (&mut self.assertion, key) {
                    (Assertion::FinalResidual { threshold, .. }, "assert.threshold")
                    | (Assertion::Tracking { threshold, .. }, "assert.threshold")
                    | (Assertion::ClosedForm { tolerance: threshold }, "assert.threshold") => *threshold = v,
                    (Assertion::FinalResidual { time, .. }, _) | (Assertion::Tracking { time, .. }, _) => *time = v,
                    (Assertion::ClosedForm { .. }, _) => {
                        return Err(WorkbenchError::Config(
                            "assert.time does not apply to the closed-form check".into(),
                        ))
                    }
                }
            }
            _ => {
                let v = parse_f64(key, value)?;
                set_parameter(&mut self.controller, &mut self.delay, &mut self.config, key, v)
                    .map_err(|e| WorkbenchError::Config(e.to_string()))?;
                self.config.params.push((key.to_string(), v));
            }
        }
        Ok(())
    }

    /// Deterministic description of every setting, for comparing two
    /// constructions of the same scenario.
    pub fn fingerprint(&self) -> String {
        let gains = self.controller.gains().map(|g| (g.a.clone(), g.b.clone(), g.k.clone()));
        format!(
            "{}|{}|{:?}|{:?}|{:?}|{:?}|{}|{}|{:?}|{:?}|{:?}|{:?}|{:?}",
            self.id,
            self.perturbation,
            self.plant,
            gains,
            self.delay,
            self.config,
            self.controller.nominal_delay,
            self.controller.grid,
            self.assertion,
            self.offsets,
            self.plots,
            self.dc_motor,
            self.teleop,
        )
    }

    /// Closed form of the linear benchmark, when it applies to the current
    /// settings.
    pub fn closed_form(&self) -> Option<impl Fn(f64) -> f64> {
        let (a, b) = self.plant.linear_parts()?;
        let g = self.controller.gains()?;
        let scalar = a.shape() == (1, 1) && b.shape() == (1, 1);
        let zero_input = matches!(&self.config.initial_input, InitialInput::Constant(c) if c.iter().all(|v| *v == 0.0));
        if !(scalar && zero_input && matches!(self.delay.kind, DelayKind::Zero)) {
            return None;
        }
        let (a, cl) = (a[(0, 0)], a[(0, 0)] + b[(0, 0)] * g.k[(0, 0)]);
        let (t0, x0, d) = (self.config.t0, self.config.x0[0], self.delay.nominal);
        Some(move |t: f64| {
            let s = t - t0;
            if s < d {
                x0 * (a * s).exp()
            } else {
                x0 * (a * d).exp() * (cl * (s - d)).exp()
            }
        })
    }
}
