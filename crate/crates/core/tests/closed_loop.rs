use nalgebra::DMatrix;
use predfeed_core::delay::{DelayKind, DelayModel};
use predfeed_core::history::Interpolation;
use predfeed_core::lyapunov::backstep;
use predfeed_core::predictor::{actual_predictor_diagnostic, ControllerSpec, PlantModel};
use predfeed_core::simulator::{simulate, SimConfig};
use predfeed_core::trajectory::{FaultKind, Trajectory};

fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn scalar_run(kind: DelayKind, h: f64, m: usize, t_end: f64, interp: Interpolation) -> Trajectory {
    let plant = PlantModel::linear(m1(1.0), m1(1.0)).unwrap();
    let spec = ControllerSpec::linear(m1(1.0), m1(1.0), m1(-2.0), 1.0, m).unwrap();
    let delay = DelayModel::new(1.0, kind).unwrap();
    let mut cfg = SimConfig::new(vec![1.0], 1, t_end);
    cfg.step = h;
    cfg.interpolation = interp;
    simulate(&plant, &spec, &delay, &cfg).unwrap()
}

fn exact(t: f64) -> f64 {
    if t < 1.0 {
        t.exp()
    } else {
        1f64.exp() * (-(t - 1.0)).exp()
    }
}

fn max_error(traj: &Trajectory) -> f64 {
    (0..traj.len())
        .map(|k| (traj.x(k)[0] - exact(traj.time[k])).abs())
        .fold(0.0, f64::max)
}

#[test]
fn runs_are_deterministic() {
    let kind = || DelayKind::TimeSinusoidal {
        bias: 0.0,
        amplitude: 0.2,
        frequency: 1.0,
    };
    let a = scalar_run(kind(), 1e-2, 50, 5.0, Interpolation::Linear);
    let b = scalar_run(kind(), 1e-2, 50, 5.0, Interpolation::Linear);
    assert_eq!(a, b);
}

#[test]
fn halving_the_step_gains_fourth_order_with_cubic_history() {
    let e1 = max_error(&scalar_run(DelayKind::Zero, 0.04, 2000, 10.0, Interpolation::Cubic));
    let e2 = max_error(&scalar_run(DelayKind::Zero, 0.02, 2000, 10.0, Interpolation::Cubic));
    let r = e1 / e2;
    assert!((14.0..18.0).contains(&r), "ratio {r} ({e1:e} / {e2:e})");
}

#[test]
fn halving_the_step_gains_second_order_with_linear_history() {
    let e1 = max_error(&scalar_run(DelayKind::Zero, 0.04, 2000, 10.0, Interpolation::Linear));
    let e2 = max_error(&scalar_run(DelayKind::Zero, 0.02, 2000, 10.0, Interpolation::Linear));
    let r = e1 / e2;
    assert!((3.5..4.5).contains(&r), "ratio {r}");
}

#[test]
fn actual_predictor_residual_is_second_order() {
    let kind = || DelayKind::TimeSinusoidal {
        bias: 0.0,
        amplitude: 0.2,
        frequency: 1.0,
    };
    let plant = PlantModel::linear(m1(1.0), m1(1.0)).unwrap();
    let delay = DelayModel::new(1.0, kind()).unwrap();
    let runs: Vec<(f64, Trajectory)> = [1e-2, 5e-3, 2.5e-3]
        .into_iter()
        .map(|h| (h, scalar_run(kind(), h, 100, 8.0, Interpolation::Linear)))
        .collect();
    let res = |traj: &Trajectory, t: f64| actual_predictor_diagnostic(traj, &plant, &delay, t).unwrap().residual;
    for (h, traj) in &runs {
        for t in [0.5, 2.0, 3.0, 4.4, 5.9] {
            let r = res(traj, t);
            assert!(r <= 2.0 * h * h, "h = {h}, t = {t}: {r:e}");
        }
    }
    // the window over the start-up jump converges cleanly
    for pair in runs.windows(2) {
        let ratio = res(&pair[0].1, 0.5) / res(&pair[1].1, 0.5);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn backstepped_boundary_vanishes_along_the_run() {
    let traj = scalar_run(
        DelayKind::TimeSinusoidal {
            bias: 0.0,
            amplitude: 0.2,
            frequency: 1.0,
        },
        1e-3,
        100,
        8.0,
        Interpolation::Linear,
    );
    let hist = traj.input_history().unwrap();
    for k in (0..traj.len()).step_by(250) {
        let t = traj.time[k];
        let uhat = hist.observer_grid(t, 1.0, 100).unwrap();
        let w = backstep(traj.x(k), &uhat, &m1(1.0), &m1(1.0), &m1(-2.0), 1.0);
        assert!(w.value(100)[0].abs() <= 1e-4, "t = {t}: {}", w.value(100)[0]);
    }
}

#[test]
fn lyapunov_functional_decreases_without_perturbation() {
    let mut cfg_traj = scalar_run(DelayKind::Zero, 1e-3, 100, 10.0, Interpolation::Linear);
    let spec = ControllerSpec::linear(m1(1.0), m1(1.0), m1(-2.0), 1.0, 100).unwrap();
    let delay = DelayModel::new(1.0, DelayKind::Zero).unwrap();
    predfeed_core::lyapunov::attach_diagnostics(&mut cfg_traj, &spec, &delay).unwrap();
    let vl = cfg_traj.diagnostic("VL").unwrap();
    let eps = 10.0 / (100.0f64 * 100.0);
    let from = cfg_traj.index_of(1.0);
    for k in from + 1..vl.len() {
        assert!(vl[k] <= vl[k - 1] * (1.0 + eps), "t = {}", cfg_traj.time[k]);
    }
}

#[test]
fn nonpositive_total_delay_is_rejected() {
    let plant = PlantModel::linear(m1(1.0), m1(1.0)).unwrap();
    let spec = ControllerSpec::linear(m1(1.0), m1(1.0), m1(-2.0), 1.0, 50).unwrap();
    let delay = DelayModel::new(1.0, DelayKind::Constant(-1.0)).unwrap();
    let cfg = SimConfig::new(vec![1.0], 1, 8.0);
    assert!(simulate(&plant, &spec, &delay, &cfg).is_err());

    // the delay drops below zero mid-run
    let delay = DelayModel::new(
        1.0,
        DelayKind::TimeSinusoidal {
            bias: 0.0,
            amplitude: -1.5,
            frequency: 0.2,
        },
    )
    .unwrap();
    let traj = simulate(&plant, &spec, &delay, &cfg).unwrap();
    assert_eq!(traj.fault.map(|f| f.kind), Some(FaultKind::Feasibility));
}
