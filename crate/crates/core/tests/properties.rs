use nalgebra::DMatrix;
use predfeed_core::delay::{DelayKind, DelayModel, PerturbationMetrics};
use predfeed_core::grid::GridFunction;
use predfeed_core::history::{InputHistory, Interpolation};
use predfeed_core::lyapunov::{backstep, inverse_backstep, lyapunov_value, make_lyapunov_config};
use predfeed_core::predictor::{linear_predictor, nonlinear_predictor, ControllerSpec, NominalLaw, PlantModel};
use proptest::prelude::*;
use std::sync::Arc;

/// Smooth random signal `Σ a_k sin(ω_k θ + φ_k)`.
#[derive(Debug, Clone)]
struct Wave(Vec<(f64, f64, f64)>);

impl Wave {
    fn at(&self, t: f64) -> f64 {
        self.0.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum()
    }
}

fn wave() -> impl Strategy<Value = Wave> {
    prop::collection::vec((-1.0..1.0f64, 0.2..3.0f64, 0.0..6.3f64), 1..4).prop_map(Wave)
}

fn history(waves: &[Wave], from: f64, to: f64, h: f64) -> InputHistory {
    let mut hist = InputHistory::new(waves.len(), 2.0 * (to - from), Interpolation::Linear).unwrap();
    let count = ((to - from) / h).ceil() as usize;
    for k in 0..=count {
        let t = if k == count { to } else { from + k as f64 * h };
        let u: Vec<f64> = waves.iter().map(|w| w.at(t)).collect();
        hist.push(t, &u).unwrap();
    }
    hist
}

/// `A` random, `B = I`, `K = −A − 2I`, so `A + BK = −2I`.
fn gains(entries: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(2, 2, entries);
    let b = DMatrix::identity(2, 2);
    let k = -&a - DMatrix::identity(2, 2) * 2.0;
    (a, b, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn observer_grid_reads_the_history(w in wave(), t in 1.0..3.0f64, d in 0.3..1.5f64, m in 8usize..64) {
        let hist = history(&[w], -2.0, t, 1e-2);
        let g = hist.observer_grid(t, d, m).unwrap();
        prop_assert_eq!(g.value(m)[0].to_bits(), hist.last_value().unwrap()[0].to_bits());
        for i in 0..m {
            let x = i as f64 / m as f64;
            prop_assert_eq!(g.value(i)[0].to_bits(), hist.eval(t + d * (x - 1.0)).unwrap()[0].to_bits());
        }
    }

    #[test]
    fn observer_transports_along_characteristics(w in wave(), d in 0.3..1.5f64, m in 8usize..40, j in 1usize..8) {
        let hist = history(&[w], -3.0, 3.0, 1e-2);
        let (t1, shift) = (1.0, j.min(m));
        let t2 = t1 + d * shift as f64 / m as f64;
        let g1 = hist.observer_grid(t1, d, m).unwrap();
        let g2 = hist.observer_grid(t2, d, m).unwrap();
        for i in shift..=m {
            prop_assert!((g1.value(i)[0] - g2.value(i - shift)[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn sigma_inverts_phi(amp in 0.0..0.45f64, freq in 0.2..1.0f64, t in 0.0..30.0f64) {
        prop_assume!(2.0 * amp * freq < 0.95);
        let delay = DelayModel::new(1.0, DelayKind::TimeSinusoidal { bias: 0.0, amplitude: amp, frequency: freq }).unwrap();
        let s = delay.predicted_time(t, None).unwrap();
        prop_assert!((s - t - 1.0 - delay.value(s, &[])).abs() <= 1e-10);
        let back = delay.predicted_time(delay.delayed_time(t, &[]), None).unwrap();
        prop_assert!((back - t).abs() <= 1e-9);
    }

    #[test]
    fn lag_stays_positive(rate in 0.1..3.0f64, forcing in 0.0..1.0f64, initial in 1e-3..2.0f64, t in 0.0..50.0f64) {
        let delay = DelayModel::new(1.0, DelayKind::FirstOrderLag { rate, forcing, initial, start: 0.0 }).unwrap();
        prop_assert!(delay.value(t, &[]) > 0.0);
    }

    #[test]
    fn metrics_grow_with_the_perturbation(amp in 0.0..0.3f64, scale in 1.0..3.0f64, freq in 0.2..2.0f64) {
        let m = |a: f64| {
            DelayModel::new(1.0, DelayKind::TimeSinusoidal { bias: 0.0, amplitude: a, frequency: freq })
                .unwrap()
                .perturbation_metrics(20.0, 1e-2, 3.0, 5.0)
                .unwrap()
        };
        let (small, big): (PerturbationMetrics, PerturbationMetrics) = (m(amp), m(scale * amp));
        prop_assert!(big.sup_magnitude_plus_rate >= small.sup_magnitude_plus_rate);
        prop_assert!(big.l1_norm >= small.l1_norm);
        prop_assert!(big.tail_sup >= small.tail_sup);
        prop_assert!(big.moving_average >= small.moving_average);
    }

    #[test]
    fn linear_and_nonlinear_predictors_agree(
        entries in prop::array::uniform4(-1.0..1.0f64),
        w1 in wave(),
        w2 in wave(),
        x in prop::array::uniform2(-2.0..2.0f64),
        d in 0.3..1.5f64,
    ) {
        let (a, b, k) = gains(&entries);
        let m = 200;
        let hist = history(&[w1, w2], -2.0, 1.0, 1e-3);
        let lin = ControllerSpec::linear(a.clone(), b.clone(), k, d, m).unwrap();
        let (p_lin, _) = linear_predictor(&x, &hist, &lin, 1.0).unwrap();
        let plant = PlantModel::linear(a, b).unwrap();
        let law: NominalLaw = Arc::new(|_, _, out| { out.fill(0.0); Ok(()) });
        let non = ControllerSpec::nonlinear(law, d, m).unwrap();
        let obs = hist.observer_grid(1.0, d, m).unwrap();
        let p_non = nonlinear_predictor(&x, &obs, &plant, &non).unwrap();
        for (l, n) in p_lin.iter().zip(p_non.terminal()) {
            prop_assert!((l - n).abs() <= 1e-6, "{} vs {}", l, n);
        }
    }

    #[test]
    fn backstepping_roundtrip_is_second_order(
        entries in prop::array::uniform4(-1.0..1.0f64),
        w1 in wave(),
        w2 in wave(),
        x in prop::array::uniform2(-2.0..2.0f64),
    ) {
        let (a, b, k) = gains(&entries);
        let err = |m: usize| {
            let u = GridFunction::from_fn(2, m, |s, o| { o[0] = w1.at(s); o[1] = w2.at(s); });
            let w = backstep(&x, &u, &a, &b, &k, 1.0);
            let back = inverse_backstep(&x, &w, &a, &b, &k, 1.0);
            (0..=m).flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (back.value(i)[j] - u.value(i)[j]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(50), err(100));
        // C/M² with C bounded by the data's size
        prop_assert!(e1 <= 50.0 / (50.0 * 50.0), "e(50) = {}", e1);
        prop_assert!(e2 <= 50.0 / (100.0 * 100.0), "e(100) = {}", e2);
        if e2 > 1e-11 {
            let r = e1 / e2;
            prop_assert!((3.0..5.0).contains(&r), "ratio {}", r);
        }
    }

    #[test]
    fn lyapunov_functional_is_nonnegative(
        entries in prop::array::uniform4(-1.0..1.0f64),
        x in prop::array::uniform2(-5.0..5.0f64),
        w1 in wave(),
        w2 in wave(),
        pi1 in 0.2..1.0f64,
    ) {
        let (a, b, k) = gains(&entries);
        let cfg = make_lyapunov_config(&a, &b, &k, &DMatrix::identity(2, 2), 1.0, pi1).unwrap();
        let w = GridFunction::from_fn(2, 32, |s, o| { o[0] = w1.at(s); o[1] = w2.at(s); });
        let ut = GridFunction::from_fn(2, 32, |s, o| { o[0] = w2.at(3.0 * s); o[1] = 0.0; });
        prop_assert!(lyapunov_value(&x, &w, &ut, &cfg) >= 0.0);
        prop_assert!(cfg.residual <= 1e-10);
    }
}
