mod common;

use std::ops::ControlFlow;

use common::{argmax_in, worst_invariant_excursion, STATE_SCALES};
use gastrodose::integrator::{integrate, PointKind};
use gastrodose::model::{A_C, GTN_A, N_C, N_E, PP_N, STATE_DIM, S_A};
use gastrodose::{
    max_corpal_acid, run_in, simulate, DoseEvent, DoseSchedule, FoodProfile, GastricState,
    IntegratorConfig, ModelParams,
};

fn rk4_end(initial: &GastricState, step: f64, p: &ModelParams) -> [f64; STATE_DIM] {
    let cfg = IntegratorConfig::rk4(step, 1.0);
    let (end, _) = integrate(initial, 0.0, 24.0, &DoseSchedule::new(), p, &FoodProfile::default(), &cfg, |_, _, _| {
        ControlFlow::Continue(())
    })
    .unwrap();
    end.to_array()
}

fn scaled_error(a: &[f64; STATE_DIM], b: &[f64; STATE_DIM]) -> f64 {
    (0..STATE_DIM).map(|k| (a[k] - b[k]).abs() / STATE_SCALES[k]).fold(0.0, f64::max)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let p = ModelParams::calibrated();
    let start = run_in(&p, &FoodProfile::default(), 2, &IntegratorConfig::default()).unwrap();
    let h = 0.2;
    let reference = rk4_end(&start, h / 8.0, &p);
    let e1 = scaled_error(&rk4_end(&start, h, &p), &reference);
    let e2 = scaled_error(&rk4_end(&start, h / 2.0, &p), &reference);
    let order = (e1 / e2).log2();
    assert!(order >= 3.8, "observed order {order} ({e1:e} -> {e2:e})");
}

#[test]
fn adaptive_agrees_with_fine_rk4() {
    let p = ModelParams::calibrated();
    let start = run_in(&p, &FoodProfile::default(), 2, &IntegratorConfig::default()).unwrap();
    let (adaptive, _) = integrate(
        &start, 0.0, 24.0, &DoseSchedule::new(), &p, &FoodProfile::default(),
        &IntegratorConfig::default(), |_, _, _| ControlFlow::Continue(()),
    )
    .unwrap();
    let fine = rk4_end(&start, 0.005, &p);
    assert!(scaled_error(&adaptive.to_array(), &fine) < 1e-5);
}

#[test]
fn baseline_settles_into_a_daily_cycle() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let x5 = run_in(&p, &profile, 5, &cfg).unwrap();
    let x6 = run_in(&p, &profile, 6, &cfg).unwrap();
    let (a, b) = (x5.to_array(), x6.to_array());
    for k in 0..STATE_DIM {
        let rel = (a[k] - b[k]).abs() / a[k].abs().max(b[k].abs()).max(1e-300);
        assert!(rel <= 1e-3, "component {k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn baseline_timing_and_peak() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let start = run_in(&p, &profile, 5, &cfg).unwrap();
    let trace = simulate(&start, 0.0, 24.0, &DoseSchedule::new(), &p, &profile, &cfg).unwrap();
    for idx in [N_C, N_E] {
        let series = trace.component(idx);
        for c in [7.0, 13.0, 19.0] {
            let t = argmax_in(&trace.times, &series, c - 1.0, c + 3.0);
            assert!((c..=c + 1.0).contains(&t), "neural peak at {t} for meal at {c}");
        }
    }
    let ga = argmax_in(&trace.times, &trace.component(GTN_A), 18.0, 24.0);
    let sa = argmax_in(&trace.times, &trace.component(S_A), 18.0, 24.0);
    assert!(ga < sa, "gastrin peak {ga} should precede somatostatin peak {sa}");
    let peak = max_corpal_acid(&trace, 0.0, 24.0).unwrap();
    assert!((0.045..=0.051).contains(&peak), "untreated peak {peak}");
}

#[test]
fn zero_dynamics_is_a_constant_trace() {
    // no meals and an initial state at the untreated fixed point of the
    // neural and pump equations, all else switched off
    let mut p = ModelParams::calibrated();
    for key in ModelParams::KEYS {
        if key.starts_with("K_") && !["K_deg", "K_r", "K_el"].contains(key) {
            p.set(key, 0.0);
        }
    }
    p.k_bc = 0.0;
    p.k_ba = 0.0;
    p.bas_1 = 0.0;
    p.bas_2 = 0.0;
    let start = GastricState { pp_n: 1.0, ..Default::default() };
    let trace = simulate(&start, 0.0, 48.0, &DoseSchedule::new(), &p, &FoodProfile::fasting(), &IntegratorConfig::default()).unwrap();
    assert!(trace.states.iter().all(|s| *s == start));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let mut s = DoseSchedule::new();
    s.push(DoseEvent { day: 1, slot: 1, time: 5.0, amount: 40.0 }).unwrap();
    s.push(DoseEvent { day: 1, slot: 2, time: 17.0, amount: 20.0 }).unwrap();
    let start = run_in(&p, &profile, 1, &cfg).unwrap();
    let a = simulate(&start, 0.0, 36.0, &s, &p, &profile, &cfg).unwrap();
    let b = simulate(&start, 0.0, 36.0, &s, &p, &profile, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_dose_event_changes_nothing() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let start = run_in(&p, &profile, 1, &cfg).unwrap();
    let mut s = DoseSchedule::new();
    s.push(DoseEvent { day: 1, slot: 1, time: 5.0, amount: 50.0 }).unwrap();
    let mut with_zero = s.clone();
    with_zero.push(DoseEvent { day: 1, slot: 2, time: 11.37, amount: 0.0 }).unwrap();
    let a = simulate(&start, 0.0, 24.0, &s, &p, &profile, &cfg).unwrap();
    let b = simulate(&start, 0.0, 24.0, &with_zero, &p, &profile, &cfg).unwrap();
    assert_eq!(a.times.len(), b.times.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        let (x, y) = (x.to_array(), y.to_array());
        for k in 0..STATE_DIM {
            assert!((x[k] - y[k]).abs() <= 1e-8 * STATE_SCALES[k]);
        }
    }
}

#[test]
fn samples_sit_on_the_absolute_grid() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let start = run_in(&p, &profile, 1, &cfg).unwrap();
    let mut s = DoseSchedule::new();
    s.push(DoseEvent { day: 1, slot: 1, time: 5.003, amount: 30.0 }).unwrap();
    let mut grid_points = 0;
    integrate(&start, 3.0, 8.0, &s, &p, &profile, &cfg, |t, _, kind| {
        if kind == PointKind::Sample && (t - 5.003).abs() > 1e-9 {
            assert!((t / 0.01 - (t / 0.01).round()).abs() < 1e-6, "off-grid sample {t}");
            grid_points += 1;
        }
        ControlFlow::Continue(())
    })
    .unwrap();
    assert_eq!(grid_points, 501);
}

#[test]
fn heavy_dosing_keeps_pumps_in_range() {
    let p = ModelParams::calibrated();
    let profile = FoodProfile::default();
    let cfg = IntegratorConfig::default();
    let start = run_in(&p, &profile, 1, &cfg).unwrap();
    let mut s = DoseSchedule::new();
    for day in 0..3 {
        for (j, t) in [5.0, 17.0].iter().enumerate() {
            s.push(DoseEvent { day: day + 1, slot: j as u32 + 1, time: 24.0 * day as f64 + t, amount: 100.0 }).unwrap();
        }
    }
    let trace = simulate(&start, 0.0, 72.0, &s, &p, &profile, &cfg).unwrap();
    assert!(worst_invariant_excursion(&trace.states) <= 1e-9);
    let pp = trace.component(PP_N);
    assert!(pp.iter().cloned().fold(f64::INFINITY, f64::min) < 0.5);
    let acid = trace.component(A_C);
    assert!(acid.iter().all(|a| *a >= 0.0));
}
