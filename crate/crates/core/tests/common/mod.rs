//! Test-only oracles, written independently of the library code paths.
#![allow(dead_code)]

use std::ops::ControlFlow;

use gastrodose::integrator::integrate;
use gastrodose::model::{A_C, STATE_DIM};
use gastrodose::{
    DoseEvent, DoseSchedule, FoodProfile, GastricState, IntegratorConfig, ModelParams,
    TreatmentConfig,
};
use rand::Rng;

/// Second transcription of the twelve right-hand sides, one term at a time
/// (every secretion fraction carries its full denominator). Returns each derivative and the sum of absolute values of
/// its terms, which is the scale for relative comparisons.
pub fn oracle_rhs(
    x: &[f64; STATE_DIM],
    fd: f64,
    ppi: f64,
    p: &ModelParams,
) -> ([f64; STATE_DIM], [f64; STATE_DIM]) {
    let (ga, gc, sa, sc, h, ac, aa, bc, ba, nc, ne, pp) =
        (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9], x[10], x[11]);
    let g = |k: f64| 1.0 + ac.powi(2) / (ac.powi(2) + k.powi(2));

    let eq1 = [
        p.n_g * p.k_ng1 * ne / ((ne + p.alpha_ng1) * (1.0 + sa / p.k_sg) * g(p.k_ag)),
        p.n_g * p.k_ng2 * nc / ((nc + p.alpha_ng2) * (1.0 + sa / p.k_sg) * g(p.k_ag)),
        p.n_g * p.k_fg * fd / ((fd + p.alpha_fd) * (1.0 + sa / p.k_sg) * g(p.k_ag)),
        -(p.k_g + p.beta_g) * ga,
    ];
    let eq2 = [p.beta_g * ga, -p.k_g * gc];
    let eq3 = [
        p.n_da * p.k_as * aa / ((aa + p.alpha_as) * (1.0 + sa / p.k_ss) * (1.0 + nc / p.k_ns)),
        p.n_da * p.k_ns1 * ne / ((ne + p.alpha_ns1) * (1.0 + sa / p.k_ss) * (1.0 + nc / p.k_ns)),
        -p.k_s * sa,
    ];
    let eq4 = [
        p.n_dc * p.k_gs * gc / ((gc + p.alpha_gs) * (1.0 + sc / p.k_ss) * (1.0 + nc / p.k_ns)),
        p.n_dc * p.k_ns2 * ne / ((ne + p.alpha_ns2) * (1.0 + sc / p.k_ss) * (1.0 + nc / p.k_ns)),
        -p.k_s * sc,
    ];
    let eq5 = [
        p.n_ecl * p.k_nh * ne / ((ne + p.alpha_nh) * (1.0 + sc / p.k_sh)),
        p.n_ecl * p.k_gh * gc / ((gc + p.alpha_gh) * (1.0 + sc / p.k_sh)),
        -p.k_h * h,
    ];
    let eq6 = [
        pp * p.n_p * p.k_ha * h / ((h + p.alpha_ha) * (1.0 + sc / p.k_sa)),
        pp * p.n_p * p.k_na * nc / ((nc + p.alpha_na) * (1.0 + sc / p.k_sa)),
        (h / (h + p.alpha_h)) * (pp * p.n_p * p.k_ga * gc / ((gc + p.alpha_ga) * (1.0 + sc / p.k_sa))),
        -p.hb * ac * bc,
        -p.beta_a * ac,
    ];
    let eq7 = [p.beta_a * ac, -p.k_a * aa];
    let eq8 = [p.k_bc * nc / (nc + p.alpha_nb), -p.hb * ac * bc, -p.k_b * bc];
    let eq9 = [p.k_ba * nc / (nc + p.alpha_nb), -p.hb * aa * ba, -p.k_b * ba];
    let eq10 = [
        p.n_1 * fd / ((fd + p.k1_fd) * g(p.k_an1)),
        -p.k_nc * nc,
        p.bas_1,
    ];
    let eq11 = [
        p.n_2 * fd / ((fd + p.k2_fd) * g(p.k_an2)),
        -p.k_ne * ne,
        p.bas_2,
    ];
    let eq12 = [p.k_deg, -p.k_r * ppi * pp, -p.k_deg * pp];

    let all: [&[f64]; STATE_DIM] = [
        &eq1, &eq2, &eq3, &eq4, &eq5, &eq6, &eq7, &eq8, &eq9, &eq10, &eq11, &eq12,
    ];
    let mut value = [0.0; STATE_DIM];
    let mut scale = [0.0; STATE_DIM];
    for (k, terms) in all.iter().enumerate() {
        value[k] = terms.iter().sum();
        scale[k] = terms.iter().map(|t| t.abs()).sum();
    }
    (value, scale)
}

/// Typical magnitudes of each state component under the default parameters.
pub const STATE_SCALES: [f64; STATE_DIM] = [
    4e-11, 3e-11, 4e-11, 2e-11, 4e-9, 0.05, 0.04, 0.006, 0.006, 2.5, 2.5, 1.0,
];

/// Random admissible state: each component log-uniform over three decades
/// around its typical scale, occasionally exactly zero.
pub fn random_state<R: Rng>(rng: &mut R) -> GastricState {
    let mut x = [0.0; STATE_DIM];
    for (k, v) in x.iter_mut().enumerate() {
        if k == 11 {
            *v = rng.gen_range(0.0..=1.0);
        } else if rng.gen_bool(0.05) {
            *v = 0.0;
        } else {
            *v = STATE_SCALES[k] * 10f64.powf(rng.gen_range(-2.0..1.0));
        }
    }
    GastricState::from_array(x)
}

/// Default parameters with every entry scaled by a factor in `[lo, hi]`.
pub fn random_params<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> ModelParams {
    let mut p = ModelParams::calibrated();
    for key in ModelParams::KEYS {
        let v = p.get(key).unwrap();
        p.set(key, v * rng.gen_range(lo..=hi));
    }
    p
}

/// Maximal secretion rates, the keys perturbed in robustness checks.
pub const SECRETION_RATES: [&str; 12] = [
    "K_NG1", "K_NG2", "K_FG", "K_AS", "K_NS1", "K_GS", "K_NS2", "K_NH", "K_GH", "K_HA", "K_NA",
    "K_GA",
];

pub fn perturb_secretion<R: Rng>(rng: &mut R, spread: f64) -> ModelParams {
    let mut p = ModelParams::calibrated();
    for key in SECRETION_RATES {
        let v = p.get(key).unwrap();
        p.set(key, v * (1.0 + rng.gen_range(-spread..=spread)));
    }
    p
}

/// Whether corpal acid stays under `ceiling` at every reported point of
/// `[t0, t1]`. Stops at the first violation.
#[allow(clippy::too_many_arguments)]
pub fn stays_under(
    state: &GastricState,
    t0: f64,
    t1: f64,
    schedule: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    integ: &IntegratorConfig,
    ceiling: f64,
) -> bool {
    let mut ok = true;
    integrate(state, t0, t1, schedule, params, profile, integ, |_, x, _| {
        if x[A_C] > ceiling {
            ok = false;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .expect("simulation succeeds");
    ok
}

/// Smallest dose on the grid `{0, step, 2·step, …} ∩ [0, d_max]` for which
/// giving it at `time` keeps the horizon feasible; scanned upward, so no
/// monotonicity is assumed.
#[allow(clippy::too_many_arguments)]
pub fn grid_min_horizon_dose(
    state: &GastricState,
    time: f64,
    accumulated: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
    step: f64,
) -> Option<f64> {
    let n = (config.dose_max / step).round() as usize;
    let day = (time / 24.0).floor() as u32 + 1;
    let slot = accumulated.events().iter().filter(|e| e.day == day).count() as u32 + 1;
    (0..=n).map(|i| i as f64 * step).find(|&dose| {
        let mut s = accumulated.clone();
        s.push(DoseEvent { day, slot, time, amount: dose }).unwrap();
        stays_under(state, time, time + config.horizon, &s, params, profile, integ, config.acid_max)
    })
}

/// Same scan for a fixed regimen over the whole treatment.
pub fn grid_min_fixed_dose(
    initial: &GastricState,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
    step: f64,
) -> Option<f64> {
    let n = (config.dose_max / step).round() as usize;
    let end = 24.0 * config.treatment_days as f64;
    (0..=n).map(|i| i as f64 * step).find(|&dose| {
        let mut s = DoseSchedule::new();
        for day in 0..config.treatment_days {
            for (j, slot) in config.slot_times.iter().enumerate() {
                s.push(DoseEvent {
                    day: day + 1,
                    slot: j as u32 + 1,
                    time: 24.0 * day as f64 + slot,
                    amount: dose,
                })
                .unwrap();
            }
        }
        stays_under(initial, 0.0, end, &s, params, profile, integ, config.acid_max)
    })
}

/// Largest componentwise deviation from the admissible box along a trace.
pub fn worst_invariant_excursion(states: &[GastricState]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in states {
        for (k, v) in s.to_array().iter().enumerate() {
            worst = worst.max(-v);
            if k == 11 {
                worst = worst.max(v - 1.0);
            }
        }
    }
    worst
}

/// Local maxima of `series` sampled at `times`, restricted to `[a, b]`.
pub fn argmax_in(times: &[f64], series: &[f64], a: f64, b: f64) -> f64 {
    times
        .iter()
        .zip(series)
        .filter(|(t, _)| **t >= a && **t <= b)
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(t, _)| *t)
        .expect("window has samples")
}
