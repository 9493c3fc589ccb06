//! Time stepping for the gastric model.
//!
//! The integration span is cut at every dose time and every midnight. Inside
//! a segment both exogenous inputs are smooth: the PPI level is a single
//! decaying exponential and the food profile keeps its day anchor, so the
//! Runge–Kutta schemes keep their order. Steps also land exactly on every
//! point of the sampling grid `k·Δ_s`, which is anchored at absolute time so
//! that traces started at different times share sample instants.

use std::io::Write;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::model::{self, check_admissible, FoodProfile, GastricState, ModelParams, STATE_DIM};
use crate::pk::{ppi_concentration, DoseSchedule};

type State = [f64; STATE_DIM];

/// Stops closer than this (in hours) are merged.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classic fourth-order Runge–Kutta with step `step` (hours).
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative error control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Spacing of the output grid, hours. Also the largest step taken.
    pub sample_interval: f64,
    /// Allowed excursion below zero (and above one for `pp_n`).
    pub invariant_slack: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45 {
                abs_tol: 1e-9,
                rel_tol: 1e-7,
            },
            sample_interval: 0.01,
            invariant_slack: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64, sample_interval: f64) -> Self {
        Self {
            method: Method::Rk4 { step },
            sample_interval,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4 { step } => step > 0.0,
            Method::Rk45 { abs_tol, rel_tol } => abs_tol > 0.0 && rel_tol > 0.0,
        };
        if !ok || !(self.sample_interval > 0.0) || !(self.invariant_slack >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid integrator settings {self:?}")));
        }
        Ok(())
    }
}

/// Densely sampled simulation output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub states: Vec<GastricState>,
    /// Food level at each sample.
    pub food: Vec<f64>,
    /// PPI blood level at each sample, mmol/L.
    pub ppi: Vec<f64>,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&GastricState> {
        self.states.last()
    }

    /// Appends `other`, dropping its first sample when it repeats our last one.
    pub fn append(&mut self, other: SimulationTrace) {
        let skip = match (self.times.last(), other.times.first()) {
            (Some(&a), Some(&b)) if (a - b).abs() <= TIME_EPS => 1,
            _ => 0,
        };
        self.times.extend_from_slice(&other.times[skip..]);
        self.states.extend_from_slice(&other.states[skip..]);
        self.food.extend_from_slice(&other.food[skip..]);
        self.ppi.extend_from_slice(&other.ppi[skip..]);
    }

    /// Series of one state component.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.to_array()[index]).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time_h"];
        header.extend_from_slice(&model::STATE_NAMES);
        header.extend_from_slice(&["Fd", "PPI"]);
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            row.clear();
            row.push(self.times[i].to_string());
            row.extend(self.states[i].to_array().iter().map(f64::to_string));
            row.push(self.food[i].to_string());
            row.push(self.ppi[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Largest sampled corpal acid in `[start, end]`.
pub fn max_corpal_acid(trace: &SimulationTrace, start: f64, end: f64) -> Result<f64> {
    trace
        .times
        .iter()
        .zip(&trace.states)
        .filter(|(t, _)| **t >= start - TIME_EPS && **t <= end + TIME_EPS)
        .map(|(_, s)| s.a_c)
        .reduce(f64::max)
        .ok_or(Error::EmptyWindow { start, end })
}

/// Where a reported point sits: on the output grid (or a breakpoint), or an
/// interior step endpoint of the adaptive controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Sample,
    Step,
}

/// Integrates from `initial` over `[t_start, t_end]` and records every
/// sample.
pub fn simulate(
    initial: &GastricState,
    t_start: f64,
    t_end: f64,
    schedule: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &IntegratorConfig,
) -> Result<SimulationTrace> {
    let mut trace = SimulationTrace::default();
    integrate(
        initial,
        t_start,
        t_end,
        schedule,
        params,
        profile,
        config,
        |t, x, kind| {
            if kind == PointKind::Sample {
                trace.times.push(t);
                trace.states.push(GastricState::from_array(*x));
                trace.food.push(profile.level(t));
                trace.ppi.push(ppi_concentration(t, schedule, params));
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok(trace)
}

/// Untreated simulation from the cold start over `days` whole days; returns
/// the state at midnight of the last day.
pub fn run_in(
    params: &ModelParams,
    profile: &FoodProfile,
    days: u32,
    config: &IntegratorConfig,
) -> Result<GastricState> {
    if days == 0 {
        return Err(Error::InvalidInput("run-in needs at least one day".into()));
    }
    let (state, _) = integrate(
        &GastricState::cold_start(params),
        0.0,
        24.0 * days as f64,
        &DoseSchedule::new(),
        params,
        profile,
        config,
        |_, _, _| ControlFlow::Continue(()),
    )?;
    Ok(state)
}

/// Core stepping loop. `observe` sees the initial point, every stop and,
/// for adaptive stepping, every interior step endpoint; returning
/// `Break` ends the integration early. Returns the last state reached and
/// whether the run was cut short.
#[allow(clippy::too_many_arguments)]
pub fn integrate<F>(
    initial: &GastricState,
    t_start: f64,
    t_end: f64,
    schedule: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &IntegratorConfig,
    mut observe: F,
) -> Result<(GastricState, bool)>
where
    F: FnMut(f64, &State, PointKind) -> ControlFlow<()>,
{
    config.validate()?;
    if !(t_start < t_end) {
        return Err(Error::InvalidInput(format!(
            "empty integration span [{t_start}, {t_end}]"
        )));
    }
    let slack = config.invariant_slack;
    let mut x = initial.to_array();
    check_admissible(&x, slack, t_start)?;

    let breaks = breakpoints(t_start, t_end, schedule);
    let stops = stops(t_start, t_end, config.sample_interval, &breaks);

    if observe(t_start, &x, PointKind::Sample).is_break() {
        return Ok((GastricState::from_array(x), true));
    }

    let mut stepper = Stepper::new(config.method);
    let mut next_break = 1;
    let mut forcing = Forcing::at(t_start, schedule, params);
    for pair in stops.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if next_break < breaks.len() && a >= breaks[next_break] - TIME_EPS {
            forcing = Forcing::at(a, schedule, params);
            stepper.invalidate();
            next_break += 1;
        }
        let f = |t: f64, y: &State| -> Result<State> {
            model::rhs(y, t, profile.level_in_day(t, forcing.day), forcing.ppi(t, params), params)
        };
        let stopped = stepper.advance(&f, a, b, &mut x, slack, &mut observe)?;
        if stopped {
            return Ok((GastricState::from_array(x), true));
        }
        if observe(b, &x, PointKind::Sample).is_break() {
            return Ok((GastricState::from_array(x), true));
        }
    }
    Ok((GastricState::from_array(x), false))
}

/// Dose times and midnights strictly inside the span, bracketed by its ends.
fn breakpoints(t_start: f64, t_end: f64, schedule: &DoseSchedule) -> Vec<f64> {
    let mut out: Vec<f64> = schedule
        .times()
        .filter(|&t| t > t_start + TIME_EPS && t < t_end - TIME_EPS)
        .collect();
    let mut midnight = model::day_start(t_start) + 24.0;
    while midnight < t_end - TIME_EPS {
        if midnight > t_start + TIME_EPS {
            out.push(midnight);
        }
        midnight += 24.0;
    }
    out.push(t_start);
    out.push(t_end);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);
    out
}

/// Grid points `k·Δ_s` inside the span merged with the breakpoints.
fn stops(t_start: f64, t_end: f64, dt: f64, breaks: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(((t_end - t_start) / dt) as usize + breaks.len() + 2);
    let mut k = (t_start / dt).floor() as i64 + 1;
    let mut bi = 0;
    loop {
        let g = k as f64 * dt;
        let g = if g < t_end - TIME_EPS { Some(g) } else { None };
        // breakpoints win over grid points that nearly coincide
        while bi < breaks.len() && g.is_none_or(|g| breaks[bi] <= g + TIME_EPS) {
            out.push(breaks[bi]);
            bi += 1;
        }
        match g {
            Some(g) => {
                if out.last().is_none_or(|&l| g > l + TIME_EPS) {
                    out.push(g);
                }
                k += 1;
            }
            None => break,
        }
    }
    out
}

/// Exogenous inputs on one segment between breakpoints.
#[derive(Debug, Clone, Copy)]
struct Forcing {
    start: f64,
    day: f64,
    ppi_start: f64,
}

impl Forcing {
    fn at(t: f64, schedule: &DoseSchedule, params: &ModelParams) -> Self {
        Self {
            start: t,
            day: model::day_start(t + TIME_EPS),
            ppi_start: ppi_concentration(t + TIME_EPS, schedule, params),
        }
    }

    #[inline]
    fn ppi(&self, t: f64, params: &ModelParams) -> f64 {
        if self.ppi_start == 0.0 {
            0.0
        } else {
            self.ppi_start * (-params.k_el * (t - self.start)).exp()
        }
    }
}

struct Stepper {
    method: Method,
    /// Adaptive step carried between intervals.
    h: Option<f64>,
    /// First-same-as-last derivative, valid while the forcing is unchanged.
    fsal: Option<State>,
}

impl Stepper {
    fn new(method: Method) -> Self {
        Self {
            method,
            h: None,
            fsal: None,
        }
    }

    fn invalidate(&mut self) {
        self.fsal = None;
    }

    /// Advances `x` from `a` to exactly `b`. Returns `true` if the observer
    /// asked to stop at an interior step.
    fn advance<D, F>(
        &mut self,
        f: &D,
        a: f64,
        b: f64,
        x: &mut State,
        slack: f64,
        observe: &mut F,
    ) -> Result<bool>
    where
        D: Fn(f64, &State) -> Result<State>,
        F: FnMut(f64, &State, PointKind) -> ControlFlow<()>,
    {
        match self.method {
            Method::Rk4 { step } => {
                let n = ((b - a) / step - 1e-9).ceil().max(1.0) as usize;
                let h = (b - a) / n as f64;
                for i in 0..n {
                    let t = a + i as f64 * h;
                    *x = rk4_step(f, t, x, h)?;
                    let t_next = if i + 1 == n { b } else { a + (i + 1) as f64 * h };
                    check_admissible(x, slack, t_next)?;
                    if i + 1 < n && observe(t_next, x, PointKind::Step).is_break() {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Method::Rk45 { abs_tol, rel_tol } => {
                self.advance_adaptive(f, a, b, x, slack, abs_tol, rel_tol, observe)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_adaptive<D, F>(
        &mut self,
        f: &D,
        a: f64,
        b: f64,
        x: &mut State,
        slack: f64,
        abs_tol: f64,
        rel_tol: f64,
        observe: &mut F,
    ) -> Result<bool>
    where
        D: Fn(f64, &State) -> Result<State>,
        F: FnMut(f64, &State, PointKind) -> ControlFlow<()>,
    {
        let mut t = a;
        let mut proposal = self.h.unwrap_or(b - a);
        loop {
            let remaining = b - t;
            let clipped = proposal >= 0.99 * remaining;
            let h = if clipped { remaining } else { proposal };
            if h <= 1e-12 * t.abs().max(1.0) {
                return Err(Error::StepFailure { t, h });
            }
            let k1 = match self.fsal {
                Some(k) => k,
                None => f(t, x)?,
            };
            let (y, k7, err) = dopri_step(f, t, x, h, &k1, abs_tol, rel_tol)?;
            if err <= 1.0 {
                *x = y;
                self.fsal = Some(k7);
                let t_new = if clipped { b } else { t + h };
                check_admissible(x, slack, t_new)?;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a step shortened to hit the stop says little about the next one
                proposal = if clipped && grow >= 1.0 { proposal } else { h * grow };
                self.h = Some(proposal);
                if clipped {
                    return Ok(false);
                }
                t = t_new;
                if observe(t, x, PointKind::Step).is_break() {
                    return Ok(true);
                }
            } else {
                self.fsal = Some(k1);
                proposal = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
    }
}

fn axpy(x: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *x;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn rk4_step<D>(f: &D, t: f64, x: &State, h: f64) -> Result<State>
where
    D: Fn(f64, &State) -> Result<State>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, h, &[(0.5, &k1)]))?;
    let k3 = f(t + 0.5 * h, &axpy(x, h, &[(0.5, &k2)]))?;
    let k4 = f(t + h, &axpy(x, h, &[(1.0, &k3)]))?;
    Ok(axpy(
        x,
        h,
        &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)],
    ))
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri_step<D>(
    f: &D,
    t: f64,
    x: &State,
    h: f64,
    k1: &State,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(State, State, f64)>
where
    D: Fn(f64, &State) -> Result<State>,
{
    let k2 = f(t + C2 * h, &axpy(x, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &axpy(x, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &axpy(x, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(
        t + C5 * h,
        &axpy(x, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &axpy(x, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    )?;
    let y = axpy(x, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y)?;
    let mut sum = 0.0;
    for i in 0..STATE_DIM {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = abs_tol + rel_tol * x[i].abs().max(y[i].abs());
        sum += (e / scale).powi(2);
    }
    let err = (sum / STATE_DIM as f64).sqrt();
    if !err.is_finite() {
        return Ok((y, k7, f64::INFINITY));
    }
    Ok((y, k7, err))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pk::DoseEvent;

    #[test]
    fn stops_merge_grid_and_breaks() {
        let breaks = breakpoints(0.0, 0.05, &DoseSchedule::new());
        let s = stops(0.0, 0.05, 0.01, &breaks);
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), 0.05);
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stops_include_dose_times_and_midnight() {
        let sched = DoseSchedule::from_events([DoseEvent {
            day: 1,
            slot: 1,
            time: 23.995,
            amount: 1.0,
        }])
        .unwrap();
        let breaks = breakpoints(23.9, 24.1, &sched);
        assert_eq!(breaks, vec![23.9, 23.995, 24.0, 24.1]);
        let s = stops(23.9, 24.1, 0.01, &breaks);
        assert!(s.contains(&23.995));
        assert!(s.contains(&24.0));
        assert!(s.windows(2).all(|w| w[1] - w[0] > TIME_EPS));
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        // Only pp_n moves when every secretion rate is zero: dp/dt = K_deg (1 - p).
        let mut p = ModelParams::calibrated();
        for key in ModelParams::KEYS {
            if key.starts_with("K_") || *key == "Bas_1" || *key == "Bas_2" {
                p.set(key, 0.0);
            }
        }
        p.k_deg = 0.5;
        let init = GastricState { pp_n: 0.2, ..Default::default() };
        let trace = simulate(
            &init,
            0.0,
            4.0,
            &DoseSchedule::new(),
            &p,
            &FoodProfile::fasting(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let last = trace.last_state().unwrap().pp_n;
        let exact = 1.0 - 0.8 * (-2.0f64).exp();
        assert!((last - exact).abs() < 1e-9, "{last} vs {exact}");
    }

    #[test]
    fn empty_window_is_an_error() {
        let trace = SimulationTrace {
            times: vec![0.0, 1.0],
            states: vec![GastricState::default(); 2],
            food: vec![0.0; 2],
            ppi: vec![0.0; 2],
        };
        assert!(matches!(
            max_corpal_acid(&trace, 2.0, 3.0),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn rejects_empty_span() {
        let p = ModelParams::calibrated();
        let r = simulate(
            &GastricState::cold_start(&p),
            5.0,
            5.0,
            &DoseSchedule::new(),
            &p,
            &FoodProfile::default(),
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
