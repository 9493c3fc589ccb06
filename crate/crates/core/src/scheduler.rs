//! Receding-horizon PPI dose scheduling.
//!
//! At each dosing time the smallest dose in `[0, d_max]` that keeps corpal
//! acid under the ceiling over the prediction horizon is found by bisection
//! on the feasibility of a forward simulation. The plant then advances to the
//! next dosing time with that dose and the search repeats.

use std::io::Write;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::integrator::{integrate, run_in, simulate, IntegratorConfig, SimulationTrace};
use crate::model::{FoodProfile, GastricState, ModelParams, A_C};
use crate::par::{self, Execution};
use crate::pk::{DoseEvent, DoseSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentConfig {
    pub treatment_days: u32,
    /// Dosing clock times within each day, hours in `[0, 24)`.
    pub slot_times: Vec<f64>,
    /// Prediction horizon `T_p`, hours.
    pub horizon: f64,
    /// Corpal acid ceiling, mol/L.
    pub acid_max: f64,
    /// Largest single dose, mg.
    pub dose_max: f64,
    /// Bisection gap tolerance, mg.
    pub delta: f64,
    /// Safety cap on simulations per bisection.
    pub max_iterations: usize,
    /// Untreated days simulated from the cold start before treatment.
    pub run_in_days: u32,
}

impl Default for TreatmentConfig {
    fn default() -> Self {
        Self {
            treatment_days: 15,
            slot_times: vec![5.0, 17.0],
            horizon: 12.0,
            acid_max: 0.035,
            dose_max: 100.0,
            delta: 0.1,
            max_iterations: 64,
            run_in_days: 5,
        }
    }
}

impl TreatmentConfig {
    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.horizon > 0.0) {
            out.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.acid_max > 0.0) {
            out.push(format!("acid_max must be positive, got {}", self.acid_max));
        }
        if !(self.dose_max > 0.0) {
            out.push(format!("dose_max must be positive, got {}", self.dose_max));
        }
        if !(self.delta > 0.0) {
            out.push(format!("delta must be positive, got {}", self.delta));
        }
        if self.max_iterations == 0 {
            out.push("max_iterations must be at least 1".into());
        }
        if self.run_in_days == 0 {
            out.push("run_in_days must be at least 1".into());
        }
        if self.slot_times.is_empty() {
            out.push("at least one dosing slot is required".into());
        }
        for t in &self.slot_times {
            if !(*t >= 0.0 && *t < 24.0) {
                out.push(format!("slot time {t} outside [0, 24)"));
            }
        }
        if self.slot_times.windows(2).any(|w| w[1] <= w[0]) {
            out.push("slot times must be strictly increasing".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(v.join("; ")))
        }
    }

    pub fn span_end(&self) -> f64 {
        24.0 * self.treatment_days as f64
    }

    /// `(day, slot, time)` of every dosing time in the treatment, in order.
    pub fn dosing_times(&self) -> Vec<(u32, u32, f64)> {
        (1..=self.treatment_days)
            .flat_map(|day| {
                self.slot_times.iter().enumerate().map(move |(j, s)| {
                    (day, j as u32 + 1, 24.0 * (day - 1) as f64 + s)
                })
            })
            .collect()
    }
}

/// Outcome of one dose search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseDecision {
    pub time: f64,
    pub dose: f64,
    /// Simulations run by the search.
    pub iterations: usize,
    pub feasible: bool,
    /// Peak corpal acid over the horizon with the chosen dose.
    pub peak_acid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub schedule: DoseSchedule,
    pub log: Vec<DoseDecision>,
    /// Plant trace over `[0, 24·treatment_days]`.
    pub trace: SimulationTrace,
    /// State at the start of treatment (end of run-in).
    pub initial_state: GastricState,
}

impl OptimizationResult {
    pub fn write_log_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["dose_time_h", "dose_mg", "iterations", "feasible", "peak_AC_horizon_M"])?;
        for d in &self.log {
            w.write_record([
                d.time.to_string(),
                d.dose.to_string(),
                d.iterations.to_string(),
                d.feasible.to_string(),
                d.peak_acid.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub feasible: bool,
    pub peak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    pub dose: f64,
    pub iterations: usize,
    pub peak: f64,
}

/// Smallest feasible dose in `[0, d_max]` to within `delta`.
///
/// The zero dose is tried first and returned at once when feasible.
/// Otherwise `d_max` must be feasible (else [`Error::Infeasible`]) and the
/// bracket `[lower, upper]` halves until `upper - lower <= delta`. The
/// returned dose is always the last candidate that was simulated feasible.
pub fn bisect_min_feasible<F>(
    d_max: f64,
    delta: f64,
    acid_max: f64,
    max_iterations: usize,
    mut probe: F,
) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<Probe>,
{
    let mut iterations = 1;
    let zero = probe(0.0)?;
    if zero.feasible {
        return Ok(Bisection {
            dose: 0.0,
            iterations,
            peak: zero.peak,
        });
    }
    iterations += 1;
    let top = probe(d_max)?;
    if !top.feasible {
        return Err(Error::Infeasible {
            d_max,
            acid_max,
            peak: top.peak,
        });
    }
    let (mut lower, mut upper, mut upper_peak) = (0.0, d_max, top.peak);
    while upper - lower > delta {
        if iterations >= max_iterations {
            return Err(Error::IterationCap { cap: max_iterations });
        }
        iterations += 1;
        let candidate = 0.5 * (lower + upper);
        let p = probe(candidate)?;
        if p.feasible {
            upper = candidate;
            upper_peak = p.peak;
        } else {
            lower = candidate;
        }
    }
    Ok(Bisection {
        dose: upper,
        iterations,
        peak: upper_peak,
    })
}

/// Peak corpal acid over `[t_start, t_end]`, checked at every sample and
/// step endpoint. With `abort_above`, integration stops at the first point
/// exceeding it and that value is returned.
#[allow(clippy::too_many_arguments)]
pub fn peak_corpal_acid(
    state: &GastricState,
    t_start: f64,
    t_end: f64,
    schedule: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    integ: &IntegratorConfig,
    abort_above: Option<f64>,
) -> Result<f64> {
    let mut peak = f64::NEG_INFINITY;
    integrate(state, t_start, t_end, schedule, params, profile, integ, |_, x, _| {
        peak = peak.max(x[A_C]);
        match abort_above {
            Some(limit) if x[A_C] > limit => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    })?;
    Ok(peak)
}

fn dose_event(time: f64, amount: f64, existing: &DoseSchedule) -> DoseEvent {
    let day = (time / 24.0).floor() as u32 + 1;
    let slot = existing.events().iter().filter(|e| e.day == day).count() as u32 + 1;
    DoseEvent {
        day,
        slot,
        time,
        amount,
    }
}

/// Horizon feasibility of giving `dose` at `time` on top of `accumulated`.
#[allow(clippy::too_many_arguments)]
pub fn probe_dose(
    state: &GastricState,
    time: f64,
    dose: f64,
    accumulated: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<Probe> {
    let schedule = accumulated.with(dose_event(time, dose, accumulated))?;
    let peak = peak_corpal_acid(
        state,
        time,
        time + config.horizon,
        &schedule,
        params,
        profile,
        integ,
        Some(config.acid_max),
    )?;
    Ok(Probe {
        feasible: peak <= config.acid_max,
        peak,
    })
}

/// Minimal dose at `time` that keeps corpal acid under the ceiling for the
/// following horizon, starting from the plant state at `time`.
pub fn optimize_dose(
    state: &GastricState,
    time: f64,
    accumulated: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<DoseDecision> {
    let b = bisect_min_feasible(
        config.dose_max,
        config.delta,
        config.acid_max,
        config.max_iterations,
        |dose| probe_dose(state, time, dose, accumulated, params, profile, config, integ),
    )?;
    Ok(DoseDecision {
        time,
        dose: b.dose,
        iterations: b.iterations,
        feasible: b.peak <= config.acid_max,
        peak_acid: b.peak,
    })
}

/// Horizon peaks for a batch of candidate doses, without early abort.
#[allow(clippy::too_many_arguments)]
pub fn horizon_peaks(
    state: &GastricState,
    time: f64,
    doses: &[f64],
    accumulated: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
    exec: Execution,
) -> Result<Vec<f64>> {
    par::map(doses, exec, |&dose| {
        let schedule = accumulated.with(dose_event(time, dose, accumulated))?;
        peak_corpal_acid(state, time, time + config.horizon, &schedule, params, profile, integ, None)
    })
    .into_iter()
    .collect()
}

/// Run-in followed by the receding-horizon treatment.
pub fn run_treatment(
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let initial = run_in(params, profile, config.run_in_days, integ)?;
    run_treatment_from(&initial, params, profile, config, integ)
}

/// Receding-horizon treatment starting from `initial` at t = 0.
pub fn run_treatment_from(
    initial: &GastricState,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let mut schedule = DoseSchedule::new();
    let mut log = Vec::new();
    let mut trace = single_sample(initial, profile);
    let mut state = *initial;
    let mut t = 0.0;

    for (day, slot, time) in config.dosing_times() {
        if time > t {
            let leg = simulate(&state, t, time, &schedule, params, profile, integ)?;
            state = *leg.last_state().expect("non-empty leg");
            trace.append(leg);
            t = time;
        }
        let decision = optimize_dose(&state, time, &schedule, params, profile, config, integ)
            .map_err(|e| Error::AtDose {
                time,
                source: Box::new(e),
            })?;
        schedule.push(DoseEvent {
            day,
            slot,
            time,
            amount: decision.dose,
        })?;
        log.push(decision);
    }
    let end = config.span_end();
    if end > t {
        trace.append(simulate(&state, t, end, &schedule, params, profile, integ)?);
    }
    Ok(OptimizationResult {
        schedule,
        log,
        trace,
        initial_state: *initial,
    })
}

fn single_sample(state: &GastricState, profile: &FoodProfile) -> SimulationTrace {
    SimulationTrace {
        times: vec![0.0],
        states: vec![*state],
        food: vec![profile.level(0.0)],
        ppi: vec![0.0],
    }
}

/// The same dose at every slot of every treatment day.
pub fn fixed_regimen(dose: f64, config: &TreatmentConfig) -> Result<DoseSchedule> {
    if !(dose >= 0.0 && dose <= config.dose_max) {
        return Err(Error::InvalidInput(format!(
            "fixed dose {dose} mg outside [0, {}]",
            config.dose_max
        )));
    }
    DoseSchedule::from_events(config.dosing_times().into_iter().map(|(day, slot, time)| {
        DoseEvent {
            day,
            slot,
            time,
            amount: dose,
        }
    }))
}

/// Simulates a full regimen from `initial` over the treatment span.
pub fn simulate_regimen(
    initial: &GastricState,
    schedule: &DoseSchedule,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<SimulationTrace> {
    if config.treatment_days == 0 {
        return Ok(single_sample(initial, profile));
    }
    simulate(initial, 0.0, config.span_end(), schedule, params, profile, integ)
}

/// Whether the fixed regimen at `dose` keeps acid under the ceiling over
/// the whole treatment; stops at the first violation.
pub fn probe_fixed(
    initial: &GastricState,
    dose: f64,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<Probe> {
    let schedule = fixed_regimen(dose, config)?;
    let peak = if config.treatment_days == 0 {
        initial.a_c
    } else {
        peak_corpal_acid(
            initial,
            0.0,
            config.span_end(),
            &schedule,
            params,
            profile,
            integ,
            Some(config.acid_max),
        )?
    };
    Ok(Probe {
        feasible: peak <= config.acid_max,
        peak,
    })
}

/// Smallest per-dose amount of a fixed regimen that satisfies the ceiling
/// for the whole treatment, within `delta`.
pub fn min_fixed_dose(
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<Bisection> {
    config.validate()?;
    let initial = run_in(params, profile, config.run_in_days, integ)?;
    min_fixed_dose_from(&initial, params, profile, config, integ)
}

pub fn min_fixed_dose_from(
    initial: &GastricState,
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
) -> Result<Bisection> {
    bisect_min_feasible(
        config.dose_max,
        config.delta,
        config.acid_max,
        config.max_iterations,
        |dose| probe_fixed(initial, dose, params, profile, config, integ),
    )
}

/// Per-day doses of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseTable {
    pub slots: usize,
    /// `(day, dose per slot)`.
    pub rows: Vec<(u32, Vec<f64>)>,
}

impl DoseTable {
    pub fn from_schedule(schedule: &DoseSchedule, config: &TreatmentConfig) -> Self {
        let slots = config.slot_times.len();
        let rows = (1..=config.treatment_days)
            .map(|day| {
                let mut doses = vec![0.0; slots];
                for e in schedule.events().iter().filter(|e| e.day == day) {
                    if let Some(d) = doses.get_mut(e.slot as usize - 1) {
                        *d = e.amount;
                    }
                }
                (day, doses)
            })
            .collect();
        Self { slots, rows }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["day".to_string()];
        header.extend((1..=self.slots).map(|j| format!("slot_{j}_mg")));
        header.push("total_mg".into());
        w.write_record(&header)?;
        for (day, doses) in &self.rows {
            let mut row = vec![day.to_string()];
            row.extend(doses.iter().map(f64::to_string));
            row.push(doses.iter().sum::<f64>().to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct SeverityOutcome {
    pub k_ag: f64,
    pub result: Result<OptimizationResult>,
}

impl SeverityOutcome {
    pub fn dose_table(&self, config: &TreatmentConfig) -> Option<DoseTable> {
        self.result
            .as_ref()
            .ok()
            .map(|r| DoseTable::from_schedule(&r.schedule, config))
    }
}

/// Runs run-in and treatment for each `k_AG` value independently. Failures
/// are kept per value.
pub fn sweep_severity(
    k_ag_values: &[f64],
    params: &ModelParams,
    profile: &FoodProfile,
    config: &TreatmentConfig,
    integ: &IntegratorConfig,
    exec: Execution,
) -> Vec<SeverityOutcome> {
    par::map(k_ag_values, exec, |&k_ag| {
        let result = if !(k_ag > 0.0) {
            Err(Error::InvalidInput(format!("k_AG must be positive, got {k_ag}")))
        } else {
            let mut p = params.clone();
            p.k_ag = k_ag;
            run_treatment(&p, profile, config, integ)
        };
        SeverityOutcome { k_ag, result }
    })
}
