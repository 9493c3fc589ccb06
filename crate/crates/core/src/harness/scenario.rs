use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::{ScenarioConfig, ScenarioKind};
use crate::harness::report::{emit_report, write_file, ComparisonReport};
use crate::integrator::{max_corpal_acid, run_in, simulate, SimulationTrace};
use crate::model::{FoodProfile, GastricState};
use crate::par::Execution;
use crate::pk::{total_intake, DoseSchedule};
use crate::scheduler::{
    fixed_regimen, min_fixed_dose_from, run_treatment_from, simulate_regimen, sweep_severity,
    DoseTable, OptimizationResult,
};

/// Files written by a scenario plus a short human-readable summary.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// First per-value failure of a sweep; the sweep itself still completes.
    pub sweep_error: Option<String>,
    pub sweep_error_exit: Option<i32>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let profile = FoodProfile::default();
    let mut out = ScenarioOutcome::default();
    match cfg.kind {
        ScenarioKind::Baseline => baseline(cfg, &profile, &mut out)?,
        ScenarioKind::Optimize => {
            let initial = run_in_state(cfg, &profile)?;
            let result = optimize(cfg, &profile, &initial, &mut out)?;
            out.summary = format!(
                "optimized regimen: total {:.1} mg over {} doses, peak A_C {:.5} M\n",
                total_intake(&result.schedule),
                result.schedule.len(),
                max_corpal_acid(&result.trace, f64::NEG_INFINITY, f64::INFINITY)?,
            );
        }
        ScenarioKind::Fixed => {
            let initial = run_in_state(cfg, &profile)?;
            let (dose, trace, schedule) = fixed(cfg, &profile, &initial, &mut out)?;
            out.summary = format!(
                "fixed regimen: {dose:.2} mg per dose, total {:.1} mg, peak A_C {:.5} M\n",
                total_intake(&schedule),
                max_corpal_acid(&trace, f64::NEG_INFINITY, f64::INFINITY)?,
            );
        }
        ScenarioKind::Compare => {
            // both regimens start from the same run-in state
            let initial = run_in_state(cfg, &profile)?;
            let optimized = optimize(cfg, &profile, &initial, &mut out)?;
            let (dose, fixed_trace, fixed_schedule) = fixed(cfg, &profile, &initial, &mut out)?;
            let report = ComparisonReport {
                optimized_total: total_intake(&optimized.schedule),
                fixed_total: total_intake(&fixed_schedule),
                fixed_dose: dose,
                optimized_table: DoseTable::from_schedule(&optimized.schedule, &cfg.treatment),
                fixed_table: DoseTable::from_schedule(&fixed_schedule, &cfg.treatment),
                max_acid_optimized: max_corpal_acid(&optimized.trace, f64::NEG_INFINITY, f64::INFINITY)?,
                max_acid_fixed: max_corpal_acid(&fixed_trace, f64::NEG_INFINITY, f64::INFINITY)?,
                acid_max: cfg.treatment.acid_max,
            };
            out.files.extend(emit_report(&report, &cfg.out_dir)?);
            out.summary = report.summary_text();
        }
        ScenarioKind::Sweep => sweep(cfg, &profile, &mut out)?,
    }
    Ok(out)
}

fn run_in_state(cfg: &ScenarioConfig, profile: &FoodProfile) -> Result<GastricState> {
    run_in(&cfg.params, profile, cfg.treatment.run_in_days, &cfg.integrator)
}

fn baseline(cfg: &ScenarioConfig, profile: &FoodProfile, out: &mut ScenarioOutcome) -> Result<()> {
    let initial = run_in_state(cfg, profile)?;
    let end = 24.0 * cfg.baseline_days as f64;
    let trace = simulate(
        &initial,
        0.0,
        end,
        &DoseSchedule::new(),
        &cfg.params,
        profile,
        &cfg.integrator,
    )?;
    out.files.push(write_trace(&cfg.out_dir, "baseline_trace.csv", &trace)?);
    out.summary = format!(
        "untreated baseline over {} days: peak A_C {:.5} M\n",
        cfg.baseline_days,
        max_corpal_acid(&trace, 0.0, end)?
    );
    Ok(())
}

fn optimize(
    cfg: &ScenarioConfig,
    profile: &FoodProfile,
    initial: &GastricState,
    out: &mut ScenarioOutcome,
) -> Result<OptimizationResult> {
    let result = run_treatment_from(initial, &cfg.params, profile, &cfg.treatment, &cfg.integrator)?;
    out.files.push(write_trace(&cfg.out_dir, "optimized_trace.csv", &result.trace)?);
    let log = cfg.out_dir.join("optimization_log.csv");
    let mut buf = Vec::new();
    result.write_log_csv(&mut buf)?;
    write_file(&log, &buf)?;
    out.files.push(log);
    out.files.push(write_schedule(&cfg.out_dir, "optimized_schedule.csv", &result.schedule)?);
    Ok(result)
}

fn fixed(
    cfg: &ScenarioConfig,
    profile: &FoodProfile,
    initial: &GastricState,
    out: &mut ScenarioOutcome,
) -> Result<(f64, SimulationTrace, DoseSchedule)> {
    let dose = match cfg.fixed_dose {
        Some(d) => d,
        None => min_fixed_dose_from(initial, &cfg.params, profile, &cfg.treatment, &cfg.integrator)?.dose,
    };
    let schedule = fixed_regimen(dose, &cfg.treatment)?;
    let trace = simulate_regimen(initial, &schedule, &cfg.params, profile, &cfg.treatment, &cfg.integrator)?;
    out.files.push(write_trace(&cfg.out_dir, "fixed_trace.csv", &trace)?);
    out.files.push(write_schedule(&cfg.out_dir, "fixed_schedule.csv", &schedule)?);
    Ok((dose, trace, schedule))
}

fn sweep(cfg: &ScenarioConfig, profile: &FoodProfile, out: &mut ScenarioOutcome) -> Result<()> {
    let outcomes = sweep_severity(
        &cfg.kag_values,
        &cfg.params,
        profile,
        &cfg.treatment,
        &cfg.integrator,
        Execution::Parallel,
    );
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["k_AG", "status", "total_mg", "max_AC_M"])?;
    let mut text = String::from("k_AG sweep\n");
    for o in &outcomes {
        match &o.result {
            Ok(r) => {
                let table = DoseTable::from_schedule(&r.schedule, &cfg.treatment);
                let path = cfg.out_dir.join(format!("dose_table_kag_{}.csv", o.k_ag));
                let mut buf = Vec::new();
                table.write_csv(&mut buf)?;
                write_file(&path, &buf)?;
                out.files.push(path);
                let total = total_intake(&r.schedule);
                let peak = max_corpal_acid(&r.trace, f64::NEG_INFINITY, f64::INFINITY)?;
                summary.write_record([o.k_ag.to_string(), "ok".into(), total.to_string(), peak.to_string()])?;
                text.push_str(&format!("  k_AG = {}: total {total:.1} mg, peak A_C {peak:.5} M\n", o.k_ag));
            }
            Err(e) => {
                summary.write_record([o.k_ag.to_string(), format!("error: {e}"), String::new(), String::new()])?;
                text.push_str(&format!("  k_AG = {}: failed: {e}\n", o.k_ag));
                if out.sweep_error.is_none() {
                    out.sweep_error = Some(format!("k_AG = {}: {e}", o.k_ag));
                    out.sweep_error_exit = Some(e.category().exit_code());
                }
            }
        }
    }
    let path = cfg.out_dir.join("sweep_summary.csv");
    let bytes = summary.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
    write_file(&path, &bytes)?;
    out.files.push(path);
    out.summary = text;
    Ok(())
}

fn write_trace(dir: &Path, name: &str, trace: &SimulationTrace) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    write_file(&path, &buf)?;
    Ok(path)
}

fn write_schedule(dir: &Path, name: &str, schedule: &DoseSchedule) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut buf = Vec::new();
    schedule.write_csv(&mut buf)?;
    write_file(&path, &buf)?;
    Ok(path)
}
