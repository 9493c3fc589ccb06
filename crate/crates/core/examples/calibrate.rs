//! Prints the calibration targets for the bundled parameter set: untreated
//! peak corpal acid, minimal fixed dose and optimized total intake.

use std::time::Instant;

use gastrodose::integrator::{max_corpal_acid, run_in, simulate};
use gastrodose::pk::total_intake;
use gastrodose::scheduler::{min_fixed_dose_from, run_treatment_from};
use gastrodose::{DoseSchedule, FoodProfile, IntegratorConfig, ModelParams, TreatmentConfig};

fn main() -> gastrodose::Result<()> {
    let params = match std::env::args().nth(1) {
        Some(path) => ModelParams::load(path)?,
        None => ModelParams::calibrated(),
    };
    let profile = FoodProfile::default();
    let integ = IntegratorConfig::default();
    let config = TreatmentConfig::default();

    let clock = Instant::now();
    let initial = run_in(&params, &profile, config.run_in_days, &integ)?;
    let day = simulate(&initial, 0.0, 24.0, &DoseSchedule::new(), &params, &profile, &integ)?;
    println!("untreated peak A_C      {:.5} M", max_corpal_acid(&day, 0.0, 24.0)?);
    println!("A_C at 05:00 / 17:00    {:.5} / {:.5} M", day.states[500].a_c, day.states[1700].a_c);

    let treated = run_treatment_from(&initial, &params, &profile, &config, &integ)?;
    let doses: Vec<String> = treated.log.iter().map(|d| format!("{:.1}", d.dose)).collect();
    println!("optimized doses         {}", doses.join(" "));
    let opt_total = total_intake(&treated.schedule);
    println!("optimized total         {opt_total:.1} mg");

    let fixed = min_fixed_dose_from(&initial, &params, &profile, &config, &integ)?;
    let fixed_total = fixed.dose * config.dosing_times().len() as f64;
    println!("minimal fixed dose      {:.2} mg ({fixed_total:.1} mg total)", fixed.dose);
    println!("reduction               {:.1} %", 100.0 * (fixed_total - opt_total) / fixed_total);
    println!("elapsed                 {:.1} s", clock.elapsed().as_secs_f64());
    Ok(())
}
