//! Gastric acid secretion simulation and proton-pump-inhibitor dose
//! scheduling.
//!
//! - [`model`]: the twelve-state secretion model and food forcing
//! - [`pk`]: dose schedules and PPI blood concentration
//! - [`integrator`]: segmented RK4 / Dormand–Prince integration and traces
//! - [`scheduler`]: bisection dose search, receding-horizon treatment,
//!   fixed regimens and severity sweeps
//! - [`harness`]: configuration, scenarios and report files behind the CLI

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod par;
pub mod pk;
pub mod scheduler;

pub use error::{Error, Result};
pub use integrator::{max_corpal_acid, run_in, simulate, IntegratorConfig, Method, SimulationTrace};
pub use model::{derivative, food_intake, FoodProfile, GastricState, ModelParams};
pub use par::Execution;
pub use pk::{ppi_concentration, total_intake, DoseEvent, DoseSchedule};
pub use scheduler::{
    fixed_regimen, min_fixed_dose, optimize_dose, run_treatment, sweep_severity,
    OptimizationResult, TreatmentConfig,
};
