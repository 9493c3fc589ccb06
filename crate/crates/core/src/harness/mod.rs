//! Scenario runner behind the `gastrodose` command line.

pub mod config;
pub mod report;
pub mod scenario;

pub use config::{load_config, parse_config, Overrides, ScenarioConfig, ScenarioKind};
pub use report::{emit_report, ComparisonReport, CEILING_SLACK};
pub use scenario::{run_scenario, ScenarioOutcome};
