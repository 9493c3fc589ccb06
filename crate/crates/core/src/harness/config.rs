//! Scenario configuration files.
//!
//! A TOML document; every key is optional and falls back to the documented
//! default:
//!
//! ```toml
//! params = "params.toml"        # relative to this file; default: bundled set
//! kind = "compare"              # baseline | optimize | fixed | compare | sweep
//! out = "out"
//!
//! [treatment]
//! days = 15
//! slot_times = [5.0, 17.0]
//! horizon_h = 12.0
//! acid_max = 0.035
//! dose_max = 100.0
//! delta = 0.1
//! max_iterations = 64
//! run_in_days = 5
//!
//! [integrator]
//! method = "rk45"               # or "rk4"
//! abs_tol = 1e-9
//! rel_tol = 1e-7
//! step = 0.01                   # rk4 only
//! sample_interval = 0.01
//!
//! [scenarios]
//! baseline_days = 3
//! fixed_dose = 70.5             # optional; default: minimal feasible fixed dose
//! kag = [0.015, 0.025, 0.035]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::integrator::{IntegratorConfig, Method};
use crate::model::ModelParams;
use crate::scheduler::TreatmentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Baseline,
    Optimize,
    Fixed,
    Compare,
    Sweep,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Baseline,
        ScenarioKind::Optimize,
        ScenarioKind::Fixed,
        ScenarioKind::Compare,
        ScenarioKind::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Baseline => "baseline",
            ScenarioKind::Optimize => "optimize",
            ScenarioKind::Fixed => "fixed",
            ScenarioKind::Compare => "compare",
            ScenarioKind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub out_dir: PathBuf,
    pub params_path: Option<PathBuf>,
    pub params: ModelParams,
    pub treatment: TreatmentConfig,
    pub integrator: IntegratorConfig,
    pub baseline_days: u32,
    pub fixed_dose: Option<f64>,
    pub kag_values: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Compare,
            out_dir: PathBuf::from("out"),
            params_path: None,
            params: ModelParams::calibrated(),
            treatment: TreatmentConfig::default(),
            integrator: IntegratorConfig::default(),
            baseline_days: 3,
            fixed_dose: None,
            kag_values: vec![0.015, 0.025, 0.035],
        }
    }
}

/// Command-line overrides applied on top of a loaded file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub days: Option<u32>,
    pub acid_max: Option<f64>,
    pub dose_max: Option<f64>,
    pub delta: Option<f64>,
    pub fixed_dose: Option<f64>,
    pub kag: Option<Vec<f64>>,
}

const TOP_KEYS: &[&str] = &["params", "kind", "out", "treatment", "integrator", "scenarios"];
const TREATMENT_KEYS: &[&str] = &[
    "days",
    "slot_times",
    "horizon_h",
    "acid_max",
    "dose_max",
    "delta",
    "max_iterations",
    "run_in_days",
];
const INTEGRATOR_KEYS: &[&str] = &["method", "abs_tol", "rel_tol", "step", "sample_interval"];
const SCENARIO_KEYS: &[&str] = &["baseline_days", "fixed_dose", "kag"];

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a configuration document. Relative paths resolve
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ScenarioConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim_end().to_string()))?;
    let mut cfg = ScenarioConfig::default();
    let mut errs = Errors::default();

    check_keys(&table, TOP_KEYS, "", &mut errs);
    if let Some(v) = errs.string(&table, "params", "params") {
        let p = base.join(v);
        match ModelParams::load(&p) {
            Ok(params) => cfg.params = params,
            Err(e) => errs.push(e.to_string()),
        }
        cfg.params_path = Some(p);
    }
    if let Some(v) = errs.string(&table, "kind", "kind") {
        match v.parse() {
            Ok(k) => cfg.kind = k,
            Err(e) => errs.push(format!("kind: {e}")),
        }
    }
    if let Some(v) = errs.string(&table, "out", "out") {
        cfg.out_dir = PathBuf::from(v);
    }

    if let Some(t) = errs.section(&table, "treatment") {
        check_keys(t, TREATMENT_KEYS, "treatment.", &mut errs);
        let tc = &mut cfg.treatment;
        if let Some(v) = errs.count(t, "days", "treatment.days") {
            tc.treatment_days = v;
        }
        if let Some(v) = errs.float_list(t, "slot_times", "treatment.slot_times") {
            tc.slot_times = v;
        }
        if let Some(v) = errs.float(t, "horizon_h", "treatment.horizon_h") {
            tc.horizon = v;
        }
        if let Some(v) = errs.float(t, "acid_max", "treatment.acid_max") {
            tc.acid_max = v;
        }
        if let Some(v) = errs.float(t, "dose_max", "treatment.dose_max") {
            tc.dose_max = v;
        }
        if let Some(v) = errs.float(t, "delta", "treatment.delta") {
            tc.delta = v;
        }
        if let Some(v) = errs.count(t, "max_iterations", "treatment.max_iterations") {
            tc.max_iterations = v as usize;
        }
        if let Some(v) = errs.count(t, "run_in_days", "treatment.run_in_days") {
            tc.run_in_days = v;
        }
    }

    if let Some(t) = errs.section(&table, "integrator") {
        check_keys(t, INTEGRATOR_KEYS, "integrator.", &mut errs);
        let method = errs.string(t, "method", "integrator.method");
        let abs_tol = errs.float(t, "abs_tol", "integrator.abs_tol");
        let rel_tol = errs.float(t, "rel_tol", "integrator.rel_tol");
        let step = errs.float(t, "step", "integrator.step");
        if let Some(v) = errs.float(t, "sample_interval", "integrator.sample_interval") {
            cfg.integrator.sample_interval = v;
        }
        match method.as_deref().unwrap_or("rk45") {
            "rk45" => {
                cfg.integrator.method = Method::Rk45 {
                    abs_tol: abs_tol.unwrap_or(1e-9),
                    rel_tol: rel_tol.unwrap_or(1e-7),
                }
            }
            "rk4" => {
                cfg.integrator.method = Method::Rk4 {
                    step: step.unwrap_or(cfg.integrator.sample_interval),
                }
            }
            other => errs.push(format!("integrator.method: expected `rk45` or `rk4`, got `{other}`")),
        }
    }

    if let Some(t) = errs.section(&table, "scenarios") {
        check_keys(t, SCENARIO_KEYS, "scenarios.", &mut errs);
        if let Some(v) = errs.count(t, "baseline_days", "scenarios.baseline_days") {
            cfg.baseline_days = v;
        }
        if let Some(v) = errs.float(t, "fixed_dose", "scenarios.fixed_dose") {
            cfg.fixed_dose = Some(v);
        }
        if let Some(v) = errs.float_list(t, "kag", "scenarios.kag") {
            cfg.kag_values = v;
        }
    }

    errs.extend(cfg.violations());
    errs.finish()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Applies overrides and re-validates.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.days {
            self.treatment.treatment_days = v;
        }
        if let Some(v) = o.acid_max {
            self.treatment.acid_max = v;
        }
        if let Some(v) = o.dose_max {
            self.treatment.dose_max = v;
        }
        if let Some(v) = o.delta {
            self.treatment.delta = v;
        }
        if let Some(v) = o.fixed_dose {
            self.fixed_dose = Some(v);
        }
        if let Some(v) = &o.kag {
            self.kag_values = v.clone();
        }
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("\n")))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .treatment
            .violations()
            .into_iter()
            .map(|m| format!("treatment: {m}"))
            .collect();
        if let Err(e) = self.integrator.validate() {
            out.push(format!("integrator: {e}"));
        }
        if self.baseline_days == 0 {
            out.push("scenarios.baseline_days must be at least 1".into());
        }
        if let Some(d) = self.fixed_dose {
            if !(d >= 0.0 && d <= self.treatment.dose_max) {
                out.push(format!(
                    "scenarios.fixed_dose {d} outside [0, {}]",
                    self.treatment.dose_max
                ));
            }
        }
        if self.kag_values.is_empty() {
            out.push("scenarios.kag must list at least one value".into());
        }
        for k in &self.kag_values {
            if !(*k > 0.0) {
                out.push(format!("scenarios.kag values must be positive, got {k}"));
            }
        }
        out
    }
}

fn check_keys(table: &Table, known: &[&str], prefix: &str, errs: &mut Errors) {
    for key in table.keys() {
        if known.contains(&key.as_str()) {
            continue;
        }
        let nearest = known
            .iter()
            .min_by_key(|k| strsim::levenshtein(k, key))
            .expect("non-empty key list");
        errs.push(format!("unknown key `{prefix}{key}` (did you mean `{prefix}{nearest}`?)"));
    }
}

/// Collects every problem so the user sees them all at once.
#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, msg: String) {
        self.0.push(msg);
    }

    fn extend(&mut self, msgs: Vec<String>) {
        self.0.extend(msgs);
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.0.join("\n")))
        }
    }

    fn type_error(&mut self, field: &str, expected: &str, v: &Value) {
        self.push(format!("{field}: expected {expected}, found {}", v.type_str()));
    }

    fn section<'a>(&mut self, t: &'a Table, key: &str) -> Option<&'a Table> {
        match t.get(key)? {
            Value::Table(inner) => Some(inner),
            other => {
                self.type_error(key, "a table", other);
                None
            }
        }
    }

    fn string(&mut self, t: &Table, key: &str, field: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.type_error(field, "a string", other);
                None
            }
        }
    }

    fn float(&mut self, t: &Table, key: &str, field: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.type_error(field, "a number", other);
                None
            }
        }
    }

    fn count(&mut self, t: &Table, key: &str, field: &str) -> Option<u32> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 && *i <= u32::MAX as i64 => Some(*i as u32),
            Value::Integer(i) => {
                self.push(format!("{field}: must be a non-negative integer, got {i}"));
                None
            }
            other => {
                self.type_error(field, "an integer", other);
                None
            }
        }
    }

    fn float_list(&mut self, t: &Table, key: &str, field: &str) -> Option<Vec<f64>> {
        match t.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for v in items {
                    match v {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.type_error(field, "numbers", other);
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.type_error(field, "an array", other);
                None
            }
        }
    }
}
