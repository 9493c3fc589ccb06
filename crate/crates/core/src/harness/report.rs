use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scheduler::DoseTable;

/// Sampling slack on the acid ceiling when judging a finished trace, M.
pub const CEILING_SLACK: f64 = 1e-4;

/// Optimized vs fixed regimen over the same treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub optimized_total: f64,
    pub fixed_total: f64,
    pub fixed_dose: f64,
    pub optimized_table: DoseTable,
    pub fixed_table: DoseTable,
    pub max_acid_optimized: f64,
    pub max_acid_fixed: f64,
    pub acid_max: f64,
}

impl ComparisonReport {
    /// `100·(fixed − optimized)/fixed`, undefined when the fixed total is zero.
    pub fn percent_reduction(&self) -> Option<f64> {
        (self.fixed_total > 0.0)
            .then(|| 100.0 * (self.fixed_total - self.optimized_total) / self.fixed_total)
    }

    pub fn optimized_satisfied(&self) -> bool {
        self.max_acid_optimized <= self.acid_max + CEILING_SLACK
    }

    pub fn fixed_satisfied(&self) -> bool {
        self.max_acid_fixed <= self.acid_max + CEILING_SLACK
    }

    pub fn reduction_text(&self) -> String {
        match self.percent_reduction() {
            Some(r) => format!("{r:.1}"),
            None => "NA".into(),
        }
    }

    pub fn summary_text(&self) -> String {
        let verdict = |ok: bool| if ok { "satisfied" } else { "VIOLATED" };
        format!(
            "Total PPI intake\n\
             \x20 optimized : {:.1} mg\n\
             \x20 fixed     : {:.1} mg ({:.2} mg per dose)\n\
             \x20 reduction : {}{}\n\
             Peak corpal acid (ceiling {} M)\n\
             \x20 optimized : {:.5} M  {}\n\
             \x20 fixed     : {:.5} M  {}\n",
            self.optimized_total,
            self.fixed_total,
            self.fixed_dose,
            self.reduction_text(),
            if self.percent_reduction().is_some() { " %" } else { "" },
            self.acid_max,
            self.max_acid_optimized,
            verdict(self.optimized_satisfied()),
            self.max_acid_fixed,
            verdict(self.fixed_satisfied()),
        )
    }
}

/// Writes `summary.csv`, `summary.txt` and both per-day dose tables into
/// `dir`, replacing existing files.
pub fn emit_report(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let csv_path = dir.join("summary.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "value"])?;
    let rows = [
        ("optimized_total_mg", report.optimized_total.to_string()),
        ("fixed_total_mg", report.fixed_total.to_string()),
        ("fixed_dose_mg", report.fixed_dose.to_string()),
        ("percent_reduction", report.reduction_text()),
        ("max_AC_optimized_M", report.max_acid_optimized.to_string()),
        ("max_AC_fixed_M", report.max_acid_fixed.to_string()),
        ("acid_max_M", report.acid_max.to_string()),
        ("optimized_satisfies_ceiling", report.optimized_satisfied().to_string()),
        ("fixed_satisfies_ceiling", report.fixed_satisfied().to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(&csv_path, e.into_error()))?;
    write_file(&csv_path, &bytes)?;
    written.push(csv_path);

    let txt_path = dir.join("summary.txt");
    write_file(&txt_path, report.summary_text().as_bytes())?;
    written.push(txt_path);

    for (name, table) in [
        ("dose_table_optimized.csv", &report.optimized_table),
        ("dose_table_fixed.csv", &report.fixed_table),
    ] {
        let path = dir.join(name);
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        write_file(&path, &buf)?;
        written.push(path);
    }
    Ok(written)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
