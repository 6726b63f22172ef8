use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use super::config::{Pipeline, Tolerances};
use crate::analysis::PropertyOutcome;
use crate::design::DesignSolution;
use crate::error::Result;
use crate::extended::Extended;
use crate::grid::ScenarioSummary;

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub expected: Option<f64>,
    pub actual: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        let detail = detail.into();
        Self {
            name: name.into(),
            passed,
            expected: None,
            actual: None,
            tolerance: None,
            detail: (!detail.is_empty()).then_some(detail),
        }
    }

    /// `|actual − expected| <= tolerance`.
    pub fn near(name: impl Into<String>, actual: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: (actual - expected).abs() <= tolerance,
            expected: Some(expected),
            actual: Some(actual),
            tolerance: Some(tolerance),
            detail: None,
        }
    }

    /// `actual <= bound`.
    pub fn at_most(name: impl Into<String>, actual: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: actual <= bound,
            expected: None,
            actual: Some(actual),
            tolerance: Some(bound),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub pipeline: Pipeline,
    pub passed: bool,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub scalars: BTreeMap<String, Extended>,
    pub properties: Vec<PropertyOutcome>,
    pub checks: Vec<Check>,
    pub design: Option<DesignSolution>,
    pub scenario: Option<ScenarioSummary>,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(pipeline: Pipeline, seed: u64, tolerances: Tolerances) -> Self {
        Self {
            pipeline,
            passed: true,
            seed,
            tolerances,
            scalars: BTreeMap::new(),
            properties: Vec::new(),
            checks: Vec::new(),
            design: None,
            scenario: None,
            artifacts: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: impl Into<Extended>) {
        self.scalars.insert(name.to_string(), value.into());
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Recomputes `passed` from the checks and property outcomes.
    pub fn finalize(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed) && self.properties.iter().all(|p| p.holds);
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        out.extend(self.properties.iter().filter(|p| !p.holds).map(|p| p.property.clone()));
        out
    }
}

/// A CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Self { file: file.to_string(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Dollar amounts in CSVs.
pub fn money(v: f64) -> String {
    format!("{v:.2}")
}

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn ext(v: Extended) -> String {
    match v {
        Extended::Finite(x) => num(x),
        Extended::PosInfinity => "inf".into(),
    }
}

/// Writes `report.json` and every table into `dir`, creating it if needed.
pub fn emit_report(dir: &Path, report: &mut Report, tables: &[Table]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    report.artifacts =
        std::iter::once("report.json".to_string()).chain(tables.iter().map(|t| t.file.clone())).collect();
    for t in tables {
        let mut w = csv::Writer::from_path(dir.join(&t.file))?;
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_tables_get_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new(Pipeline::Analyze, 0, Tolerances::default());
        r.finalize();
        emit_report(dir.path(), &mut r, &[Table::new("sweep.csv", &["reward", "poa"])]).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), "reward,poa\n");
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(v["artifacts"][1], "sweep.csv");
    }

    #[test]
    fn money_has_two_decimals() {
        assert_eq!(money(2354.0), "2354.00");
        assert_eq!(money(0.005), "0.01");
        assert_eq!(ext(Extended::PosInfinity), "inf");
    }
}
