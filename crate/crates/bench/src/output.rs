//! Result records and the files a run writes.

use std::fs;
use std::path::Path;

use gg_core::identities::ResidualCurve;
use serde::Serialize;

use crate::{BenchError, CODE_VERSION, SCHEMA_VERSION};

/// Whether a record can fail a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    /// Oracle equivalences, proven bounds and trivial cases; failures set exit code 1.
    Hard,
    /// Finite-size statements; failures are reported as warnings.
    Soft,
    /// Data without a pass/fail verdict.
    Info,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub id: usize,
    pub check: String,
    pub family: String,
    pub scheme: String,
    pub replicas: usize,
    pub observable: String,
    pub quantity: String,
    pub kind: String,
    pub beta: Option<f64>,
    pub beta_lo: Option<f64>,
    pub beta_hi: Option<f64>,
    pub measure: String,
    pub value: f64,
    pub stderr: f64,
    pub bound: Option<f64>,
    pub severity: Severity,
    pub pass: Option<bool>,
    pub seed: u64,
    pub code_version: String,
    pub wall_time: f64,
}

impl ResultRecord {
    /// A record with run-wide fields filled in and everything else empty.
    pub fn new(check: &str, family: &str, scheme: &str, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id: 0,
            check: check.into(),
            family: family.into(),
            scheme: scheme.into(),
            replicas: 0,
            observable: String::new(),
            quantity: String::new(),
            kind: String::new(),
            beta: None,
            beta_lo: None,
            beta_hi: None,
            measure: String::new(),
            value: 0.0,
            stderr: 0.0,
            bound: None,
            severity: Severity::Info,
            pass: None,
            seed,
            code_version: CODE_VERSION.into(),
            wall_time: 0.0,
        }
    }

    pub fn failed_hard(&self) -> bool {
        self.severity == Severity::Hard && self.pass == Some(false)
    }

    pub fn failed_soft(&self) -> bool {
        self.severity == Severity::Soft && self.pass == Some(false)
    }
}

/// A named residual curve destined for `<name>.curve.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedCurve {
    pub name: String,
    pub curve: ResidualCurve,
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(dir: &Path, named: &NamedCurve) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(dir.join(format!("{}.curve.csv", named.name)))?;
    w.write_record(["beta", "residual", "stderr"])?;
    for (b, r) in named.curve.betas.iter().zip(&named.curve.residuals) {
        w.write_record([b.to_string(), r.mean.to_string(), r.stderr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SummaryEntry<'a> {
    id: usize,
    check: &'a str,
    quantity: &'a str,
    observable: &'a str,
    kind: &'a str,
    beta: Option<f64>,
    value: f64,
    stderr: f64,
    bound: Option<f64>,
    severity: Severity,
    pass: Option<bool>,
}

#[derive(Debug, Serialize)]
struct CheckSummary<'a> {
    check: &'a str,
    records: usize,
    hard_failures: Vec<usize>,
    soft_warnings: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    code_version: &'a str,
    family: &'a str,
    scheme: &'a str,
    all_hard_passed: bool,
    checks: Vec<CheckSummary<'a>>,
    /// Every verdict-bearing or integrated record, copied from `results.csv` by id.
    entries: Vec<SummaryEntry<'a>>,
}

/// Writes `summary.json`; every number in it is copied from a record whose
/// `id` is listed alongside.
pub fn write_summary(path: &Path, family: &str, scheme: &str, records: &[ResultRecord]) -> Result<(), BenchError> {
    let mut checks: Vec<CheckSummary> = Vec::new();
    for r in records {
        let entry = match checks.iter_mut().find(|c| c.check == r.check) {
            Some(c) => c,
            None => {
                checks.push(CheckSummary {
                    check: &r.check,
                    records: 0,
                    hard_failures: Vec::new(),
                    soft_warnings: Vec::new(),
                });
                checks.last_mut().expect("just pushed")
            }
        };
        entry.records += 1;
        if r.failed_hard() {
            entry.hard_failures.push(r.id);
        }
        if r.failed_soft() {
            entry.soft_warnings.push(r.id);
        }
    }
    let entries = records
        .iter()
        .filter(|r| r.pass.is_some() || r.kind == "integral")
        .map(|r| SummaryEntry {
            id: r.id,
            check: &r.check,
            quantity: &r.quantity,
            observable: &r.observable,
            kind: &r.kind,
            beta: r.beta,
            value: r.value,
            stderr: r.stderr,
            bound: r.bound,
            severity: r.severity,
            pass: r.pass,
        })
        .collect();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION,
        family,
        scheme,
        all_hard_passed: !records.iter().any(ResultRecord::failed_hard),
        checks,
        entries,
    };
    fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}
