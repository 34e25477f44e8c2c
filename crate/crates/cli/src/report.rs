//! Check reports, per-scenario results and suite summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

/// Outcome of one inequality or identity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    /// The inequality or identity, stated by content.
    pub anchor: String,
    pub measured: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    /// Signed margin; nonnegative when the check holds exactly.
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Where the reference values come from.
    pub oracle: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    pub fn new(check: &str, anchor: &str, oracle: &str) -> Self {
        Self {
            check: check.into(),
            anchor: anchor.into(),
            measured: BTreeMap::new(),
            bounds: BTreeMap::new(),
            slack: 0.0,
            tolerance: 0.0,
            pass: false,
            oracle: oracle.into(),
            note: None,
        }
    }

    pub fn measured(mut self, key: &str, v: f64) -> Self {
        self.measured.insert(key.into(), v);
        self
    }

    pub fn bound(mut self, key: &str, v: f64) -> Self {
        self.bounds.insert(key.into(), v);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Passes when `slack ≥ −tol`.
    pub fn with_slack(mut self, slack: f64, tol: f64) -> Self {
        self.slack = slack;
        self.tolerance = tol;
        self.pass = slack >= -tol;
        self
    }

    /// `|measured − expected| ≤ tol`, recorded as slack `−|error|`.
    pub fn close(self, key: &str, measured: f64, expected: f64, tol: f64) -> Self {
        let err = (measured - expected).abs();
        let slack = if err.is_finite() {
            -err
        } else {
            f64::NEG_INFINITY
        };
        self.measured(key, measured)
            .bound(key, expected)
            .with_slack(slack, tol)
    }

    /// Fails with a reason and no measurement.
    pub fn failed(mut self, reason: impl Into<String>) -> Self {
        self.pass = false;
        self.slack = f64::NEG_INFINITY;
        self.note = Some(reason.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub task: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub checks: Vec<CheckReport>,
    /// Values reported without an attached assertion.
    pub values: BTreeMap<String, serde_json::Value>,
    pub pass: bool,
}

impl ScenarioReport {
    pub fn finish(&mut self) {
        self.pass = self.checks.iter().all(|c| c.pass);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub check: String,
    pub anchor: String,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Scenarios that could not be run, with the reason.
    pub errors: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl Summary {
    pub fn new(
        reports: &[ScenarioReport],
        errors: Vec<(String, String)>,
        warnings: Vec<String>,
    ) -> Self {
        let rows: Vec<SummaryRow> = reports
            .iter()
            .flat_map(|r| {
                r.checks.iter().map(move |c| SummaryRow {
                    scenario: r.scenario.clone(),
                    check: c.check.clone(),
                    anchor: c.anchor.clone(),
                    slack: c.slack,
                    pass: c.pass,
                })
            })
            .collect();
        let pass = errors.is_empty() && rows.iter().all(|r| r.pass);
        Self {
            rows,
            errors,
            warnings,
            pass,
        }
    }

    pub fn to_text(&self) -> String {
        let w0 = self
            .rows
            .iter()
            .map(|r| r.scenario.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        let w1 = self
            .rows
            .iter()
            .map(|r| r.check.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:<6}  {:>12}  anchor",
            "scenario", "check", "result", "slack"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {:<6}  {:>12.4e}  {}",
                r.scenario,
                r.check,
                if r.pass { "PASS" } else { "FAIL" },
                r.slack,
                r.anchor
            );
        }
        for (s, e) in &self.errors {
            let _ = writeln!(out, "{s}: ERROR {e}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let passed = self.rows.iter().filter(|r| r.pass).count();
        let _ = writeln!(
            out,
            "{passed}/{} checks passed, {} scenario errors",
            self.rows.len(),
            self.errors.len()
        );
        out
    }
}
