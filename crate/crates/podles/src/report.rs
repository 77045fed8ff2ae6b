//! Structured verification and pairing reports with deterministic
//! serialization (JSON / CSV / markdown).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Ordered map so serialization is byte-stable.
    pub params: BTreeMap<String, String>,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            params: BTreeMap::new(),
            residual,
            threshold,
            pass: residual <= threshold,
            notes: Vec::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn failed(mut self) -> Self {
        self.pass = false;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CheckResult> {
        self.checks
            .iter()
            .max_by(|a, b| (a.residual / a.threshold).total_cmp(&(b.residual / b.threshold)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,params,residual,threshold,pass\n");
        for c in &self.checks {
            let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(
                out,
                "{},{},{:e},{:e},{}",
                c.name,
                params.join(";"),
                c.residual,
                c.threshold,
                c.pass
            )
            .unwrap();
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| check | params | residual | threshold | pass |\n|---|---|---|---|---|\n");
        for c in &self.checks {
            let params: Vec<String> = c.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(
                out,
                "| {} | {} | {:.3e} | {:.1e} | {} |",
                c.name,
                params.join(", "),
                c.residual,
                c.threshold,
                if c.pass { "yes" } else { "NO" }
            )
            .unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairingReport {
    pub n: String,
    pub r: String,
    pub q: f64,
    pub value: f64,
    pub tail_bound: f64,
    pub l_max: String,
    pub oracle: f64,
    pub orientation: String,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PairingReport {
    pub fn csv_header() -> &'static str {
        "N,r,q,value,tail,oracle,pass\n"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.10},{:e},{},{}\n",
            self.n, self.r, self.q, self.value, self.tail_bound, self.oracle, self.pass
        )
    }

    pub fn to_markdown_row(&self) -> String {
        format!(
            "| {} | {} | {} | {:.6} | {:.1e} | {} | {} |\n",
            self.n,
            self.r,
            self.q,
            self.value,
            self.tail_bound,
            self.oracle,
            if self.pass { "yes" } else { "NO" }
        )
    }
}
