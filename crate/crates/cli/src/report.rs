use std::io::Write;

use loopsoup::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Too few samples for the comparison to mean anything.
    Inconclusive,
}

/// One line of a report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub anchor: String,
    pub inputs_digest: String,
    pub lhs: Value,
    pub rhs: Value,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

impl CheckReport {
    /// A comparison that passes when `error <= tolerance`.
    pub fn compare(
        check: &str,
        anchor: &str,
        inputs: &Value,
        lhs: Value,
        rhs: Value,
        error: f64,
        tolerance: f64,
    ) -> Self {
        let pass = error <= tolerance;
        Self {
            check: check.to_string(),
            anchor: anchor.to_string(),
            inputs_digest: digest(inputs),
            lhs,
            rhs,
            error,
            tolerance,
            pass,
            status: if pass { Status::Pass } else { Status::Fail },
            runtime_ms: None,
        }
    }

    /// A check that could not be evaluated on its inputs.
    pub fn failed(check: &str, anchor: &str, inputs: &Value, reason: String) -> Self {
        Self {
            check: check.to_string(),
            anchor: anchor.to_string(),
            inputs_digest: digest(inputs),
            lhs: Value::String(reason),
            rhs: Value::Null,
            error: f64::INFINITY,
            tolerance: 0.0,
            pass: false,
            status: Status::Fail,
            runtime_ms: None,
        }
    }

    pub fn inconclusive(mut self) -> Self {
        self.pass = false;
        self.status = Status::Inconclusive;
        self
    }
}

/// SHA-256 of the compact JSON encoding of the inputs.
pub fn digest(inputs: &Value) -> String {
    hex::encode(Sha256::digest(inputs.to_string().as_bytes()))
}

pub fn complex(z: Complex64) -> Value {
    if z.im == 0.0 {
        json!(z.re)
    } else {
        json!([z.re, z.im])
    }
}

pub fn write_reports<W: Write>(mut out: W, reports: &[CheckReport]) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Exit code for a finished run: 1 if anything failed, 3 if nothing failed
/// but something was inconclusive, 0 otherwise.
pub fn exit_code(reports: &[CheckReport]) -> u8 {
    if reports.iter().any(|r| r.status == Status::Fail) {
        1
    } else if reports.iter().any(|r| r.status == Status::Inconclusive) {
        3
    } else {
        0
    }
}
