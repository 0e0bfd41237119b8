//! Verification records and the JSON report envelope.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Pointwise,
    Integral,
    Flow,
    /// Recorded for information; never affects the overall verdict.
    Finding,
}

/// One verification outcome: residuals, their summary, and the tolerance that
/// decided the verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub label: String,
    pub check: String,
    pub kind: RecordKind,
    pub residuals: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub metadata: BTreeMap<String, Value>,
}

impl ResidualReport {
    /// Builds a record with `pass ⇔ max ≤ tolerance` (a NaN residual fails).
    pub fn new(
        label: impl Into<String>,
        check: impl Into<String>,
        kind: RecordKind,
        residuals: Vec<f64>,
        tolerance: f64,
    ) -> Self {
        let (max, mean) = summarize(&residuals);
        let pass = kind == RecordKind::Finding || max <= tolerance;
        Self {
            label: label.into(),
            check: check.into(),
            kind,
            residuals,
            max,
            mean,
            tolerance,
            pass,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.metadata
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    /// Overrides the verdict for records whose pass condition is not a plain
    /// tolerance comparison; the reason is kept in the metadata.
    pub fn with_verdict(mut self, pass: bool, reason: &str) -> Self {
        self.pass = pass;
        self.metadata
            .insert("verdict_rule".into(), Value::String(reason.to_string()));
        self
    }
}

/// Max and mean of the absolute residuals; NaN propagates into `max`.
pub fn summarize(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    if values.iter().any(|v| v.is_nan()) {
        return (f64::NAN, f64::NAN);
    }
    let max = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sum: f64 = values.iter().map(|v| v.abs()).sum();
    (max, sum / values.len() as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportEnvelope {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub config: Value,
    pub records: Vec<ResidualReport>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl ReportEnvelope {
    pub fn new(config: Value, records: Vec<ResidualReport>) -> Self {
        let pass = records.iter().all(|r| r.pass);
        Self {
            schema: SCHEMA_VERSION,
            tool: "ricci-lab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            records,
            pass,
            wall_clock_seconds: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
