//! Run summaries and the embedded schema they are checked against.
//!
//! The schema is a small JSON-Schema subset: `type` (a name or a list of
//! names), `required`, `properties`, `additionalProperties: false` and
//! `items`. That is all the summary shape needs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

/// A fitted rate, or `"inf"` when `r` hit zero exactly inside the fit window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FittedRate {
    Value(f64),
    Label(String),
}

impl FittedRate {
    pub fn infinite() -> Self {
        FittedRate::Label("inf".into())
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            FittedRate::Value(v) => *v,
            FittedRate::Label(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub index: usize,
    pub csv: Option<String>,
    pub rows: usize,
    pub theta0: Vec<f64>,
    pub phi0: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub final_phi: Vec<f64>,
    pub final_f: Vec<f64>,
    pub final_g: Vec<f64>,
    #[serde(rename = "monotone_H")]
    pub monotone_h: Option<bool>,
    #[serde(rename = "constant_H")]
    pub constant_h: Option<bool>,
    #[serde(rename = "max_H_increment")]
    pub max_h_increment: Option<f64>,
    #[serde(rename = "H_initial")]
    pub h_initial: Option<f64>,
    #[serde(rename = "H_final")]
    pub h_final: Option<f64>,
    pub verdict: Option<String>,
    pub converged_to: Option<usize>,
    pub fitted_rate: Option<FittedRate>,
    pub r_squared: Option<f64>,
    pub final_r: Option<f64>,
    pub audit_report: Option<String>,
    pub fit_report: Option<String>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub name: String,
    pub seed: u64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    /// True only if every run has a monotone `H`.
    #[serde(rename = "monotone_H")]
    pub monotone_h: Option<bool>,
    #[serde(rename = "constant_H")]
    pub constant_h: Option<bool>,
    /// The common verdict of all runs, or `"mixed"`.
    pub verdict: Option<String>,
    /// Rate of the first run.
    pub fitted_rate: Option<FittedRate>,
    /// Largest final `r` over the runs.
    pub final_r: Option<f64>,
    pub failed_runs: usize,
    pub runs: Vec<RunSummary>,
}

impl Summary {
    /// Aggregates per-run results.
    pub fn from_runs(name: &str, seed: u64, method: &str, lambda: Option<f64>, runs: Vec<RunSummary>) -> Self {
        let all = |pick: fn(&RunSummary) -> Option<bool>| -> Option<bool> {
            let vals: Option<Vec<bool>> = runs.iter().map(pick).collect();
            vals.filter(|v| !v.is_empty()).map(|v| v.iter().all(|&b| b))
        };
        let verdict = {
            let vs: Option<Vec<&String>> = runs.iter().map(|r| r.verdict.as_ref()).collect();
            vs.filter(|v| !v.is_empty()).map(|v| if v.iter().all(|x| *x == v[0]) { v[0].clone() } else { "mixed".to_string() })
        };
        let final_r = runs.iter().filter_map(|r| r.final_r).reduce(f64::max);
        Summary {
            schema: crate::config::SCHEMA.to_string(),
            name: name.to_string(),
            seed,
            method: method.to_string(),
            lambda,
            monotone_h: all(|r| r.monotone_h),
            constant_h: all(|r| r.constant_h),
            verdict,
            fitted_rate: runs.first().and_then(|r| r.fitted_rate.clone()),
            final_r,
            failed_runs: runs.iter().filter(|r| r.error.is_some()).count(),
            runs,
        }
    }

    /// Pretty JSON, checked against [`SUMMARY_SCHEMA`].
    pub fn to_json(&self) -> Result<String, String> {
        let value = serde_json::to_value(self).map_err(|e| e.to_string())?;
        let schema: Value = serde_json::from_str(SUMMARY_SCHEMA).expect("embedded schema is valid JSON");
        validate(&schema, &value, "$")?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| e.to_string())?;
        text.push('\n');
        Ok(text)
    }
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        _ => false,
    }
}

/// Checks `value` against the schema subset; errors name the JSON path.
pub fn validate(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, value),
            Value::Array(names) => names.iter().filter_map(Value::as_str).any(|s| type_matches(s, value)),
            _ => false,
        };
        if !ok {
            return Err(format!("{path}: expected type {t}, found {value}"));
        }
    }
    if let (Some(obj), Some(props)) = (value.as_object(), schema.get("properties").and_then(Value::as_object)) {
        for req in schema.get("required").and_then(Value::as_array).into_iter().flatten().filter_map(Value::as_str) {
            if !obj.contains_key(req) {
                return Err(format!("{path}: missing required key {req:?}"));
            }
        }
        for (k, v) in obj {
            match props.get(k) {
                Some(sub) => validate(sub, v, &format!("{path}.{k}"))?,
                None if schema.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{path}: unexpected key {k:?}"));
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate(items, v, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}
