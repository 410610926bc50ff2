//! Bit-stable report serialization: sorted object keys and every float
//! rounded to 12 significant digits.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::error::Result;

/// Significant digits kept in every serialized float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Fixed float formatting for CSV cells.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        round_sig(x).to_string()
    }
}

fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(normalize).collect()),
        Value::Object(map) => {
            // Insert in key order so the result is sorted whatever map backs `Map`.
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, normalize(v))).collect();
            Value::Object(sorted.into_iter().collect::<Map<String, Value>>())
        }
        other => other,
    }
}

/// Convert to a JSON value with rounded floats and sorted keys. Non-finite
/// floats become `null`.
pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    Ok(normalize(serde_json::to_value(value)?))
}

/// Pretty JSON text with sorted keys and rounded floats, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&to_value(value)?)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
        }
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub status: Status,
    pub summary: String,
    pub details: Value,
}

/// Top-level report written by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub criteria: Vec<CriterionResult>,
    /// Only filled on request; it breaks bit-for-bit reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl ExperimentReport {
    pub fn new<I: Serialize, R: Serialize>(command: &str, inputs: &I, results: &R) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            inputs: to_value(inputs)?,
            results: to_value(results)?,
            criteria: Vec::new(),
            wall_clock_seconds: None,
        })
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.status == Status::Pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(123456789.0123456), 123456789.012);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(format_float(f64::INFINITY), "inf");
        assert_eq!(format_float(2.5e-7), "0.00000025");
    }

    #[test]
    fn keys_are_sorted_and_floats_rounded() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: u32,
            mid: Vec<f64>,
        }
        let text = to_json(&S { zeta: 2.0f64.sqrt(), alpha: 3, mid: vec![f64::NAN, 1e-300] }).unwrap();
        let a = text.find("alpha").unwrap();
        let m = text.find("mid").unwrap();
        let z = text.find("zeta").unwrap();
        assert!(a < m && m < z);
        assert!(text.contains("1.41421356237"));
        assert!(!text.contains("1.414213562373"));
        assert!(text.contains("null"));
    }
}
