//! Report assembly and rendering.
//!
//! Every report embeds the resolved configuration and the library
//! version, then the subcommand-specific body. JSON is the canonical
//! format and preserves nesting; CSV renders a flat `key,value` table
//! of the scalar fields only, since nested witnesses do not flatten.

use serde::Serialize;
use serde_json::Value;

use crate::{Failure, Format};

/// The configuration a run actually used, with defaults materialized.
/// Unused inputs stay unset so the echo reflects the run exactly.
#[derive(Debug, Default, Serialize)]
pub struct Config {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub format: &'static str,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    config: &'a Config,
    #[serde(flatten)]
    body: &'a T,
}

/// Render a finished report in the requested format. The returned
/// string is the complete stdout payload, trailing newline included.
pub fn render<T: Serialize>(config: &Config, body: &T, format: Format) -> Result<String, Failure> {
    let report = Report {
        version: env!("CARGO_PKG_VERSION"),
        config,
        body,
    };
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::internal(format!("cannot serialize report: {e}")))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let value = serde_json::to_value(&report)
                .map_err(|e| Failure::internal(format!("cannot serialize report: {e}")))?;
            let mut rows = String::from("key,value\n");
            flatten_scalars(&value, String::new(), &mut rows);
            Ok(rows)
        }
    }
}

/// Walk a JSON value and append one `key,value` row per scalar leaf.
/// Objects contribute dotted paths; arrays and nulls are dropped, which
/// is what keeps the table flat.
fn flatten_scalars(value: &Value, prefix: String, out: &mut String) {
    match value {
        Value::Object(map) => {
            for (key, child) in map {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                flatten_scalars(child, path, out);
            }
        }
        Value::Array(_) | Value::Null => {}
        Value::Bool(b) => push_row(out, &prefix, &b.to_string()),
        Value::Number(n) => push_row(out, &prefix, &n.to_string()),
        Value::String(s) => push_row(out, &prefix, s),
    }
}

fn push_row(out: &mut String, key: &str, value: &str) {
    out.push_str(&csv_field(key));
    out.push(',');
    out.push_str(&csv_field(value));
    out.push('\n');
}

fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}
