//! Deterministic report rendering.
//!
//! Reports are written to stdout and optionally mirrored to a file. Both
//! formats are byte-stable for a fixed config and master seed: floats are
//! rendered at 12 significant digits, key order is fixed, and no timestamp
//! is emitted.

use crate::fail::Failure;
use serde_json::{Number, Value};
use std::path::PathBuf;

pub const TOOL: &str = "traceops";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A float at the fixed report precision (12 significant digits,
/// scientific notation). Non-finite values render as `NaN`/`inf`/`-inf`.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{:.11e}", x)
    } else {
        format!("{x}")
    }
}

/// A float rounded to the report precision as a JSON value. JSON numbers
/// cannot carry non-finite values, so those become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let rounded: f64 = sig12(x).parse().expect("rounded float parses");
        Number::from_f64(rounded).map(Value::Number).unwrap_or(Value::Null)
    } else {
        Value::String(format!("{x}"))
    }
}

/// Round every float in a JSON tree to the report precision.
pub fn round_tree(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if !n.is_i64() && !n.is_u64() {
                if let Some(f) = n.as_f64() {
                    *v = num(f);
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_tree),
        Value::Object(o) => o.values_mut().for_each(round_tree),
        _ => {}
    }
}

fn compact(v: &Value) -> String {
    serde_json::to_string(v).expect("config serializes")
}

/// Report context shared by both formats: the master seed, the compact
/// grid descriptor, and the effective (defaults-filled) config.
pub struct Report {
    pub seed: u64,
    pub grid: String,
    pub config: Value,
}

impl Report {
    pub fn new(seed: u64, grid: String, config: Value) -> Self {
        let mut config = config;
        round_tree(&mut config);
        Self { seed, grid, config }
    }

    fn comment_header(&self, summary: Option<&Value>) -> String {
        let mut s = format!(
            "# {TOOL} {VERSION} seed={} grid={}\n# config: {}\n",
            self.seed,
            self.grid,
            compact(&self.config)
        );
        if let Some(v) = summary {
            let mut v = v.clone();
            round_tree(&mut v);
            s.push_str(&format!("# report: {}\n", compact(&v)));
        }
        s
    }

    /// CSV: comment header lines, a column row, then data rows. An optional
    /// scalar summary is carried as one more comment line.
    pub fn csv(&self, summary: Option<&Value>, columns: &[&str], rows: &[Vec<String>]) -> String {
        let mut s = self.comment_header(summary);
        s.push_str(&columns.join(","));
        s.push('\n');
        for row in rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    /// One-row CSV from a flat JSON object: one column per key (sorted),
    /// scalar values rendered directly, nested values as quoted JSON.
    pub fn kv_csv(&self, summary: &Value) -> String {
        let obj = summary.as_object().expect("flat summary object");
        let columns: Vec<&str> = obj.keys().map(String::as_str).collect();
        let row: Vec<String> = obj
            .values()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                Value::Bool(b) => b.to_string(),
                Value::Null => String::new(),
                Value::Number(n) => {
                    if let Some(f) = n.as_f64() {
                        if n.is_i64() || n.is_u64() {
                            n.to_string()
                        } else {
                            sig12(f)
                        }
                    } else {
                        n.to_string()
                    }
                }
                nested => format!("\"{}\"", compact(nested).replace('"', "\"\"")),
            })
            .collect();
        self.csv(None, &columns, &[row])
    }

    /// JSON: `{meta: {...}, results: ...}` with all floats rounded. The
    /// embedded config is itself a loadable experiment config.
    pub fn json(&self, results: Value) -> String {
        let mut doc = serde_json::json!({
            "meta": {
                "tool": TOOL,
                "version": VERSION,
                "seed": self.seed,
                "grid": self.grid,
                "config": self.config,
            },
            "results": results,
        });
        round_tree(&mut doc);
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Print a report to stdout and mirror it to the optional output path.
pub fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Failure> {
    print!("{text}");
    if let Some(path) = output {
        std::fs::write(path, text).map_err(|e| {
            Failure::Usage(format!("cannot write report to {}: {e}", path.display()))
        })?;
    }
    Ok(())
}

/// Serialize a value that is expected to serialize cleanly (configs and
/// library reports); a failure here is a config containing non-finite
/// numbers, which JSON cannot represent.
pub fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v)
        .map_err(|e| Failure::Usage(format!("config contains unserializable values: {e}")))
}
