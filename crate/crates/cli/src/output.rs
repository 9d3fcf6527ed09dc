use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::failure::Failure;

pub const SCHEMA: u64 = 1;

/// Formats a float with 17 significant digits.
pub fn float17(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

/// Pretty-printed JSON with every float written by [`float17`].
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&float17(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (k, x) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push_str(": ");
                write_value(out, x, depth + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// Where a job writes its report and artifacts.
pub struct Sink {
    dir: Option<PathBuf>,
    started: SystemTime,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| Failure::io(d, e))?;
        }
        Ok(Sink {
            dir,
            started: SystemTime::now(),
        })
    }

    /// Writes an artifact into the output directory, if there is one.
    pub fn artifact(&self, name: &str, contents: &str) -> Result<(), Failure> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        }
        Ok(())
    }

    /// Prints the report and, with an output directory, stores it next to a
    /// metadata sidecar holding the timestamps.
    pub fn report(&self, command: &str, mut body: Value) -> Result<(), Failure> {
        if let Value::Object(map) = &mut body {
            map.insert("schema".into(), json!(SCHEMA));
            map.insert("command".into(), json!(command));
        }
        let text = to_json(&body);
        print!("{text}");
        if self.dir.is_some() {
            self.artifact("report.json", &text)?;
            let finished = SystemTime::now();
            let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
            let meta = json!({
                "schema": SCHEMA,
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "started_unix": secs(self.started),
                "finished_unix": secs(finished),
                "elapsed_seconds": finished.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            });
            self.artifact("report.meta.json", &to_json(&meta))?;
        }
        Ok(())
    }
}
