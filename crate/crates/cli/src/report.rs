use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a report, embedded in the report itself.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub subcommand: String,
    pub flags: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            tool: "rkld",
            version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    /// Reads a file and records its digest.
    pub fn read_input(&mut self, path: &str) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::usage(format!("cannot read {path}: {e}")))?;
        let digest = Sha256::digest(&bytes);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push(InputDigest { path: path.to_string(), sha256 });
        String::from_utf8(bytes).map_err(|_| Failure::usage(format!("{path} is not valid UTF-8")))
    }
}

/// Rounds to 15 significant digits so printed values do not carry the last
/// bits of floating-point noise.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round15(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `body`, attaches the manifest and rounds every float.
pub fn render(body: impl Serialize, manifest: &RunManifest) -> Result<String, Failure> {
    let mut value = serde_json::to_value(body).map_err(Failure::internal)?;
    let map: &mut Map<String, Value> = value.as_object_mut().ok_or_else(|| Failure::internal("report body is not an object"))?;
    map.insert("manifest".into(), serde_json::to_value(manifest).map_err(Failure::internal)?);
    round_value(&mut value);
    let mut text = serde_json::to_string_pretty(&value).map_err(Failure::internal)?;
    text.push('\n');
    Ok(text)
}

/// Writes to `out` when given, otherwise to standard output.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(Failure::internal)
        }
    }
}

/// CSV with a header row; floats go through `round15`.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(|x| round15(x).to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}
