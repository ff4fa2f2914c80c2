//! Report envelope, determinism hash and atomic persistence.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields left out of the determinism hash.
const UNHASHED: [&str; 2] = ["timestamp", "determinism_hash"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the config as serialized (sorted keys, no output path).
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.out = None;
    let value = serde_json::to_value(&cfg).expect("config serializes");
    sha256_hex(value.to_string().as_bytes())
}

/// Hash of the report with the unhashed fields removed. Object keys are
/// sorted, so the serialization is canonical.
pub fn determinism_hash(report: &Value) -> String {
    let mut copy = report.clone();
    if let Value::Object(map) = &mut copy {
        for key in UNHASHED {
            map.remove(key);
        }
    }
    sha256_hex(copy.to_string().as_bytes())
}

pub struct Outcome {
    pub status: String,
    pub expected: String,
    pub exit_code: i32,
}

pub fn envelope(command: &str, cfg: &RunConfig, outcome: &Outcome, result: Value) -> Value {
    let mut map = Map::new();
    map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    map.insert("tool".into(), json!("morrey"));
    map.insert("tool_version".into(), json!(TOOL_VERSION));
    map.insert("command".into(), json!(command));
    let mut shown = cfg.clone();
    shown.out = None;
    map.insert("config".into(), serde_json::to_value(&shown).expect("config serializes"));
    map.insert("config_hash".into(), json!(config_hash(cfg)));
    map.insert("seed".into(), json!(cfg.seed()));
    map.insert("mode".into(), json!(cfg.mode().as_str()));
    map.insert(
        "outcome".into(),
        json!({ "status": outcome.status, "expected": outcome.expected, "exit_code": outcome.exit_code }),
    );
    map.insert("result".into(), result);
    let mut report = Value::Object(map);
    let hash = determinism_hash(&report);
    if let Value::Object(map) = &mut report {
        map.insert("determinism_hash".into(), json!(hash));
        map.insert("timestamp".into(), json!(timestamp()));
    }
    report
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, report: &Value) -> Result<()> {
    let io = |e: std::io::Error| Error::invalid("out", format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
