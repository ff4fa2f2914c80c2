#![allow(dead_code)]

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub report: Value,
    pub bytes: String,
    pub stderr: String,
}

/// Runs the built binary with `--out` in a fresh temp dir.
pub fn morrey(args: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = Command::new(env!("CARGO_BIN_EXE_morrey"))
        .args(args)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("binary runs");
    let code = output.status.code().expect("exit code");
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    let bytes = std::fs::read_to_string(&out).unwrap_or_default();
    let report = serde_json::from_str(&bytes).unwrap_or(Value::Null);
    Run { code, report, bytes, stderr }
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
        let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// Every schema violation, one line each.
pub fn schema_errors(report: &Value) -> Vec<String> {
    validator().iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}
