#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Shipped config of `name` with absolute paths, the output directory moved
/// into `out`, and `overrides` merged on top.
pub fn config(name: &str, out: &Path, overrides: Value) -> Value {
    let text = std::fs::read_to_string(fixtures_dir().join(format!("{name}.json"))).unwrap();
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    cfg["paths"]["geometry"] = json!(fixtures_dir().join(format!("{name}.geometry.json")));
    cfg["paths"]["output_dir"] = json!(out);
    merge(&mut cfg, overrides);
    cfg
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

pub fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

pub fn quadfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadfield"))
        .args(args)
        .env_remove("QUADFIELD_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

pub fn run(config: &Path) -> Output {
    quadfield(&["-q", "run", "--config", config.to_str().unwrap()])
}

pub fn stage(config: &Path, stage: &str) -> Output {
    quadfield(&["-q", "stage", "--config", config.to_str().unwrap(), "--stage", stage])
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
