mod common;

use common::*;
use serde_json::json;

/// Tracing should be the dominant stage on the nautilus fixture.
#[test]
fn nautilus_tracing_takes_at_least_forty_percent_of_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &config("nautilus", dir.path(), json!({})));
    let out = run(&cfg);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = read_json(&dir.path().join("timings.json"));
    let stages = t["stages"].as_object().unwrap();
    let total: f64 = stages.values().map(|v| v.as_f64().unwrap()).sum();
    let trace = stages["trace"].as_f64().unwrap();
    assert!(trace / total >= 0.4, "trace share {:.3} of {total:.3} s; stages {stages:?}", trace / total);
}
