// Copyright 2026 The gsp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use std::path::Path;
use std::process::Command;

fn gsp(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_gsp")).args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "gsp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_then_decode() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("est");
    gsp(&["estimate", "--scenario", "S0strong", "--n", "2000", "--seed", "4", "--method", "both", "--out", s(&est)]);
    for f in ["report.json", "z.csv", "f1_cdf.csv", "f1_density.csv", "scenario.json"] {
        assert!(est.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(est.join("report.json")).unwrap()).unwrap();
    assert!(report["theta_hat"]["alpha"].as_f64().is_some());
    assert!(report["theta_tilde"]["beta"].as_f64().is_some());

    let decoded = dir.path().join("decoded.csv");
    let out = gsp(&[
        "decode",
        "--report",
        s(&est.join("report.json")),
        "--trajectory",
        s(&est.join("z.csv")),
        "--out",
        s(&decoded),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("MAP accuracy"), "{stdout}");
    let text = std::fs::read_to_string(&decoded).unwrap();
    assert_eq!(text.lines().count(), 1 + 1000);
    assert!(text.starts_with("index,z,zprime,p00,p01,p10,p11,map_k,map_l"));
}

#[test]
fn montecarlo_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "S1", "n_values": [400, 800], "repetitions": 5, "methods": ["d"], "panel_curves": 2}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    gsp(&["montecarlo", "--config", s(&cfg), "--out", s(&a), "--workers", "1"]);
    gsp(&["montecarlo", "--config", s(&cfg), "--out", s(&b), "--workers", "3"]);
    let table = std::fs::read_to_string(a.join("table_S1_d.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2);
    let samples = std::fs::read_to_string(a.join("samples_S1_d_n400.csv")).unwrap();
    assert_eq!(samples.lines().count(), 1 + 5);
    for entry in std::fs::read_dir(&a).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            let other = b.join(p.file_name().unwrap());
            assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(other).unwrap(), "{p:?}");
        }
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["repetition_seeds"].as_array().unwrap().len(), 5);
}

#[test]
fn simulate_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    gsp(&["simulate", "--scenario", "S4", "--n", "300", "--out", s(dir.path())]);
    let text = std::fs::read_to_string(dir.path().join("z.csv")).unwrap();
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn bad_input_fails_cleanly() {
    let out = Command::new(env!("CARGO_BIN_EXE_gsp"))
        .args(["estimate", "--scenario", "S9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
