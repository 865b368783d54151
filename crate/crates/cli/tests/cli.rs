use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nlfb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlfb")).args(args).output().expect("runs nlfb")
}

fn experiment(name: &str) -> String {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    root.join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const BETA0: &str = r#"{
  "subcommand": "beta0",
  "description": "tight envelope",
  "problem": { "envelopes": [[1.0, 1.0]], "orders": [0.5] }
}"#;

#[test]
fn fast_experiments_pass() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, name) in ["c1_torsion_oracle.json", "c2_harmonic_profile.json", "c4_beta0.json", "c9_min_max.json"].iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        let o = nlfb(&["run", &experiment(name), "-q", "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let m = manifest(&out);
        assert_eq!(m["status"], "pass");
        assert_eq!(m["library_version"], env!("CARGO_PKG_VERSION"));
        assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        for f in m["outputs"].as_array().unwrap() {
            assert!(out.join(f.as_str().unwrap()).exists(), "{name}: missing {f}");
        }
    }
}

#[test]
fn manifest_records_resolved_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.json", BETA0);
    let out = tmp.path().join("out");
    let o = nlfb(&["beta0", cfg.to_str().unwrap(), "-q", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&out);
    assert_eq!(m["config"]["tolerances"]["beta0_tight"], 0.01);
    assert_eq!(m["config"]["seed"], 0);
}

#[test]
fn failing_predicate_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let fit = r#"{
      "subcommand": "fit-exponent",
      "problem": { "samples": [[0.1, 0.1], [0.2, 0.2], [0.4, 0.4], [0.8, 0.8]], "target": 2.0 }
    }"#;
    let cfg = write(tmp.path(), "f.json", fit);
    let out = tmp.path().join("fit");
    let o = nlfb(&["fit-exponent", cfg.to_str().unwrap(), "-q", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(&out)["status"], "fail");
}

#[test]
fn malformed_json_exits_one_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.json", "{ \"subcommand\": \"beta0\", ");
    let out = tmp.path().join("out");
    let o = nlfb(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let text = BETA0.replace(r#""orders""#, r#""order_list": [0.5], "orders""#);
    let cfg = write(tmp.path(), "u.json", &text);
    let out = tmp.path().join("out");
    let o = nlfb(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("order_list"), "{err}");
    assert!(err.contains("problem"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_tolerance_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = BETA0.replace(r#""problem""#, r#""tolerances": { "beta_tight": 0.1 }, "problem""#);
    let cfg = write(tmp.path(), "t.json", &text);
    let o = nlfb(&["run", cfg.to_str().unwrap(), "-o", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn subcommand_mismatch_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.json", BETA0);
    let out = tmp.path().join("out");
    let o = nlfb(&["obstacle", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn missing_config_exits_one() {
    let o = nlfb(&["run", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("run{i}"))).collect();
    for out in &runs {
        let o = nlfb(&["run", &experiment("c9_min_max.json"), "-q", "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let mut compared = 0;
    for entry in fs::read_dir(&runs[0]).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            assert_eq!(fs::read(runs[0].join(&name)).unwrap(), fs::read(runs[1].join(&name)).unwrap(), "{name:?}");
            compared += 1;
        }
    }
    assert!(compared > 0);
}

#[test]
fn fit_reads_csv_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: String = (1..=8)
        .map(|k| {
            let r = 0.01 * 2f64.powi(k);
            format!("{r:e},{:e}\n", 3.0 * r.powf(1.5))
        })
        .collect();
    write(tmp.path(), "samples.csv", &format!("r,value\n{rows}"));
    let cfg = write(tmp.path(), "f.json", r#"{ "subcommand": "fit-exponent", "problem": { "csv": "samples.csv", "target": 1.5 } }"#);
    let out = tmp.path().join("out");
    let o = nlfb(&["run", cfg.to_str().unwrap(), "-q", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = &manifest(&out)["summary"]["fit"];
    assert!((fit["exponent"].as_f64().unwrap() - 1.5).abs() < 1e-10);
    assert!(out.join("fit.svg").exists());
}

#[test]
fn reduce_kernel_power_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "r.json",
        r#"{ "subcommand": "reduce-kernel",
             "kernel": { "tag": "power", "n": 2, "s": 0.5, "params": { "coeff": 1.0 } },
             "problem": { "expected_c0": 2.0 } }"#,
    );
    let out = tmp.path().join("out");
    let o = nlfb(&["reduce-kernel", cfg.to_str().unwrap(), "-q", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

fn documented_schema() -> serde_json::Value {
    let doc = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config.md")).unwrap();
    let start = doc.find("```json\n").expect("schema block") + "```json\n".len();
    let end = start + doc[start..].find("\n```").unwrap();
    serde_json::from_str(&doc[start..end]).unwrap()
}

#[test]
fn documented_schema_matches_runner() {
    let schema = documented_schema();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.json", BETA0);
    let out = tmp.path().join("out");
    assert_eq!(nlfb(&["run", cfg.to_str().unwrap(), "-q", "-o", out.to_str().unwrap()]).status.code(), Some(0));
    let resolved = manifest(&out)["config"]["tolerances"].as_object().unwrap().clone();
    let documented = schema["$defs"]["tolerances"]["properties"].as_object().unwrap();
    assert_eq!(resolved.len(), documented.len());
    for (key, value) in &resolved {
        assert_eq!(&documented[key]["default"], value, "tolerance {key}");
    }

    let subs: Vec<&str> =
        schema["oneOf"].as_array().unwrap().iter().map(|v| v["properties"]["subcommand"]["const"].as_str().unwrap()).collect();
    for sub in ["solve-dirichlet", "one-phase", "half-space", "obstacle", "beta0", "fit-exponent", "reduce-kernel"] {
        assert!(subs.contains(&sub), "{sub} missing from the schema");
    }
}
