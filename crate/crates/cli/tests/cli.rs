use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> String {
    models().join(name).display().to_string()
}

fn twave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twave"))
        .args(args)
        .output()
        .expect("spawn twave")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("twave-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_fisher_is_clean() {
    let out = twave(&["validate", &model("fisher.toml")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["warnings"], Value::Array(vec![]));
    assert_eq!(v["theta"], Value::Array(vec![]));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(v["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn speed_fisher() {
    let out = twave(&["speed", &model("fisher.toml"), "--tol", "1e-3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let c = v["c_star"].as_f64().unwrap();
    assert!((c - 2.0).abs() <= 1e-3, "{c}");
    for key in ["lower", "upper", "simple_lower", "simple_upper"] {
        assert!(v["bounds"].get(key).is_some(), "{key}");
    }
    assert!(!v["verdicts"].as_array().unwrap().is_empty());
    assert_eq!(
        v["verdicts"].as_array().unwrap().len(),
        v["bracket_history"].as_array().unwrap().len()
    );
}

#[test]
fn speed_refused_without_half_line() {
    let out = twave(&["speed", &model("sign_changing_g.toml")]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("half-line"), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["c_star"].is_null());
    assert!(v["bounds"]["lower"].is_number());
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(twave(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(twave(&["solve", &model("fisher.toml")]).status.code(), Some(1));
    assert_eq!(
        twave(&["speed", &model("fisher.toml"), "--tol", "-1"]).status.code(),
        Some(1)
    );
    assert_eq!(twave(&["validate", "no/such/model.toml"]).status.code(), Some(1));
    let out = twave(&["reg-sweep", &model("convection.toml"), "--eps", "0.9"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(twave(&["--help"]).status.code(), Some(0));
    assert_eq!(twave(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_models_exit_two() {
    let dir = scratch("invalid");
    fs::create_dir_all(&dir).unwrap();
    let bad_h = dir.join("bad_h.toml");
    fs::write(&bad_h, "p = 2\nf = \"0\"\ng = \"1\"\nh = \"1 - x\"\nd = \"1\"\n").unwrap();
    let out = twave(&["validate", bad_h.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("H3"), "{}", stderr(&out));

    let syntax = dir.join("syntax.toml");
    fs::write(&syntax, "p = 2\nf = \"0 +\"\ng = \"1\"\nh = \"x*(1-x)\"\nd = \"1\"\n").unwrap();
    let out = twave(&["bounds", syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn profile_needs_admissible_speed() {
    let out = twave(&["profile", &model("fisher.toml"), "--c", "1"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn outputs_exist_and_are_not_empty() {
    let dir = scratch("outputs");
    let d = dir.to_str().unwrap();
    for args in [
        vec!["solve", "--c", "3"],
        vec!["profile", "--c", "3", "--grid", "128"],
        vec!["reg-sweep", "--eps", "0.05,0.025"],
    ] {
        let mut full = args.clone();
        let m = model("convection.toml");
        full.extend([m.as_str(), "--out", d]);
        let out = twave(&full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        assert!(out.stdout.is_empty());
        let name = args[0].replace('-', "_");
        let report: Value = serde_json::from_slice(&fs::read(dir.join(format!("{name}.json"))).unwrap()).unwrap();
        let files = report["outputs"].as_array().unwrap();
        assert_eq!(files.len(), 2, "{args:?}");
        for f in files {
            let len = fs::metadata(f.as_str().unwrap()).unwrap().len();
            assert!(len > 0, "{f}");
        }
    }
    let csv = fs::read_to_string(dir.join("solve.csv")).unwrap();
    assert!(csv.starts_with("xi,y,ydot_left,ydot_right,residual\n"));
    let csv = fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert!(csv.starts_with("z,v,phi_v\n"));
    let csv = fs::read_to_string(dir.join("reg_sweep.csv")).unwrap();
    assert!(csv.starts_with("functional,eps,value,gap\n"));
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn runs_are_deterministic() {
    let m = model("three_jumps.toml");
    for args in [
        vec!["solve", m.as_str(), "--c", "2.5"],
        vec!["speed", m.as_str()],
        vec!["profile", m.as_str(), "--c", "2.5", "--grid", "256"],
    ] {
        let a = twave(&args);
        let b = twave(&args);
        assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
        let (ja, jb) = (json(&a), json(&b));
        assert_eq!(
            serde_json::to_string(&without_timings(ja)).unwrap(),
            serde_json::to_string(&without_timings(jb)).unwrap(),
            "{args:?}"
        );
    }
}

#[test]
fn json_numbers_carry_17_digits() {
    let out = twave(&["bounds", &model("fisher.toml")]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("\"lower\"")).unwrap();
    let num = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = num.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{num}");
}

fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let p = format!("{prefix}/{k}");
            out.insert(p.clone());
            key_paths(child, &p, out);
        }
    }
}

#[test]
fn schema_does_not_depend_on_discontinuities() {
    let cases: [&[&str]; 7] = [
        &["validate"],
        &["speed"],
        &["bounds"],
        &["certify", "--c", "2.5"],
        &["solve", "--c", "2.5"],
        &["profile", "--c", "2.5", "--grid", "64"],
        &["reg-sweep", "--c", "2.5"],
    ];
    for args in cases {
        let mut keys = Vec::new();
        for name in ["fisher.toml", "three_jumps.toml"] {
            let m = model(name);
            let mut full = args.to_vec();
            full.insert(1, m.as_str());
            let out = twave(&full);
            assert_eq!(out.status.code(), Some(0), "{full:?}: {}", stderr(&out));
            let mut set = BTreeSet::new();
            key_paths(&without_timings(json(&out)), "", &mut set);
            keys.push(set);
        }
        assert_eq!(keys[0], keys[1], "{args:?}");
    }
}
