use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn timeless(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timeless"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn timeless")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const HJ_FREE: &str = r#"{
    "scenario": "hj_correlation",
    "parameters": {"system": "free_particle(1)", "q1": 3.0, "e1": 0.5, "expected_t1": 3.0, "expected_t2": -3.0}
}"#;

#[test]
fn list_scenarios_names_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = timeless(&["list-scenarios"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "pw_quantum",
        "classical_liouville",
        "extended",
        "hj_correlation",
        "constraints",
    ] {
        assert!(text.contains(name), "missing {name} in {text}");
    }
}

#[test]
fn run_writes_report_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), HJ_FREE);
    let out = timeless(&["run", &cfg, "--out", "res"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("res/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["scenario"], "hj_correlation");
    assert!(!report["tables"].as_array().unwrap().is_empty());
    for table in report["tables"].as_array().unwrap() {
        let name = table.as_str().unwrap();
        assert!(tmp.path().join("res").join(name).is_file(), "{name}");
    }
}

#[test]
fn failing_check_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "hj_correlation",
            "parameters": {"system": "free_particle(1)", "q1": 3.0, "e1": 0.5, "expected_t1": 3.5}}"#,
    );
    let out = timeless(&["run", &cfg, "--out", "res"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL t1_error"));
    assert!(tmp.path().join("res/report.json").is_file());
}

#[test]
fn invalid_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "pw_quantum", "parameters": {"d_s": 2, "d": 1, "dt": 0.5}}"#,
    );
    let out = timeless(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d must be at least 2"));

    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "extended", "parameters": {"stpes": 10}}"#,
    );
    let out = timeless(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stpes"));
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"scenario": "pw_quantum", "parameters": {"d_s": 3, "d": 8, "dt": 0.5, "refinements": 2, "random_states": 3}}"#,
    );
    for dir in ["a", "b"] {
        let out = timeless(&["run", &cfg, "--out", dir, "--seed", "42"], tmp.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
    let mut names: Vec<_> = fs::read_dir(tmp.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.contains(&"random_states.csv".to_string()));
    for n in &names {
        assert_eq!(
            fs::read(tmp.path().join("a").join(n)).unwrap(),
            fs::read(tmp.path().join("b").join(n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn shipped_configs_pass() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let out = timeless(&["run", path.to_str().unwrap(), "--out", &stem], tmp.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{stem}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(tmp.path().join(&stem).join("report.json").is_file());
        seen += 1;
    }
    assert_eq!(seen, 5);
}
