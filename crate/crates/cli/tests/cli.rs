use std::path::Path;
use std::process::{Command, Output};

fn freqcoord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqcoord")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SHORT: &str = r#"
[sim]
t_end = 4.0
record_every = 10
[dataset]
t_end = 4.0
n_samples = 400
[train]
max_epochs = 20
[compare]
alphas = [0.5, 1.0]
"#;

#[test]
fn powerflow_writes_bus_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqcoord(&["--out", dir.path().to_str().unwrap(), "powerflow"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("powerflow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.starts_with("bus,vm_pu,va_deg"));
}

#[test]
fn missing_scenario_file_exits_2() {
    let o = freqcoord(&["--scenario", "/nonexistent/scenario.toml", "powerflow"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scenario.toml"));
}

#[test]
fn malformed_scenario_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", "[sim]\ndt = 0.001\nt_end = = 3\n");
    let o = freqcoord(&["--scenario", &p, "powerflow"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn zero_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqcoord(&["--out", dir.path().to_str().unwrap(), "simulate", "--dt", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn unknown_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.toml", "[overrides.governor]\nk9 = 1.0\n");
    let o = freqcoord(&["--scenario", &p, "powerflow"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("governor.k9"));
}

#[test]
fn unknown_preset_is_rejected() {
    let o = freqcoord(&["--preset", "nope", "powerflow"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coordinated_mode_needs_weights() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqcoord(&["--out", dir.path().to_str().unwrap(), "simulate", "--mode", "coordinated"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weights"));
}

#[test]
fn zero_samples_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = freqcoord(&["--out", dir.path().to_str().unwrap(), "gen-dataset", "--samples", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "d.csv", "a,b,target_uc\n1,2,3\n1,x,3\n");
    let o = freqcoord(&["--out", dir.path().to_str().unwrap(), "train", "--dataset", &p]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("weights.json").exists());
}

#[test]
fn short_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "short.toml", SHORT);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let run = |args: &[&str]| {
        let mut a = vec!["--scenario", sc.as_str(), "--out", out_s];
        a.extend_from_slice(args);
        let o = freqcoord(&a);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    run(&["gen-dataset"]);
    run(&["train"]);
    let weights = out.join("weights.json");
    run(&["compare", "--weights", weights.to_str().unwrap()]);
    run(&["simulate", "--mode", "coordinated", "--weights", weights.to_str().unwrap()]);
    for f in ["dataset.csv", "train_report.csv", "mse.svg", "regression.svg", "comparison.csv", "improvements.csv", "trace.csv", "metrics.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let data = std::fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert_eq!(data.lines().count(), 401);
    let cmp = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let modes: Vec<&str> = cmp.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(modes, ["none", "inertial", "coordinated"]);
    let imp = std::fs::read_to_string(out.join("improvements.csv")).unwrap();
    assert!(imp.lines().any(|l| l.starts_with("reference,22,29.5")));

    // same scenario and seed, same bytes
    let first = std::fs::read(&weights).unwrap();
    let first_cmp = std::fs::read(out.join("comparison.csv")).unwrap();
    run(&["train"]);
    run(&["compare", "--weights", weights.to_str().unwrap()]);
    assert_eq!(std::fs::read(&weights).unwrap(), first);
    assert_eq!(std::fs::read(out.join("comparison.csv")).unwrap(), first_cmp);
}

#[test]
fn pipeline_sweeps_and_selects_by_area() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "short.toml", SHORT);
    let out = dir.path().join("out");
    let o = freqcoord(&["--scenario", &sc, "--out", out.to_str().unwrap(), "pipeline"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = std::fs::read_to_string(out.join("alpha_sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = sweep.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows.iter().filter(|r| r[7] == "true").count(), 1);
    let area = |r: &Vec<&str>| r[3].parse::<f64>().unwrap();
    let chosen = rows.iter().find(|r| r[7] == "true").unwrap();
    assert!(rows.iter().all(|r| area(chosen) <= area(r)));
    assert!(out.join("alpha_0.5/weights.json").exists() && out.join("weights.json").exists());
}
