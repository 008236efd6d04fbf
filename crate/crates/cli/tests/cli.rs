//! End-to-end checks of the egsim binary: exit codes, output files, and the
//! determinism of repeated runs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SCENARIO: &str = r#"
duration = 180.0
seed = 5

[world]
width = 200.0
height = 200.0

[[fields]]
sensor_type = "Temperature"
baseline = 21.0
noise_sigma = 0.4
noise_corr_len = 40.0

[[networks]]
id = "net_a"
sensor_sigma = 0.2

[networks.energy]
p_idle = 0.01
p_sleep = 0.001
e_sample = 0.05
e_tx = 0.25

[networks.link]
pdr = 0.9
latency = 0.0

[[networks.nodes]]
node_id = "a1"
position = { x = 100.0, y = 100.0 }
sensor_type = "Temperature"
sensing_radius = 150.0
battery = 4000.0

[[networks.nodes]]
node_id = "a2"
position = { x = 80.0, y = 120.0 }
sensor_type = "Temperature"
sensing_radius = 150.0
battery = 4000.0

[[gateways]]
id = "eg_a"
network = "net_a"

[gateways.filter.bounds.Temperature]
value_min = -40.0
value_max = 120.0
max_rate = 20.0

[gateways.thresholds.Temperature]
theta_low = 45.0
theta_high = 70.0

[gateways.planner]
app_type = "Monitoring"
"#;

fn egsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, SCENARIO).unwrap();
    path
}

#[test]
fn validate_prints_ok_on_a_valid_file() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = egsim(&["validate", "--scenario", scenario.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
}

#[test]
fn run_without_scenario_flag_is_a_usage_error() {
    let out = egsim(&["run"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--scenario"), "{stderr}");
}

#[test]
fn missing_scenario_file_exits_with_io_code() {
    let out = egsim(&["validate", "--scenario", "/no/such/file.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_scenario_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, SCENARIO.replace("pdr = 0.9", "pdr = 1.5")).unwrap();
    let out = egsim(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("link.pdr"), "{stderr}");
}

#[test]
fn repeated_runs_with_the_same_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = egsim(&[
            "run",
            "--scenario",
            scenario.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for file in ["timeseries.csv", "events.csv", "summary.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn compare_writes_one_row_per_seed_and_network_plus_mean() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path());
    let out = dir.path().join("cmp");
    let res = egsim(&[
        "compare",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seeds",
        "1,2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[0].starts_with("seed,network_id,"));
    assert!(lines[4].starts_with("mean,net_a,"));
}
