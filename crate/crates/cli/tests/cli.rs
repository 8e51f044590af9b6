//! End-to-end tests of the `echo-lab` binary: exit codes, output artifacts,
//! and the byte-identical rerun contract.

use std::path::Path;
use std::process::{Command, Output};

fn echo_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echo-lab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const NULL_CONFIG: &str = r#"
[experiment]
kind = "rotor-echo"
seed = 1

[rotor]
n = 256
kick_strength = 10.0
epsilon_over_hbar = 0.0
members = 8
t_max = 12
region = [0.2, 0.3, 0.3, 0.4]
"#;

const GLAUBER_CONFIG: &str = r#"
[experiment]
kind = "glauber-populations"

[glauber]
weight = "gaussian"
hbar = 0.1
n_max = 200
delta = 0.4
"#;

#[test]
fn null_run_writes_unit_fidelities() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "null.toml", NULL_CONFIG);
    let out = echo_lab(&["rotor-echo", "--config", &config, "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["coherent.csv", "incoherent.csv", "trace_overlap.csv"] {
        let text = std::fs::read_to_string(dir.path().join("run").join(file)).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "t,value,stderr");
        assert_eq!(rows.len(), 1 + 13, "{file}: t_max+1 data rows");
        for row in &rows[1..] {
            let value: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
            assert!((value - 1.0).abs() < 1e-10, "{file}: {row}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["experiment"], "rotor-echo");
    assert_eq!(summary["config"]["rotor"]["n"], 256);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.toml", NULL_CONFIG);
    for out_dir in ["a", "b"] {
        let out = echo_lab(
            &["rotor-echo", "--config", &config, "--out", out_dir],
            dir.path(),
        );
        assert!(out.status.success());
    }
    for file in ["coherent.csv", "incoherent.csv", "trace_overlap.csv", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
}

#[test]
fn thread_count_does_not_change_the_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.toml", NULL_CONFIG);
    echo_lab(&["rotor-echo", "--config", &config, "--out", "a"], dir.path());
    echo_lab(
        &["rotor-echo", "--config", &config, "--out", "b", "--threads", "1"],
        dir.path(),
    );
    let a = std::fs::read(dir.path().join("a/coherent.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/coherent.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_field_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        &NULL_CONFIG.replace("kick_strength", "kick_strenght"),
    );
    let out = echo_lab(&["rotor-echo", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kick_strenght"), "stderr: {stderr}");
}

#[test]
fn kind_subcommand_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.toml", NULL_CONFIG);
    let out = echo_lab(&["osc-fgr", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = echo_lab(&["rotor-echo", "--config", "absent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn truncated_population_basis_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "glauber.toml",
        &GLAUBER_CONFIG.replace("n_max = 200", "n_max = 5"),
    );
    let out = echo_lab(&["glauber-populations", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("n_max"), "stderr: {stderr}");
}

#[test]
fn glauber_run_reports_mean_occupation() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "glauber.toml", GLAUBER_CONFIG);
    let out = echo_lab(
        &["glauber-populations", "--config", &config, "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["scalars"][0]["name"], "mean_occupation");
    let nbar = summary["scalars"][0]["value"].as_f64().unwrap();
    assert!((nbar - 4.0).abs() < 1e-6, "nbar = {nbar}");
}

#[test]
fn fit_subcommand_refits_a_written_csv() {
    let dir = tempfile::tempdir().unwrap();
    // Plant a clean exponential so the refit rate is known.
    let mut csv = String::from("t,value,stderr\n");
    for t in 0..=10 {
        csv.push_str(&format!("{t}.0,{:.12e},0.0\n", (-0.7 * t as f64).exp()));
    }
    std::fs::write(dir.path().join("series.csv"), csv).unwrap();
    let config = write_config(
        dir.path(),
        "fit.toml",
        r#"
[experiment]
kind = "fit"
fit_window = [1.0, 9.0]

[fit]
csv = "series.csv"
"#,
    );
    let out = echo_lab(&["fit", "--config", &config, "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap())
            .unwrap();
    let rate = summary["series"][0]["fit"]["rate"].as_f64().unwrap();
    assert!((rate - 0.7).abs() < 1e-9, "rate = {rate}");
}

#[test]
fn presets_list_and_write() {
    let dir = tempfile::tempdir().unwrap();
    let out = echo_lab(&["presets"], dir.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["fig1-low", "fig1-mid", "fig1-high", "null"] {
        assert!(stdout.contains(name), "missing {name} in listing");
    }
    let out = echo_lab(&["presets", "--out", "presets"], dir.path());
    assert!(out.status.success());
    // The written null preset must parse and run.
    let preset = dir.path().join("presets/null.toml");
    assert!(preset.exists());
    let text = std::fs::read_to_string(&preset).unwrap();
    assert!(text.contains("epsilon_over_hbar = 0.0"));
}

#[test]
fn osc_fgr_emits_prediction_alongside_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fgr.toml",
        r#"
[experiment]
kind = "osc-fgr"
seed = 3
fit_window = [2.0, 8.0]

[oscillator]
omega0 = 1.0
drive = "kicked"
g0 = 0.5
center = 5.477225575051661
delta = 0.5
samples = 2000
t_max = 10.0
sigma = 0.02
"#,
    );
    let out = echo_lab(&["osc-fgr", "--config", &config, "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["fidelity.csv", "chi2.csv", "prediction.csv"] {
        assert!(dir.path().join("run").join(file).exists(), "missing {file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap())
            .unwrap();
    let measured = summary["series"][0]["fit"]["rate"].as_f64().unwrap();
    let predicted = summary["scalars"][1]["value"].as_f64().unwrap();
    assert!(measured > 0.0 && predicted > 0.0);
    assert!(
        (measured - predicted).abs() < 0.35 * predicted,
        "measured {measured} vs predicted {predicted}"
    );
}

#[test]
fn config_echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_config(dir.path(), "cfg.toml", NULL_CONFIG);
    let out = echo_lab(
        &["rotor-echo", "--config", &config_path, "--out", "run"],
        dir.path(),
    );
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/summary.json")).unwrap())
            .unwrap();
    let original: toml::Value = toml::from_str(NULL_CONFIG).unwrap();
    let echoed = &summary["config"];
    assert_eq!(
        echoed["rotor"]["epsilon_over_hbar"].as_f64(),
        original["rotor"]["epsilon_over_hbar"].as_float()
    );
    assert_eq!(
        echoed["experiment"]["kind"].as_str(),
        original["experiment"]["kind"].as_str()
    );
    assert_eq!(
        echoed["rotor"]["region"][3].as_f64(),
        original["rotor"]["region"][3].as_float()
    );
}
