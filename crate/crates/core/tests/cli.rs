use std::process::{Command, Output};

fn wiesner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wiesner"))
        .args(args)
        .env_remove("WIESNER_CONFIG")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn threshold_at_the_boundary_is_zero() {
    let out = wiesner(&["threshold", "--mu", "1", "--eta", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        text(&out.stderr).contains("epsilon_threshold = 0.0000"),
        "{}",
        text(&out.stderr)
    );
    assert!(text(&out.stdout).starts_with("mu,eta,epsilon_threshold"));
}

#[test]
fn out_of_range_eta_is_a_validation_error() {
    let out = wiesner(&["threshold", "--eta", "1.3"]);
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.contains("eta") && err.contains("1.3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = wiesner(&[
        "sweep",
        "--mu-values",
        "0.5,1,1.5,2",
        "--eta-values",
        "0.6,0.7,0.77,0.9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",OPTIMAL")));
}

#[test]
fn verdict_from_measured_values() {
    let out = wiesner(&[
        "verdict",
        "--mu",
        "1",
        "--eta",
        "0.77",
        "--epsilon",
        "0.0078",
        "--stderr",
        "0.0007",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let err = text(&out.stderr);
    assert!(err.contains("SECURE, margin ≈"), "{err}");
    assert!(text(&out.stdout).contains(",SECURE"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"channel": {"encodig_error": 0.01}}"#).unwrap();
    let out = wiesner(&["threshold", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("encodig_error"), "{}", text(&out.stderr));
}

#[test]
fn config_from_environment_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"mu": 2.0, "eta": 0.77, "output_format": "json"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wiesner"))
        .arg("threshold")
        .env("WIESNER_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let eps = v["epsilon_threshold"].as_f64().unwrap();
    assert!((eps - 0.010492876).abs() < 1e-6, "{eps}");
}

#[test]
fn help_lists_config_keys() {
    let out = wiesner(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = text(&out.stdout);
    for key in [
        "channel.encoding_error",
        "grid.mu_values",
        "horizon.lifetime_us",
        "verdict.k",
        "seed",
    ] {
        assert!(help.contains(key), "missing {key}");
    }
}

#[test]
fn secure_region_plot_data() {
    let out = wiesner(&[
        "plot-data",
        "--style",
        "secure_region",
        "--mu-values",
        "1",
        "--eta-values",
        "0.7,0.77",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = text(&out.stdout);
    let row = csv
        .lines()
        .skip(1)
        .find(|l| l.split(',').nth(1).map(|e| e.parse::<f64>().unwrap()) == Some(0.77))
        .unwrap();
    let eps: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((eps - 0.0242191).abs() < 1e-6, "{eps}");
}
