use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use jackflow::statcheck::ks_two_sample;

fn jackflow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jackflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("JACKFLOW_WORKERS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

/// (path, level, index, value) rows of a snapshots.csv.
fn snapshot_rows(text: &str) -> Vec<(usize, usize, usize, f64)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
                f[4].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn verify_identities_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = jackflow(&["verify", "identities"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.starts_with("criterion"))
            .count(),
        4
    );
    assert!(stdout.contains("suite identities: passed"));
}

#[test]
fn verify_writes_reports_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = jackflow(&["verify", "rates", "--out", "r"], dir.path());
    assert_eq!(code(&o), 0);
    let reports: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("r"), "reports.json")).unwrap();
    assert_eq!(reports[0]["id"], 5);
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("r"), "manifest.json")).unwrap();
    assert_eq!(manifest["reports"][0]["pass"], true);
}

#[test]
fn bad_arguments_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify", "everything"][..],
        &["chain", "single", "--theta", "0"],
        &["chain", "single", "--theta", "1", "--beta", "3"],
        &["chain", "sideways"],
        &["sample", "hermite", "--time", "0"],
        &["sde", "multilevel", "--theta", "0.9"],
        &["jack", "eval"],
        &["jack", "eval", "--lambda", "1,2"],
    ] {
        let o = jackflow(args, dir.path());
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "n = 3\nwidth = 2\n").unwrap();
    let o = jackflow(&["chain", "single", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    fs::write(dir.path().join("typed.toml"), "paths = 2.5\n").unwrap();
    let o = jackflow(&["chain", "single", "--config", "typed.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("paths"));
}

#[test]
fn single_chain_matches_golden_log() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "chain", "single", "--n", "3", "--theta", "1", "--time", "5", "--paths", "100", "--seed",
        "7", "--out", "g",
    ];
    let o = jackflow(&args, dir.path());
    assert_eq!(code(&o), 0);
    let out = dir.path().join("g");
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    assert_eq!(
        read(&out, "events.csv"),
        read(&golden, "chain_single_events.csv")
    );
    assert_eq!(
        read(&out, "snapshots.csv"),
        read(&golden, "chain_single_snapshots.csv")
    );
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["paths"], 100);
    let events = read(&out, "events.csv");
    let paths: std::collections::BTreeSet<&str> = events
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(paths.len(), 100);
}

#[test]
fn manifest_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = jackflow(
        &[
            "sde",
            "multilevel",
            "--n",
            "3",
            "--theta",
            "2.5",
            "--time",
            "0.2",
            "--paths",
            "4",
            "--seed",
            "11",
            "--snapshots",
            "0.05,0.1",
            "--out",
            "a",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("a"), "manifest.json")).unwrap();
    // rebuild a config file from the echo alone, writing elsewhere
    let mut cfg = manifest["config"].as_object().unwrap().clone();
    cfg.insert("out".into(), "b".into());
    cfg.remove("beta");
    cfg.retain(|_, v| !v.is_null());
    let table: toml::Table = serde_json::from_value(serde_json::Value::Object(cfg)).unwrap();
    fs::write(
        dir.path().join("echo.toml"),
        toml::to_string(&table).unwrap(),
    )
    .unwrap();
    let o = jackflow(&["sde", "multilevel", "--config", "echo.toml"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["snapshots.csv", "events.csv"] {
        assert_eq!(
            read(&dir.path().join("a"), f),
            read(&dir.path().join("b"), f)
        );
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "sde", "dyson", "--n", "3", "--theta", "1.3", "--time", "0.3", "--paths", "3", "--seed",
        "5",
    ];
    let c = [&common[..], &["--out", "c"]].concat();
    let j = [&common[..], &["--out", "j", "--format", "json"]].concat();
    assert_eq!(code(&jackflow(&c, dir.path())), 0);
    assert_eq!(code(&jackflow(&j, dir.path())), 0);
    let csv_values: Vec<f64> = snapshot_rows(&read(&dir.path().join("c"), "snapshots.csv"))
        .iter()
        .map(|r| r.3)
        .collect();
    let json: Vec<serde_json::Value> =
        serde_json::from_str(&read(&dir.path().join("j"), "snapshots.json")).unwrap();
    let json_values: Vec<f64> = json.iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert_eq!(csv_values.len(), 9);
    assert_eq!(csv_values, json_values);
}

#[test]
fn corners_top_level_agrees_with_hermite_samples() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--n", "2", "--theta", "1", "--time", "1", "--paths", "1000"];
    let c = [
        &["sample", "corners"][..],
        &common,
        &["--seed", "1", "--out", "c"],
    ]
    .concat();
    let h = [
        &["sample", "hermite"][..],
        &common,
        &["--seed", "2", "--out", "h"],
    ]
    .concat();
    assert_eq!(code(&jackflow(&c, dir.path())), 0);
    assert_eq!(code(&jackflow(&h, dir.path())), 0);
    let corners = snapshot_rows(&read(&dir.path().join("c"), "snapshots.csv"));
    let hermite = snapshot_rows(&read(&dir.path().join("h"), "snapshots.csv"));
    assert_eq!(corners.len(), 3000);
    for i in 1..=2 {
        let pick = |rows: &[(usize, usize, usize, f64)]| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.1 == 2 && r.2 == i)
                .map(|r| r.3)
                .collect()
        };
        let (d, p) = ks_two_sample(&pick(&corners), &pick(&hermite)).unwrap();
        assert!(p > 0.01 / 2.0, "coordinate {i}: D={d} p={p}");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for (w, name) in [("1", "w1"), ("3", "w3")] {
        let o = Command::new(env!("CARGO_BIN_EXE_jackflow"))
            .args([
                "chain", "multi", "--n", "3", "--time", "4", "--paths", "20", "--out", name,
            ])
            .current_dir(dir.path())
            .env("JACKFLOW_WORKERS", w)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        let manifest: serde_json::Value =
            serde_json::from_str(&read(&dir.path().join(name), "manifest.json")).unwrap();
        assert_eq!(manifest["workers"].to_string(), w);
        outs.push(read(&dir.path().join(name), "events.csv"));
    }
    assert_eq!(outs[0], outs[1]);
    let o = Command::new(env!("CARGO_BIN_EXE_jackflow"))
        .args(["chain", "single"])
        .current_dir(dir.path())
        .env("JACKFLOW_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn rescaled_chain_snapshots_interlace() {
    let dir = tempfile::tempdir().unwrap();
    let o = jackflow(
        &[
            "chain",
            "multi",
            "--n",
            "3",
            "--theta",
            "0.7",
            "--epsilon",
            "0.01",
            "--time",
            "1",
            "--paths",
            "5",
            "--snapshots",
            "0.5",
            "--out",
            "m",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let out = dir.path().join("m");
    assert!(!out.join("events.csv").exists());
    let rows = snapshot_rows(&read(&out, "snapshots.csv"));
    // 5 paths × 2 times × 6 coordinates
    assert_eq!(rows.len(), 60);
    for chunk in rows.chunks(6) {
        let v: Vec<f64> = chunk.iter().map(|r| r.3).collect();
        // y¹ ∈ [y²₁, y²₂], y² interlaces y³
        assert!(v[1] <= v[0] && v[0] <= v[2]);
        assert!(v[3] <= v[1] && v[1] <= v[4] && v[4] <= v[2] && v[2] <= v[5]);
    }
}

#[test]
fn jack_eval_prints_rates_summing_to_n_theta() {
    let dir = tempfile::tempdir().unwrap();
    let o = jackflow(
        &[
            "jack", "eval", "--lambda", "3,1", "--n", "3", "--theta", "2",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    let total: f64 = stdout
        .lines()
        .filter(|l| l.starts_with("rate row"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 6.0).abs() < 1e-12, "{stdout}");
}
