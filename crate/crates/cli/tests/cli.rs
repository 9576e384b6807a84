use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tsboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsboot"))
        .args(args)
        .env_remove("TSBOOT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_report_and_prints_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("report");
    let o = tsboot(&[
        "run",
        s(&example("hetero_two_period.json")),
        "--output-dir",
        s(&out),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("## ks"));
    for f in ["ks.csv", "ks.md", "moments.csv", "manifest.json", "pivots/wb_lse.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
}

#[test]
fn format_flag_restricts_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = tsboot(&[
        "run",
        s(&example("hetero_two_period.json")),
        "--output-dir",
        s(&out),
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("ks.csv").exists());
    assert!(!out.join("ks.md").exists());
}

#[test]
fn thread_count_never_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let files = ["ks.csv", "moments.csv", "manifest.json", "pivots/wb_lad.csv"];
    let mut snapshots = Vec::new();
    for env in ["1", "7"] {
        let o = Command::new(env!("CARGO_BIN_EXE_tsboot"))
            .args(["run", s(&example("ar1_bootstrap.json")), "--output-dir", s(&out)])
            .env("TSBOOT_THREADS", env)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let snap: Vec<String> = files
            .iter()
            .map(|f| std::fs::read_to_string(out.join(f)).unwrap())
            .collect();
        snapshots.push(snap);
        std::fs::remove_dir_all(&out).unwrap();
    }
    assert!(snapshots[0] == snapshots[1], "outputs differ between 1 and 7 workers");
}

#[test]
fn fresh_series_flag_is_echoed_in_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let o = tsboot(&[
        "run",
        s(&example("hetero_two_period.json")),
        "--output-dir",
        s(&out),
        "--fresh-series-per-replicate",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["fresh_series_per_replicate"], true);
}

#[test]
fn bad_thread_env_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_tsboot"))
        .args(["run", s(&example("hetero_two_period.json"))])
        .env("TSBOOT_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
    let line: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(line["error"]["kind"], "config");
}

#[test]
fn simulate_fit_and_ks_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    for (path, seed) in [(&a, "1"), (&b, "2")] {
        let o = tsboot(&["simulate", "ar1", "--theta", "0.6", "--n", "400", "--seed", seed, "--out", s(path)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert!(std::fs::read_to_string(&a).unwrap().starts_with("t,x\n"));

    let o = tsboot(&["fit", "lse", s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let theta = fit["estimate"][0].as_f64().unwrap();
    assert!((theta - 0.6).abs() < 0.15, "{theta}");

    let o = tsboot(&["ks", s(&a), s(&a)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ks: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(ks[0]["d_stat"], 0.0);
    assert_eq!(ks[0]["p_value"], 1.0);

    let o = tsboot(&["ks", s(&a), s(&b)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_and_fit_arch() {
    let tmp = tempfile::tempdir().unwrap();
    let x = tmp.path().join("x.csv");
    let o = tsboot(&[
        "simulate", "arch", "--c0", "1", "--b", "0.4", "--error", "t4", "--n", "300", "--seed", "3",
        "--out", s(&x),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = tsboot(&["fit", "lade2", s(&x), "--p", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fit: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(fit["estimate"].as_array().unwrap().len(), 2);
}

#[test]
fn wlse_needs_a_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let x = tmp.path().join("x.csv");
    assert!(tsboot(&["simulate", "hetero", "--n", "100", "--seed", "4", "--out", s(&x)]).status.success());
    let o = tsboot(&["fit", "wlse", s(&x)]);
    assert!(!o.status.success());
    let o = tsboot(&["fit", "wlse", s(&x), "--sigma1-sq", "1", "--sigma2-sq", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn errors_are_one_json_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "ar1_bootstrap_comparison", "model": {"theta": 0.5}, "n": 40,
            "B": 5, "mc_replicates": 5, "master_seed": 1, "output_dir": "x", "typo": 1}"#,
    )
    .unwrap();
    let o = tsboot(&["run", s(&cfg)]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    let line: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(line["error"]["kind"], "config");
    assert!(line["error"]["message"].as_str().unwrap().contains("typo"));

    let o = tsboot(&["fit", "lade9", s(&cfg)]);
    assert!(!o.status.success());
    let line: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert!(line["error"]["kind"].is_string());
}
