use std::path::Path;

use tsboot::bootstrap::read_pivot_csv;
use tsboot::harness::{
    emit_report, fmt_sig6, run_experiment, ExperimentConfig, ExperimentReport, ReportFormat,
};
use tsboot::stats::ks_two_sample;
use tsboot::Error;

fn example(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name);
    ExperimentConfig::from_path(path).unwrap()
}

fn emit(report: &ExperimentReport, dir: &Path) {
    emit_report(report, dir, &[ReportFormat::Csv, ReportFormat::Markdown]).unwrap();
}

#[test]
fn ks_rows_recompute_from_persisted_pivots() {
    for name in ["hetero_two_period.json", "ar1_bootstrap.json", "arch_bootstrap.json"] {
        let tmp = tempfile::tempdir().unwrap();
        let report = run_experiment(&example(name), 2).unwrap();
        emit(&report, tmp.path());
        let ks = std::fs::read_to_string(tmp.path().join("ks.csv")).unwrap();
        let mut lines = ks.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let col = |c: &str| header.iter().position(|h| *h == c).unwrap();
        let mut rows = 0;
        for line in lines {
            let cells: Vec<&str> = line.split(',').collect();
            let load = |stem: &str| {
                read_pivot_csv(tmp.path().join("pivots").join(format!("{stem}.csv")))
                    .unwrap()
                    .into_iter()
                    .find(|(p, _)| p == cells[col("param")])
                    .unwrap()
                    .1
            };
            let r = ks_two_sample(&load(cells[col("sample_a")]), &load(cells[col("sample_b")])).unwrap();
            assert_eq!(fmt_sig6(r.d_stat), cells[col("d_stat")], "{name}: {line}");
            assert_eq!(fmt_sig6(r.p_value), cells[col("p_value")], "{name}: {line}");
            rows += 1;
        }
        assert!(rows > 0, "{name} has no KS rows");
    }
}

#[test]
fn hetero_report_has_rb_and_wb_rows() {
    let report = run_experiment(&example("hetero_two_period.json"), 0).unwrap();
    let ks = report.table("ks").unwrap();
    let m = ks.column_index("method").unwrap();
    let methods: Vec<&str> = ks.rows.iter().filter_map(|r| r[m].as_text()).collect();
    assert_eq!(methods, ["rb", "wb"]);
    assert!(report.table("limits").is_some());
}

#[test]
fn arch_comparison_table_has_twelve_rows() {
    let report = run_experiment(&example("arch_estimators.json"), 0).unwrap();
    let t = report.table("average_error").unwrap();
    assert_eq!(t.rows.len(), 12);
    let (d, e, v) = (
        t.column_index("distribution").unwrap(),
        t.column_index("estimator").unwrap(),
        t.column_index("average_error").unwrap(),
    );
    let ml_normal = t
        .rows
        .iter()
        .find(|r| r[d].as_text() == Some("normal") && r[e].as_text() == Some("gaussian_nll"))
        .and_then(|r| r[v].as_num())
        .unwrap();
    // Within a factor of two of 2.548.
    assert!((2.548 / 2.0..2.548 * 2.0).contains(&ml_normal), "{ml_normal}");
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
}

#[test]
fn single_draw_config_warns_but_reports() {
    let config = ExperimentConfig::from_json(
        r#"{
            "experiment": "ar1_bootstrap_comparison",
            "model": { "theta": 0.5 },
            "n": 40, "B": 1, "mc_replicates": 1,
            "master_seed": 5, "output_dir": "unused"
        }"#,
    )
    .unwrap();
    let report = run_experiment(&config, 1).unwrap();
    assert!(report.warnings.iter().any(|w| w.contains("single-draw")));
    assert!(report.pivots.iter().all(|(_, p)| p.len() == 1));
    let tmp = tempfile::tempdir().unwrap();
    emit(&report, tmp.path());
    let manifest = std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("single-draw"));
}

#[test]
fn manifest_echoes_seed_and_markdown_matches_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_experiment(&example("limit_laws.json"), 0).unwrap();
    emit(&report, tmp.path());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 3);
    assert_eq!(manifest["config"]["master_seed"], 3);
    assert!(manifest["exclusions"].is_array());
    for table in &report.tables {
        let csv = std::fs::read_to_string(tmp.path().join(format!("{}.csv", table.name))).unwrap();
        let md = std::fs::read_to_string(tmp.path().join(format!("{}.md", table.name))).unwrap();
        // Markdown carries a header and a separator line.
        assert_eq!(md.lines().count(), csv.lines().count() + 1, "{}", table.name);
        assert_eq!(csv.lines().count(), table.rows.len() + 1);
    }
}

#[test]
fn limit_law_ratios_are_near_one() {
    let report = run_experiment(&example("limit_laws.json"), 0).unwrap();
    let t = report.table("limit_law").unwrap();
    let r = t.column_index("ratio").unwrap();
    for row in &t.rows {
        let ratio = row[r].as_num().unwrap();
        assert!((0.8..1.2).contains(&ratio), "{row:?}");
    }
}

#[test]
fn config_errors_are_typed() {
    let unknown = ExperimentConfig::from_json(
        r#"{"experiment": "ar1_bootstrap_comparison", "model": {"theta": 0.5}, "n": 40, "B": 5,
            "mc_replicates": 5, "master_seed": 1, "output_dir": "x", "seeed": 2}"#,
    );
    assert!(matches!(unknown, Err(Error::Config(_))));
    let bad_name = ExperimentConfig::from_json(
        r#"{"experiment": "garch_fit", "model": {}, "n": 40, "B": 5,
            "mc_replicates": 5, "master_seed": 1, "output_dir": "x"}"#,
    );
    assert!(matches!(bad_name, Err(Error::Config(_))));
}

#[test]
fn unwritable_output_dir_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let report = run_experiment(&example("hetero_two_period.json"), 0).unwrap();
    let err = emit_report(&report, blocker.join("out"), &[ReportFormat::Csv]).unwrap_err();
    assert_eq!(err.kind(), "io");
}
