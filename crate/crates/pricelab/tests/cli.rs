//! End-to-end checks of the command-line interface: subcommand wiring, exit
//! codes, and the files a run leaves behind.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pricelab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricelab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_recipe(dir: &Path, body: &str) -> String {
    let path = dir.join("recipe.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

const CONSTANT_RECIPE: &str = r#"{
    "n_products": 6, "n_outlets": 2, "n_months": 8,
    "churn": 0.0, "relaunch": 0.0, "volatility": 0.0,
    "elasticity": 0.0, "seed": 5
}"#;

#[test]
fn synth_then_run_produces_unit_series() {
    let dir = TempDir::new().unwrap();
    let recipe = write_recipe(dir.path(), CONSTANT_RECIPE);

    let out = pricelab(&["synth", "--recipe", &recipe, "--out", "panel.csv"], dir.path());
    assert!(out.status.success(), "synth failed: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("panel.csv").exists());

    let out = pricelab(
        &["run", "panel.csv", "--index", "geks", "--out", "run", "--aggregate", "subgroup"],
        dir.path(),
    );
    assert!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));

    let series = fs::read_to_string(dir.path().join("run/series.csv")).unwrap();
    let mut rows = series.lines();
    assert_eq!(rows.next(), Some("month,value,method,cell"));
    let mut total_rows = 0;
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[1], "1", "non-unit value in {row}");
        assert_eq!(fields[2], "geks");
        total_rows += 1;
    }
    // Three subgroups plus the aggregate, eight months each.
    assert_eq!(total_rows, 4 * 8);

    let manifest = fs::read_to_string(dir.path().join("run/manifest.json")).unwrap();
    assert!(manifest.contains("\"rejected\": 0"));
    assert!(manifest.contains("\"filter_removed\": 0"));
}

#[test]
fn usage_error_exits_one() {
    let dir = TempDir::new().unwrap();
    // Splicing a chained bilateral formula is an invalid combination; it must
    // fail before the (absent) input file is read.
    let out = pricelab(
        &["run", "absent.csv", "--index", "jevons", "--chained", "--splice", "movement"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let out = pricelab(&["run"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    let out = pricelab(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = pricelab(&["run", "absent.csv", "--index", "jevons"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn broken_chain_exits_three() {
    let dir = TempDir::new().unwrap();
    // No product is observed in both months, so the first chain link has an
    // empty matched set.
    fs::write(
        dir.path().join("panel.csv"),
        "outlet_id,month,ean,provider_id,description,quantity,turnover\n\
         S01,2021-01,11111111,,Maslo extra 200G,5,10.00\n\
         S01,2021-02,22222222,,Kawa ziarnista 500G,5,20.00\n",
    )
    .unwrap();
    let out = pricelab(&["run", "panel.csv", "--index", "jevons", "--chained"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2021-01"), "error names the months: {stderr}");
}

#[test]
fn match_table_round_trips_through_run() {
    let dir = TempDir::new().unwrap();
    let recipe = write_recipe(dir.path(), CONSTANT_RECIPE);
    pricelab(&["synth", "--recipe", &recipe, "--out", "panel.csv"], dir.path());

    let out = pricelab(&["match", "panel.csv", "--out", "matches.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("6 products"), "{stdout}");

    let out = pricelab(
        &[
            "run",
            "panel.csv",
            "--match-table",
            "matches.csv",
            "--index",
            "fisher",
            "--chained",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let series = fs::read_to_string(dir.path().join("run/series.csv")).unwrap();
    assert!(series.contains("chained-fisher"));
}

#[test]
fn bench_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let recipe = write_recipe(dir.path(), CONSTANT_RECIPE);
    pricelab(&["synth", "--recipe", &recipe, "--out", "panel.csv"], dir.path());

    let out = pricelab(&["bench", "panel.csv", "--reps", "1", "--out", "bench"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(dir.path().join("bench/benchmark.json")).unwrap();
    assert!(report.contains("chain-jevons"));
    assert!(report.contains("geks/chain-fisher"));
}

#[test]
fn json_emit_and_splice_flags() {
    let dir = TempDir::new().unwrap();
    let recipe = write_recipe(
        dir.path(),
        r#"{"n_products": 8, "n_outlets": 1, "n_months": 15,
            "churn": 0.0, "relaunch": 0.0, "volatility": 0.02,
            "elasticity": -1.0, "seed": 3}"#,
    );
    pricelab(&["synth", "--recipe", &recipe, "--out", "panel.csv"], dir.path());

    let out = pricelab(
        &[
            "run",
            "panel.csv",
            "--index",
            "ccdi",
            "--splice",
            "mean",
            "--window",
            "13",
            "--emit",
            "json",
            "--out",
            "run",
            "--filter",
            "lowsale:1.25",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("run/series.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let entries = parsed.as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["series"]["meta"]["splice"], "mean");
    assert_eq!(entries[0]["series"]["points"].as_array().unwrap().len(), 15);
}
