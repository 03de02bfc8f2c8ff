use std::path::Path;
use std::process::{Command, Output};

fn cbe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbe"))
        .args(args)
        .env_remove("CBE_THREADS")
        .output()
        .expect("spawn cbe")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn exact_matches_closed_form_at_z2() {
    let o = cbe(&["exact", "--N", "10", "--beta", "2", "--x", "0,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let at0: f64 = rows[0][1].parse().unwrap();
    let at2: f64 = rows[1][1].parse().unwrap();
    assert!(at0.abs() < 1e-12);
    assert!((at2 - 11f64.ln()).abs() < 1e-10, "{at2}");
}

#[test]
fn exact_json_output() {
    let o = cbe(&["exact", "--N", "3", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn bad_beta_exits_2() {
    let o = cbe(&["exact", "--N", "10", "--beta", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cbe(&["exact", "--N", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_env_exits_2() {
    let o = Command::new(env!("CARGO_BIN_EXE_cbe"))
        .args(["exact", "--N", "4"])
        .env("CBE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_is_io_error() {
    let o = cbe(&["exact", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"N": 5, "beta": 4, "x": [1.0]}"#).unwrap();
    let o = cbe(&["exact", "--config", cfg.to_str().unwrap(), "--N", "10", "--beta", "2", "--x", "2"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let v: f64 = rows[0][1].parse().unwrap();
    assert!((v - 11f64.ln()).abs() < 1e-10);

    std::fs::write(&cfg, r#"{"N": 5, "betta": 4}"#).unwrap();
    let o = cbe(&["exact", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_true_moderate_row_at_large_n() {
    let o = cbe(&["estimate", "--N", "1000000", "--beta", "2", "--x", "500"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&stdout(&o));
    let tm = rows.iter().find(|r| r[2] == "TrueModerate").expect("TrueModerate row");
    assert_eq!(tm[1], "TrueModerate");
    // far below f64 range, so compare on the log scale
    let lp: f64 = tm[4].parse().unwrap();
    let scheme: f64 = rows.iter().find(|r| r[2] == "SchemeExact").unwrap()[4].parse().unwrap();
    assert!((lp - scheme).abs() < 1.0, "{lp} {scheme}");
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap().is_finite()));
}

#[test]
fn estimate_out_of_range_gives_zero() {
    let o = cbe(&["estimate", "--N", "8", "--x", "6"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "OutOfRange");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn estimate_lists_several_methods_in_band() {
    let o = cbe(&["estimate", "--N", "50", "--x", "10"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let methods: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert!(methods.contains(&"CLT"));
    assert!(methods.contains(&"SchemeExact"));
    assert!(methods.contains(&"LargeUpperBound"));
}

#[test]
fn rate_curve_default_grid_and_point() {
    let o = cbe(&["rate-curve", "--beta", "2"]);
    assert!(o.status.success());
    assert_eq!(csv_rows(&stdout(&o)).len(), 69);

    let o = cbe(&["rate-curve", "--beta", "2", "--x", "0.666"]);
    let rows = csv_rows(&stdout(&o));
    let rate: f64 = rows[0][2].parse().unwrap();
    let hko: f64 = rows[0][3].parse().unwrap();
    assert!((rate - hko).abs() < 1e-6 * hko, "{rate} {hko}");
}

fn sample_to(path: &Path) -> Output {
    cbe(&[
        "sample", "--N", "6", "--beta", "2", "--samples", "400", "--burn", "100", "--chains", "2",
        "--seed", "11", "--out", path.to_str().unwrap(),
    ])
}

#[test]
fn sample_is_deterministic_and_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(sample_to(&a).status.success());
    assert!(sample_to(&b).status.success());
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(csv_rows(std::str::from_utf8(&ta).unwrap()).len(), 400);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.summary.json")).unwrap()).unwrap();
    for k in ["mean", "variance", "acceptance_rate", "effective_size", "kolmogorov_statistic", "ill_tuned"] {
        assert!(summary.get(k).is_some(), "missing {k}");
    }
}

#[test]
fn sample_requires_out() {
    let o = cbe(&["sample", "--N", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_quick_passes_and_fault_fails() {
    let o = cbe(&["validate", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("SKIP [09]"));

    let o = cbe(&["validate", "--quick", "--inject-fault", "comparison-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

fn summary_of(args: &[&str]) -> serde_json::Value {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let mut all = vec!["sample"];
    all.extend_from_slice(args);
    all.extend_from_slice(&["--out", out.to_str().unwrap()]);
    let o = cbe(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.csv.summary.json")).unwrap()).unwrap()
}

#[test]
fn sample_single_eigenvalue_has_mean_zero() {
    let s = summary_of(&["--N", "1", "--beta", "2", "--samples", "20000", "--seed", "5"]);
    let (m, se) = (s["mean"].as_f64().unwrap(), s["mean_std_error"].as_f64().unwrap());
    assert!(m.abs() < 4.0 * se, "{m} {se}");
}

#[test]
fn sample_tilted_variance_matches_exact() {
    let s = summary_of(&[
        "--N", "16", "--beta", "2", "--delta", "8", "--samples", "20000", "--burn", "2000", "--thin", "5", "--seed", "2",
    ]);
    let (v, exact) = (s["variance"].as_f64().unwrap(), s["exact_variance"].as_f64().unwrap());
    assert!((v / exact - 1.0).abs() < 0.1, "{v} {exact}");
}

#[test]
fn grid_output_does_not_depend_on_threads() {
    let run = |t: &str| {
        Command::new(env!("CARGO_BIN_EXE_cbe"))
            .args(["estimate", "--N", "400", "--x-grid", "0.5:20:0.5"])
            .env("CBE_THREADS", t)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}
