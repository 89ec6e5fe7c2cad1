use std::process::{Command, Output};

use serde_json::Value;

const FINITE: &str = r#"{"kind":"list","members":[1,2,3,50,51,400],"horizon":1000}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densitylab"))
        .args(args)
        .env_remove("DENSITYLAB_MAX_HORIZON")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn squares_lower_mn_is_exactly_one() {
    let out = run(&["density", "--set", "squares", "--kind", "lower-mn", "--mn", "power:2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["command"], "density");
    assert_eq!(v["report"]["value"], "1");
    assert_eq!(v["report"]["exact"], true);
}

#[test]
fn empty_set_has_zero_upper_banach_density() {
    let out = run(&["density", "--set", "empty", "--kind", "upper-banach"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["report"]["value"], "0");
}

#[test]
fn kexp_has_no_witness() {
    let out = run(&["witness", "--set-rule", "kexp", "--mn", "expo:e"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().find(|l| l.starts_with("none; lower-mn-density bracket")).expect("summary line");
    let inner = line.split('[').nth(1).unwrap().trim_end_matches(']');
    let bounds: Vec<f64> = inner.split(", ").map(|x| x.parse().unwrap()).collect();
    assert!(bounds[0] >= 0.85 && bounds[1] <= 1.0, "{line}");
}

#[test]
fn malformed_set_json_exits_one() {
    let out = run(&["density", "--set", "{\"kind\":", "--kind", "upper"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed set JSON"));
}

#[test]
fn horizon_cap_from_environment_exits_one() {
    let out = Command::new(env!("CARGO_BIN_EXE_densitylab"))
        .args(["density", "--set", FINITE, "--kind", "upper", "--nmax", "100000"])
        .env("DENSITYLAB_MAX_HORIZON", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn strict_fails_on_undetermined_verdicts() {
    let loose = run(&["family-check", "--set", FINITE, "--mn", "power:2"]);
    assert_eq!(loose.status.code(), Some(0));
    let strict = run(&["family-check", "--set", FINITE, "--mn", "power:2", "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn csv_profile_has_expected_columns() {
    let out = run(&["density", "--set", FINITE, "--kind", "upper", "--nmax", "200", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,s,n,numerator,denominator"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert_eq!(cols[0], "upper");
        let (num, den): (u64, u64) = (cols[3].parse().unwrap(), cols[4].parse().unwrap());
        assert!(num <= den);
    }
}

#[test]
fn csv_is_refused_where_unsupported() {
    let out = run(&["chain-check", "--set", FINITE, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn generate_writes_intervals_as_csv() {
    let out = run(&["generate", "--set", "evens", "--nmax", "10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows, ["lo,hi", "2,2", "4,4", "6,6", "8,8", "10,10"]);
}

#[test]
fn json_output_is_reproducible() {
    let args = ["profile", "--set", FINITE, "--kind", "upper,lower-banach", "--nmax", "500", "--smax", "20"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&["chain-check", "--set", "evens", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "chain-check");
    assert_eq!(v["report"]["ok"], true);
}

#[test]
fn set_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.json");
    std::fs::write(&path, FINITE).unwrap();
    let inline = run(&["density", "--set", FINITE, "--kind", "upper"]);
    let file = run(&["density", "--set", path.to_str().unwrap(), "--kind", "upper"]);
    assert_eq!(file.status.code(), Some(0));
    assert_eq!(json(&inline)["report"], json(&file)["report"]);
}

#[test]
fn reference_values_suite_passes() {
    for name in ["reference-values", "paper-values"] {
        let out = run(&["suite", name]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(json(&out)["report"]["passed"], true);
    }
}
