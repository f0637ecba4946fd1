use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use intermix_core::torus_map::{involution_r1, MapSpec};
use intermix_core::TorusPoint;
use intermix_lab::output::{FIT_SCHEMA, SUMMARY_SCHEMA};
use serde_json::Value;

const SMALL_TAIL: &[&str] = &[
    "--set",
    "tail.n_max=64",
    "--set",
    "tail.deep_n=64",
    "--set",
    "tail.fit_lo=8",
    "--set",
    "tail.fit_hi=60",
];

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intermix-lab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env_remove("INTERMIX_LAB_THREADS")
        .output()
        .unwrap()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn assert_valid(schema: &str, doc: &Value) {
    let v = jsonschema::validator_for(&serde_json::from_str(schema).unwrap()).unwrap();
    if let Err(e) = v.validate(doc) {
        panic!("schema violation: {e}");
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_schema_rejects_malformed_documents() {
    let v = jsonschema::validator_for(&serde_json::from_str(FIT_SCHEMA).unwrap()).unwrap();
    let good = serde_json::json!({"schema_version": 1, "slope": -3.0, "stderr": 0.1, "intercept": 0.0, "r2": 1.0, "range": [1.0, 2.0]});
    assert!(v.is_valid(&good));
    let bad = serde_json::json!({"schema_version": 1, "slope": "x", "stderr": 0.1, "intercept": 0.0, "r2": 1.0, "range": [1.0]});
    assert!(!v.is_valid(&bad));
    assert!(!v.is_valid(&serde_json::json!({"schema_version": 1})));
}

#[test]
fn misspelled_config_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.conf");
    fs::write(&cfg, "map.c = 24\ngat.delta = 0.1\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_intermix-lab"))
        .arg("--config")
        .arg(&cfg)
        .arg("verify")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gat.delta"));
}

#[test]
fn bad_values_and_arguments_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lab(dir.path(), &["--set", "map.c=-3", "verify"]).status.code(), Some(4));
    assert_eq!(lab(dir.path(), &["--set", "tail.n_max=lots", "tail"]).status.code(), Some(4));
    assert_eq!(lab(dir.path(), &["--frobnicate", "verify"]).status.code(), Some(4));
    assert_eq!(lab(dir.path(), &["--set", "gate.shape=curved", "passage"]).status.code(), Some(4));
}

#[test]
fn verify_passes_and_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        dir.path(),
        &["--set", "verify.samples=2e4", "--set", "verify.cone_samples=2000", "verify"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["identity"]["samples"], 20000);
    assert_eq!(report["drift"].as_array().unwrap().len(), 4);
    let summary = json(&dir.path().join("summary.json"));
    assert_valid(SUMMARY_SCHEMA, &summary);
    assert_eq!(summary["runs"]["verify"]["pass"], true);
}

#[test]
fn manifold_outputs_are_mirror_images() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(dir.path(), &["--set", "manifold.n_max=2000", "manifold", "--x0", "0.1,0.2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, stable) = csv(&dir.path().join("stable.csv"));
    let (_, unstable) = csv(&dir.path().join("unstable.csv"));
    assert_eq!(h, ["x", "y", "branch"]);
    assert!(stable
        .iter()
        .any(|r| r[0].parse::<f64>().unwrap() == 0.0 && r[1].parse::<f64>().unwrap() == 0.0));
    let spec = MapSpec::sine(24).unwrap();
    for (s, u) in stable.iter().zip(&unstable) {
        let p = TorusPoint::raw(s[0].parse().unwrap(), s[1].parse().unwrap());
        let q = TorusPoint::raw(u[0].parse().unwrap(), u[1].parse().unwrap());
        assert!(involution_r1(&spec, p).dist(q) <= 1e-12);
    }
    let shoot = json(&dir.path().join("shoot.json"));
    let results = shoot["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r["residual_b"].as_f64().unwrap().is_finite()));
}

#[test]
fn tail_reruns_are_byte_identical_and_fits_validate() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut args = SMALL_TAIL.to_vec();
    args.push("tail");
    lab(a.path(), &args);
    let mut wargs = vec!["--workers", "3"];
    wargs.extend_from_slice(&args);
    lab(b.path(), &wargs);
    for f in ["tail.csv", "tail_table.json", "tail_fit.json", "summary.json", "config.resolved"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_valid(FIT_SCHEMA, &json(&a.path().join("tail_fit.json")));
    assert_valid(FIT_SCHEMA, &json(&a.path().join("tail_cumulative_fit.json")));
    let (h, rows) = csv(&a.path().join("tail.csv"));
    assert_eq!(h, ["N", "measure", "error", "method", "tail", "tail_error"]);
    assert_eq!(rows[0][0], "2");
    assert_eq!(rows[0][3], "quadrature");
    assert!(rows
        .iter()
        .all(|r| r[1].split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

#[test]
fn tail_budget_exhaustion_is_flagged_partial() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_TAIL.to_vec();
    args.extend_from_slice(&["--set", "tail.cell_cap=1000", "tail"]);
    let out = lab(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&dir.path().join("summary.json"))["runs"]["tail"]["partial"], true);
    assert_eq!(json(&dir.path().join("tail_table.json"))["table"]["partial"], true);
}

#[test]
fn json_format_writes_row_objects() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--format", "json"];
    args.extend_from_slice(SMALL_TAIL);
    args.push("tail");
    lab(dir.path(), &args);
    let t = json(&dir.path().join("tail.json"));
    assert_eq!(t["schema_version"], 1);
    assert_eq!(t["rows"][0]["N"], 2);
    assert!(!dir.path().join("tail.csv").exists());
}

#[test]
fn corr_needs_a_tail_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(dir.path(), &["corr"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tail"));
}

#[test]
fn corr_writes_series_and_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = SMALL_TAIL.to_vec();
    args.push("tail");
    lab(dir.path(), &args);
    let small = ["--set", "corr.samples=2e4", "--set", "corr.fit_lo=5", "--set", "corr.fit_hi=50"];
    let mut args = small.to_vec();
    args.extend_from_slice(&["corr", "--lags", "0..10"]);
    let out = lab(dir.path(), &args);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, rows) = csv(&dir.path().join("correlation.csv"));
    assert_eq!(
        h,
        [
            "n",
            "value",
            "stderr",
            "samples",
            "mean_zero_value",
            "mean_zero_stderr",
            "predictor"
        ]
    );
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][6], "");
    let (ph, prows) = csv(&dir.path().join("predictor.csv"));
    assert_eq!(ph, ["n", "predictor", "error"]);
    assert_eq!(prows.len(), 63);
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["runs"]["tail"].is_object() && summary["runs"]["corr"].is_object());
    let lag0 = summary["runs"]["corr"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "corr.lag0_variance_sigmas")
        .unwrap()
        .clone();
    assert_eq!(lag0["pass"], true);

    let mut args = small.to_vec();
    args.extend_from_slice(&["corr", "--lags", "0,64"]);
    assert_eq!(lab(dir.path(), &args).status.code(), Some(4));
}

#[test]
fn cells_mirror_rows_are_r1_images() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(dir.path(), &["cells", "--k-min", "16", "--k-max", "32"]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let (h, rows) = csv(&dir.path().join("cells.csv"));
    assert_eq!(h, ["k", "v_extent", "h_extent", "area", "region", "status"]);
    assert_eq!(rows.len(), 6);
    let (_, poly) = csv(&dir.path().join("cells_polygons.csv"));
    let spec = MapSpec::sine(24).unwrap();
    for pair in poly.chunks(2) {
        assert_eq!((pair[0][2].as_str(), pair[1][2].as_str()), ("c", "c_prime"));
        let p = TorusPoint::raw(pair[0][5].parse().unwrap(), pair[0][6].parse().unwrap());
        let q = TorusPoint::raw(pair[1][5].parse().unwrap(), pair[1][6].parse().unwrap());
        assert_eq!(involution_r1(&spec, p), q);
    }
}

#[test]
fn passage_reports_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        dir.path(),
        &[
            "--set",
            "passage.strata=3",
            "--set",
            "passage.per_stratum=6",
            "--set",
            "passage.e_lo=1e-9",
            "--set",
            "passage.e_hi=1e-6",
            "--set",
            "passage.fit_lo=1e-9",
            "--set",
            "passage.fit_hi=1e-6",
            "passage",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "window shorter than eight decades must fail");
    let doc = json(&dir.path().join("passage_fit.json"));
    assert_eq!(doc["coverage"]["fat"].as_array().unwrap().len(), 3);
    let (h, _) = csv(&dir.path().join("passage.csv"));
    assert_eq!(h, ["x", "y", "N", "ell", "n", "E_ell", "region", "quadrant", "bridge"]);
    assert_eq!(doc["m_sweep"].as_object().unwrap().len(), 2);
}

#[test]
fn thread_count_comes_from_environment() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--set", "verify.samples=1e4", "--set", "verify.cone_samples=1000", "verify"];
    lab(a.path(), &args);
    let out = Command::new(env!("CARGO_BIN_EXE_intermix-lab"))
        .arg("--out")
        .arg(b.path())
        .args(args)
        .env("INTERMIX_LAB_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(a.path().join("verify.json")).unwrap(),
        fs::read(b.path().join("verify.json")).unwrap()
    );
}
