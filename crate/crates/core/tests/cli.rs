use std::fs;
use std::path::{Path, PathBuf};

use fvgmrf::cli::{run, AssembleSummary, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERIC, EXIT_OK};
use fvgmrf::grid::GridSpec;
use fvgmrf::io::{coordinate_triples, field_from_csv};
use serde_json::Value;
use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fvgmrf(args: &[&str]) -> Output {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let mut argv = vec!["fvgmrf"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut stdout, &mut stderr);
    Output { code, stdout: String::from_utf8(stdout).unwrap(), stderr: String::from_utf8(stderr).unwrap() }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONSTANT_8: &str = r#"{
  "grid": {"A": 8, "B": 8, "M": 8, "N": 8},
  "kappa_sq": 1,
  "anisotropy": {"gamma": 1.5, "field": {"type": "constant", "v": [0.8, 0.6]}},
  "observation": {"type": "exact", "data_path": "u.csv"},
  "layout": {"type": "constant"}
}"#;

#[test]
fn assemble_small_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", r#"{"grid": {"A": 3, "B": 3, "M": 3, "N": 3}, "anisotropy": {"gamma": 1}}"#);
    let out_path = dir.path().join("q.txt");
    let out = fvgmrf(&["assemble", "--config", s(&cfg), "--out", s(&out_path)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let summary: AssembleSummary = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(summary.n, 9);
    assert!(summary.min_diagonal > 0.0);
    let triples = coordinate_triples(&fs::read_to_string(out_path).unwrap()).unwrap();
    assert_eq!(triples.len(), summary.nnz);
    assert!(triples.iter().all(|&(r, c, _)| r < 9 && c < 9));
}

#[test]
fn assemble_reports_stencil_bound_on_large_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"grid": {"A": 20, "B": 20, "M": 200, "N": 200}, "kappa_sq": 1, "anisotropy": {"gamma": 1}}"#,
    );
    let out = fvgmrf(&["assemble", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let summary: AssembleSummary = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(summary.n, 40_000);
    assert!(summary.max_row_nnz <= 25);
}

#[test]
fn malformed_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let broken = write(dir.path(), "broken.json", r#"{"grid": {"A": 3, "B": 3, "M": 3"#);
    let out = fvgmrf(&["assemble", "--config", s(&broken)]);
    assert_eq!(out.code, EXIT_CONFIG);

    let wrong_type = write(
        dir.path(),
        "wrong.json",
        r#"{"grid": {"A": 3, "B": 3, "M": "three", "N": 3}, "anisotropy": {"gamma": 1}}"#,
    );
    let out = fvgmrf(&["variance", "--config", s(&wrong_type)]);
    assert_eq!(out.code, EXIT_CONFIG);
    assert!(out.stderr.contains("grid.M"), "{}", out.stderr);

    let missing = dir.path().join("absent.json");
    assert_eq!(fvgmrf(&["assemble", "--config", s(&missing)]).code, EXIT_CONFIG);
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = TempDir::new().unwrap();
    for text in [
        r#"{"grid": {"A": 3, "B": 3, "M": 3, "N": 3}, "anisotropy": {"gamma": -1}}"#,
        r#"{"grid": {"A": 3, "B": 3, "M": 3, "N": 3}, "kappa_sq": 0, "anisotropy": {"gamma": 1}}"#,
        r#"{"grid": {"A": 3, "B": 3, "M": 2, "N": 3}, "anisotropy": {"gamma": 1}}"#,
    ] {
        let cfg = write(dir.path(), "m.json", text);
        assert_eq!(fvgmrf(&["assemble", "--config", s(&cfg)]).code, EXIT_CONFIG, "{text}");
    }
}

#[test]
fn argument_errors_and_help() {
    assert_eq!(fvgmrf(&["frobnicate"]).code, EXIT_CONFIG);
    assert_eq!(fvgmrf(&["variance"]).code, EXIT_CONFIG);
    let help = fvgmrf(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    for cmd in ["assemble", "sample", "variance", "correlation", "fit", "study", "field-eval"] {
        assert!(help.stdout.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn sampling_is_seeded() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", CONSTANT_8);
    let grid = GridSpec::square(8.0, 8).unwrap();
    let a = fvgmrf(&["sample", "--config", s(&cfg), "--seed", "5", "--count", "2"]);
    let b = fvgmrf(&["sample", "--config", s(&cfg), "--seed", "5", "--count", "2"]);
    let c = fvgmrf(&["sample", "--config", s(&cfg), "--seed", "6", "--count", "2"]);
    assert_eq!(a.code, EXIT_OK, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let blocks: Vec<&str> = a.stdout.split("\n\n").collect();
    assert_eq!(blocks.len(), 2);
    let first = field_from_csv(&grid, blocks[0]).unwrap();
    let second = field_from_csv(&grid, blocks[1]).unwrap();
    assert_ne!(first, second);

    let none = fvgmrf(&["sample", "--config", s(&cfg), "--count", "0"]);
    assert_eq!(none.code, EXIT_OK);
    assert!(none.stdout.is_empty());
}

#[test]
fn variance_and_correlation_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", CONSTANT_8);
    let grid = GridSpec::square(8.0, 8).unwrap();

    let var = fvgmrf(&["variance", "--config", s(&cfg)]);
    assert_eq!(var.code, EXIT_OK, "{}", var.stderr);
    let var = field_from_csv(&grid, &var.stdout).unwrap();
    assert!(var.iter().all(|v| (v - var[0]).abs() <= 1e-10 * var[0]));

    let out_path = dir.path().join("corr.csv");
    let corr = fvgmrf(&["correlation", "--config", s(&cfg), "--ref", "2,5", "--out", s(&out_path)]);
    assert_eq!(corr.code, EXIT_OK, "{}", corr.stderr);
    assert!(corr.stdout.is_empty());
    let corr = field_from_csv(&grid, &fs::read_to_string(out_path).unwrap()).unwrap();
    assert!((corr[5 * 8 + 2] - 1.0).abs() < 1e-12);
    assert!(corr.iter().all(|c| (-1.0 - 1e-12..=1.0 + 1e-12).contains(c)));

    assert_eq!(fvgmrf(&["correlation", "--config", s(&cfg), "--ref", "8,0"]).code, EXIT_CONFIG);
    assert_eq!(fvgmrf(&["correlation", "--config", s(&cfg), "--ref", "x"]).code, EXIT_CONFIG);
}

#[test]
fn field_eval_lists_every_cell() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", CONSTANT_8);
    let out = fvgmrf(&["field-eval", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_OK);
    let lines: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(lines[0], "i,j,x,y,v1,v2,h11,h12,h22");
    assert_eq!(lines.len(), 65);
    let first: Vec<f64> = lines[1].split(',').skip(2).map(|t| t.parse().unwrap()).collect();
    assert_eq!(&first[..2], &[0.5, 0.5]);
    // H = 1.5 I + v v^T
    assert!((first[4] - (1.5 + 0.64)).abs() < 1e-12);
    assert!((first[5] - 0.48).abs() < 1e-12);
    assert!((first[6] - (1.5 + 0.36)).abs() < 1e-12);
}

#[test]
fn fit_from_sampled_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", CONSTANT_8);
    let sample = fvgmrf(&["sample", "--config", s(&cfg), "--seed", "1", "--out", s(&dir.path().join("u.csv"))]);
    assert_eq!(sample.code, EXIT_OK, "{}", sample.stderr);

    let out = fvgmrf(&["fit", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let fit: Value = serde_json::from_str(&out.stdout).unwrap();
    let keys: Vec<&str> = fit.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys.len(), 5);
    for key in ["theta", "std_devs", "log_post", "converged", "evals"] {
        assert!(fit.get(key).is_some(), "{key}");
    }
    assert_eq!(fit["converged"], Value::Bool(true));
    assert_eq!(fit["theta"].as_array().unwrap().len(), 3);

    let start = write(dir.path(), "start.json", "[1.0, 0.1, 0.1]");
    let short = fvgmrf(&["fit", "--config", s(&cfg), "--start", s(&start), "--max-evals", "3"]);
    assert_eq!(short.code, EXIT_NOT_CONVERGED);
    let fit: Value = serde_json::from_str(&short.stdout).unwrap();
    assert_eq!(fit["converged"], Value::Bool(false));

    let bad_start = write(dir.path(), "bad.json", "[1.0, 0.1]");
    assert_eq!(fvgmrf(&["fit", "--config", s(&cfg), "--start", s(&bad_start)]).code, EXIT_CONFIG);
}

#[test]
fn fit_without_data_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "m.json", CONSTANT_8);
    let out = fvgmrf(&["fit", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_CONFIG);
    assert!(out.stderr.contains("u.csv"), "{}", out.stderr);

    fs::write(dir.path().join("u.csv"), "1,2,3\n").unwrap();
    assert_eq!(fvgmrf(&["fit", "--config", s(&cfg)]).code, EXIT_CONFIG);
}

#[test]
fn overflowing_coefficients_are_a_numeric_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"grid": {"A": 4, "B": 4, "M": 4, "N": 4}, "anisotropy": {"gamma": 1, "field": {"type": "constant", "v": [1e200, 0]}}}"#,
    );
    let out = fvgmrf(&["variance", "--config", s(&cfg)]);
    assert_eq!(out.code, EXIT_NUMERIC, "{}", out.stderr);
}

#[test]
fn study_with_noisy_observations() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{
  "grid": {"A": 6, "B": 6, "M": 6, "N": 6},
  "anisotropy": {"gamma": 1.0, "field": {"type": "constant", "v": [0.5, 0.5]}},
  "observation": {"type": "noisy", "noise_precision": 100},
  "layout": {"type": "constant"}
}"#,
    );
    let out = fvgmrf(&["--threads", "1", "study", "--config", s(&cfg), "--seed", "3", "--count", "3"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let study: Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(study["datasets"], 3);
    assert_eq!(study["names"], serde_json::json!(["gamma", "v1", "v2"]));
    let converged = 3 - study["failures"].as_u64().unwrap() as usize;
    assert_eq!(study["estimates"].as_array().unwrap().len(), converged);
}
