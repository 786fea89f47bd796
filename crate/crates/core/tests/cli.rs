use std::fs;
use std::process::{Command, Output};

fn ellipmoment(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ellipmoment")).args(args).output().expect("binary runs")
}

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn moment_spec_thm1_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let out = dir.path().join("out.json");
    fs::write(
        &spec,
        r#"{"operation": "x1sq_thm1",
            "distribution": {"family": "normal", "mu": [0, 0], "sigma": [[1, 0], [0, 1]]},
            "function": {"kind": "monomial", "exponents": [0, 2]},
            "budget": {"method": "quadrature", "nodes_per_dim": 10}}"#,
    )
    .unwrap();
    let o = ellipmoment(&["moment", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["method"], "thm1");
    assert_eq!(v["breakdown"].as_array().unwrap().len(), 4);
}

#[test]
fn moment_spec_product_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"operation": "product_moment",
            "distribution": {"family": "laplace", "mu": [0, 0], "sigma": [[1, 0], [0, 1]]},
            "exponents": [2, 0]}"#,
    )
    .unwrap();
    let o = ellipmoment(&["moment", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(v["stderr"].as_f64().unwrap(), 0.0);

    fs::write(
        &spec,
        r#"{"operation": "product_moment",
            "distribution": {"family": "t(p=5)", "mu": [0, 0], "sigma": [[1, 0], [0, 1]]},
            "exponents": [4, 2]}"#,
    )
    .unwrap();
    let o = ellipmoment(&["moment", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("moment"));

    fs::write(&spec, r#"{"operation": "x1sq_thm1", "distribution": {"family": "normal"}}"#).unwrap();
    assert_eq!(ellipmoment(&["moment", "--spec", spec.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(ellipmoment(&["moment", "--spec", "/nonexistent/spec.json"]).status.code(), Some(2));
}

#[test]
fn sample_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = ellipmoment(&["sample", "--family", "t(p=6)", "--dims", "3", "--seed", "7", "--samples", "500", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3");
    assert_eq!(lines.len(), 501);
    assert!(lines[1].split(',').all(|v| v.parse::<f64>().is_ok()));

    let spec = dir.path().join("dist.json");
    fs::write(&spec, r#"{"family": "logistic", "mu": [1, 2], "sigma": [[1, 1], [1, 1]]}"#).unwrap();
    let o = ellipmoment(&["sample", "--spec", spec.to_str().unwrap(), "--samples", "50"]);
    assert_eq!(o.status.code(), Some(0));
    // Rank-one Σ: every draw lies on x2 − x1 = 1.
    for line in String::from_utf8(o.stdout).unwrap().lines().skip(1) {
        let x: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!((x[1] - x[0] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn small_verify_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let path = dir.path().join(format!("r{threads}.json"));
        let o = Command::new(env!("CARGO_BIN_EXE_ellipmoment"))
            .args(["verify", "--seed", "5", "--samples", "20000", "--out", path.to_str().unwrap()])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        let report = json(&path);
        let expected = if report["pass"].as_bool().unwrap() { 0 } else { 1 };
        assert_eq!(o.status.code(), Some(expected));
        reports.push(fs::read(&path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let text = String::from_utf8(reports.pop().unwrap()).unwrap();
    assert!(text.contains("\"b_star_printed\""));
    assert!(text.contains("\"printed_matches_exact\""));
}
