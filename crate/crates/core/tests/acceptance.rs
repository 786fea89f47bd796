//! Acceptance criteria, one line each. Runs without the test harness so the
//! lines show up under plain `cargo test`; exits non-zero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use ellipmoment::error::Result;
use ellipmoment::verify::{self, Run, VerifyConfig};

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn summarize(runs: &[Run]) -> (bool, String) {
    let failed: Vec<&Run> = runs.iter().filter(|r| !r.pass).collect();
    let mut detail = format!("{}/{} checks", runs.len() - failed.len(), runs.len());
    if let Some(r) = failed.first() {
        detail.push_str(&format!(
            "; first failure: {} ({}, n={}) got {:e}, expected {:e} within {:e}",
            r.check, r.family, r.n, r.got, r.expected, r.tolerance
        ));
    }
    (failed.is_empty() && !runs.is_empty(), detail)
}

fn timed(
    id: u32,
    title: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Result<Vec<Run>>,
) -> Outcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(runs) => summarize(&runs),
        Err(e) => (false, format!("error: {e}")),
    };
    detail.push_str(&format!(", {:.2} s", elapsed.as_secs_f64()));
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!(" (limit {} s)", limit.as_secs()));
        }
    }
    Outcome { id, title, pass, detail }
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_ellipmoment");
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let status = Command::new(bin)
            .args(["verify", "--seed", "42", "--out"])
            .arg(&path)
            .env("RAYON_NUM_THREADS", threads)
            .status()
            .expect("binary runs");
        (status.code(), std::fs::read(&path).unwrap_or_default())
    };
    let (code_a, a) = run("a.json", "1");
    let (code_b, b) = run("b.json", "3");
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap_or(serde_json::Value::Null);
    let reported = report["pass"].as_bool();
    let identical = !a.is_empty() && a == b;
    let code_matches = match reported {
        Some(true) => code_a == Some(0) && code_b == Some(0),
        Some(false) => code_a == Some(1) && code_b == Some(1),
        None => false,
    };
    let bad_args = Command::new(bin).args(["verify", "--samples", "lots"]).output().expect("binary runs");
    let usage = bad_args.status.code() == Some(2);
    Outcome {
        id: 10,
        title: "CLI determinism",
        pass: identical && code_matches && usage,
        detail: format!(
            "byte-identical across 1 and 3 workers: {identical}; exit {code_a:?} for report pass = {reported:?}; bad argument exit {:?}",
            bad_args.status.code()
        ),
    }
}

fn main() {
    let cfg = VerifyConfig::default();
    let outcomes = vec![
        timed(1, "constants cross-check", Some(Duration::from_secs(5)), verify::criterion_1),
        timed(2, "published-value reproduction", None, verify::criterion_2),
        timed(3, "covariance scale from draws", Some(Duration::from_secs(60)), || verify::criterion_3(cfg)),
        timed(4, "Student-t constant adjudication", None, || {
            let table = verify::student_t_table()?;
            let mut runs = verify::criterion_4()?;
            // The report must carry both printed simplifications next to the values.
            let shown = table.iter().all(|r| r.b_star_printed.is_finite() && r.b_dstar_printed.is_finite());
            runs.iter_mut().for_each(|r| r.pass &= shown);
            Ok(runs)
        }),
        timed(5, "first identity vs direct MC", Some(Duration::from_secs(600)), || verify::criterion_5(cfg)),
        timed(6, "first and second identity coincide", None, || verify::criterion_6(cfg)),
        timed(7, "Gaussian recursion vs pair partitions", Some(Duration::from_secs(30)), || verify::criterion_7(cfg)),
        timed(8, "radial sampler KS", None, || verify::criterion_8(cfg)),
        timed(9, "constant-f collapse", None, || verify::criterion_9(cfg)),
        cli_determinism(),
    ];
    let mut all = true;
    for o in &outcomes {
        all &= o.pass;
        println!("criterion {:>2} [{}] {}: {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.title, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
