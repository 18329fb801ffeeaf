//! The binary end to end: reports, exit codes, file formats, determinism.

use std::path::Path;
use std::process::{Command, Output};

use hermite_reach::io;
use hermite_reach_core::bergman::{bergman_norm, BergmanWeight, Domain, SquareDomain};
use hermite_reach_core::hermite::{mehler_k, mehler_series, KernelEval};
use hermite_reach_core::images::{phi_segment, ImagesConfig};
use hermite_reach_core::math::{c64, real, PI};
use hermite_reach_core::{ControlSignal, Expr, Sequential};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hermite-reach"))
        .args(args)
        .env_remove("HHE_THREADS")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn halfline_check_example() {
    let out = run(&["halfline-check", "--tau", "0.5", "--u0", "sin(3*t)"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["max_dev"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["n_points"], 50);
    assert_eq!(r["T"].as_f64().unwrap(), libm::tanh(1.0) / 2.0);
    assert_eq!(r["tolerance"].as_f64().unwrap(), 1e-8);
}

#[test]
fn missed_tolerance_exits_one_with_report() {
    let out = run(&[
        "halfline-check",
        "--tau",
        "0.5",
        "--u0",
        "sin(3*t)",
        "--tol",
        "1e-300",
        "--points",
        "3",
    ]);
    assert_eq!(code(&out), 1);
    assert_eq!(report(&out)["passed"], false);
}

#[test]
fn zero_target_reaches_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.csv");
    assert_eq!(
        code(&run(&["synthesize", "--target", "0", "--out", p(&c)])),
        0
    );
    let out = run(&["verify-reach", "--controls", p(&c), "--target", "0"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(r["sup_residual"].as_f64().unwrap() <= 1e-14);
    assert_eq!(r["core_interval"], serde_json::json!([-0.9, 0.9]));
    assert_eq!(r["grid"]["dx"].as_f64().unwrap(), 0.005);
}

#[test]
fn synthesize_then_verify_agrees_with_inline_verification() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c.csv");
    let s = run(&[
        "synthesize",
        "--target",
        "cos(z)",
        "--out",
        p(&c),
        "--verify",
    ]);
    assert_eq!(code(&s), 0);
    let v = run(&["verify-reach", "--controls", p(&c), "--target", "cos(z)"]);
    assert_eq!(code(&v), 0);
    // the file round trip is lossless, so both residuals are bit-identical
    assert_eq!(
        report(&s)["reach"]["sup_residual"],
        report(&v)["sup_residual"]
    );
    assert!(report(&v)["sup_residual"].as_f64().unwrap() <= 1e-2);
}

#[test]
fn bergman_norm_of_one_is_the_square_root_of_the_area() {
    let out = run(&["bergman-norm", "--domain", "DL", "--L", "1", "--f", "1"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!((r["norm"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(r["resolution"], 8);
    assert!(r["nodes"].as_u64().unwrap() > 0);
}

#[test]
fn sector_norm_of_a_rational_function() {
    // ∫_Δ |1+z|⁻⁸ dA, reference from an independent adaptive quadrature
    let out = run(&["bergman-norm", "--domain", "sector", "--f", "1/(1+z)^4"]);
    assert_eq!(code(&out), 0);
    let n = report(&out)["norm"].as_f64().unwrap();
    assert!((n - 0.208_296_323_507_551_3).abs() < 1e-10, "{n}");
}

#[test]
fn nonintegrable_sector_function_is_a_numeric_failure() {
    // |e^{−z²}|² ω does not decay along the sector edges
    let out = run(&[
        "bergman-norm",
        "--domain",
        "sector",
        "--weight",
        "halfline",
        "--tau",
        "0.5",
        "--f",
        "exp(-z^2)",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sampled_state_norm_matches_the_direct_norm() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("state.csv");
    let args = [
        "simulate", "--tau", "0.5", "--u0", "1 + t", "--upi", "cos(2*t)", "--domain", "D",
    ];
    let mut full = args.to_vec();
    full.extend(["--resolution", "3", "--out", p(&s)]);
    assert_eq!(code(&run(&full)), 0);
    let out = run(&[
        "bergman-norm",
        "--domain",
        "D",
        "--f",
        p(&s),
        "--resolution",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    let from_file = report(&out)["norm"].as_f64().unwrap();
    let (u0, upi) = (
        ControlSignal::from_expr(Expr::parse("1 + t").unwrap(), 0.5).unwrap(),
        ControlSignal::from_expr(Expr::parse("cos(2*t)").unwrap(), 0.5).unwrap(),
    );
    let cfg = ImagesConfig::default();
    let direct = bergman_norm(
        &Sequential,
        |z| phi_segment(&u0, &upi, 0.5, z, &cfg),
        &Domain::Square(SquareDomain::d()),
        &BergmanWeight::Unit,
        3,
    )
    .unwrap();
    assert_eq!(from_file, direct);
    // a file on a different resolution does not line up with the nodes
    assert_eq!(
        code(&run(&[
            "bergman-norm",
            "--domain",
            "D",
            "--f",
            p(&s),
            "--resolution",
            "4"
        ])),
        2
    );
}

#[test]
fn kernel_single_point_is_the_closed_form() {
    let out = run(&["kernel", "--t", "0.25"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,re_x,im_x,re_y,im_y,re_K,im_K");
    assert_eq!(lines.len(), 2);
    let k: f64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    let want = 1.0 / (2.0 * PI * libm::sinh(0.5)).sqrt();
    assert!((k - want).abs() < 1e-15 * want);
}

#[test]
fn kernel_grid_is_swap_symmetric_and_matches_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("k.csv");
    // 4·25·4·25 = 10⁴ rows
    let out = run(&[
        "kernel",
        "--t",
        "0.3:1:4",
        "--x",
        "-1.5:1.5:25",
        "--x-im",
        "0,0.5",
        "--y",
        "-1.5:1.5:25",
        "--y-im",
        "0,0.5",
        "--out",
        p(&f),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(report(&out)["rows"], 10_000);
    let rows = io::read_kernel(&f).unwrap();
    assert_eq!(rows.len(), 10_000);
    let key = |r: &[f64]| r[..5].iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let index: std::collections::HashMap<Vec<u64>, usize> =
        rows.iter().enumerate().map(|(i, r)| (key(r), i)).collect();
    for r in &rows {
        let swapped = [r[0], r[3], r[4], r[1], r[2]];
        let s = &rows[index[&key(&swapped)]];
        let (a, b) = (c64(r[5], r[6]), c64(s[5], s[6]));
        assert!((a - b).norm() <= 1e-14 * a.norm(), "{r:?}");
    }
    for r in rows.iter().step_by(97) {
        let (x, y) = (c64(r[1], r[2]), c64(r[3], r[4]));
        let k = c64(r[5], r[6]);
        let series = mehler_series(r[0], x, y, 120).unwrap();
        assert!((series - k).norm() <= 1e-10 * k.norm(), "{r:?}: {series}");
        // 17 significant digits reproduce the double exactly
        assert_eq!(k, mehler_k(KernelEval::new(r[0], x, y).unwrap()).unwrap());
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["kernel", "--t", "0:1"][..],
        &["kernel", "--t", "-1"],
        &["halfline-check", "--tau", "0.5"],
        &["bergman-norm", "--domain", "square", "--f", "1"],
        &["bergman-norm", "--domain", "D", "--f", "2z"],
        &["simulate", "--tau", "0.5", "--problem", "strip"],
        &[
            "simulate",
            "--tau",
            "0.5",
            "--problem",
            "symmetric",
            "--u0",
            "1",
            "--L",
            "1",
        ],
        &["oracle-compare", "--u0", "missing.csv"],
        &["no-such-command"],
    ] {
        let out = run(args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn config_file_keys_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"tau": 0.5, "u0": "sin(3*t)", "points": 4, "k_max": 5}"#,
    )
    .unwrap();
    let out = run(&["halfline-check", "--config", p(&cfg), "--points", "6"]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["n_points"], 6);
    assert_eq!(r["config"]["u0"], "sin(3*t)");
    assert_eq!(r["config"]["numerics"]["k_max"], 5);

    std::fs::write(&cfg, r#"{"tau": 0.5, "u0": "t", "colour": 1}"#).unwrap();
    assert_eq!(code(&run(&["halfline-check", "--config", p(&cfg)])), 2);
    // a known key that belongs to another command
    std::fs::write(&cfg, r#"{"tau": 0.5, "u0": "t", "target": "z"}"#).unwrap();
    assert_eq!(code(&run(&["halfline-check", "--config", p(&cfg)])), 2);
    std::fs::write(&cfg, r#"{"tau": "half"}"#).unwrap();
    assert_eq!(code(&run(&["halfline-check", "--config", p(&cfg)])), 2);
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    let mut reports = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let c = dir.path().join(format!("c{i}.csv"));
        let out = run(&[
            "synthesize",
            "--target",
            "exp(z/2)",
            "--out",
            p(&c),
            "--threads",
            threads,
        ]);
        assert_eq!(code(&out), 0);
        csvs.push(std::fs::read(&c).unwrap());
        let mut r = report(&out);
        r["config"]["numerics"]["threads"] = Value::Null;
        r["out"] = Value::Null;
        r["config"]["out"] = Value::Null;
        reports.push(serde_json::to_string(&r).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
    let a = run(&[
        "halfline-check",
        "--tau",
        "0.3",
        "--u0",
        "t^2",
        "--points",
        "5",
    ]);
    let b = run(&[
        "halfline-check",
        "--tau",
        "0.3",
        "--u0",
        "t^2",
        "--points",
        "5",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn timestamp_is_opt_in() {
    let args = [
        "bergman-norm",
        "--domain",
        "D",
        "--f",
        "z",
        "--resolution",
        "3",
    ];
    assert!(report(&run(&args)).get("timestamp").is_none());
    let mut with = args.to_vec();
    with.push("--timestamp");
    assert!(report(&run(&with))["timestamp"].is_u64());
}

#[test]
fn oracle_compare_reports_deviation_and_order() {
    let out = run(&[
        "oracle-compare",
        "--problem",
        "halfline0",
        "--tau",
        "0.3",
        "--u0",
        "sin(5*t)",
        "--order",
    ]);
    let r = report(&out);
    assert!(r["linf_dev"].as_f64().unwrap() <= 1e-3, "{r}");
    let order = r["order"]["order"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&order), "{r}");
    assert_eq!(code(&out), 0);
    for key in ["l2_dev", "dx", "dt", "tolerance"] {
        assert!(r[key].is_f64(), "{key}");
    }
}

#[test]
fn control_csv_inputs_are_read_with_their_interpolation() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("u.csv");
    std::fs::write(&f, "t,re_u,im_u\n0,0,0\n0.5,1,0\n").unwrap();
    let lin = io::control_arg(p(&f), 0.5, hermite_reach_core::Interpolation::Linear).unwrap();
    assert_eq!(lin.eval(0.25).unwrap(), real(0.5));
    let out = run(&[
        "simulate",
        "--problem",
        "halfline0",
        "--tau",
        "0.5",
        "--u0",
        p(&f),
        "--x",
        "1",
    ]);
    assert_eq!(code(&out), 0);
    let formula = run(&[
        "simulate",
        "--problem",
        "halfline0",
        "--tau",
        "0.5",
        "--u0",
        "2*t",
        "--x",
        "1",
    ]);
    let last = |o: &Output| {
        String::from_utf8(o.stdout.clone())
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_owned()
    };
    let (a, b): (Vec<f64>, Vec<f64>) = (
        last(&out).split(',').map(|s| s.parse().unwrap()).collect(),
        last(&formula)
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect(),
    );
    assert!((a[2] - b[2]).abs() < 1e-12, "{a:?} vs {b:?}");
    std::fs::write(&f, "time,u\n0,0\n").unwrap();
    assert_eq!(
        code(&run(&[
            "simulate",
            "--problem",
            "halfline0",
            "--tau",
            "0.5",
            "--u0",
            p(&f)
        ])),
        2
    );
}
