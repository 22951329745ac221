use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use grlpn_cli::{Cli, CliCommand, EXIT_OK, EXIT_SOLVER, EXIT_USAGE};
use grlpn_core::{fixtures, EpsilonMode, SolverConfig};
use serde_json::Value;

fn grlpn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grlpn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_separable(dir: &Path) -> PathBuf {
    let path = dir.join("sep.txt");
    std::fs::write(&path, fixtures::separable_2d(60, 1).to_libsvm()).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn flag_defaults_match_published_settings() {
    let cli = Cli::try_parse_from(["grlpn", "solve", "--data", "x"]).unwrap();
    let CliCommand::Solve(a) = cli.command else {
        panic!("expected solve")
    };
    let s = &a.solver;
    assert_eq!(s.c_lb, 1e-4);
    assert_eq!(s.c_ub, 1e4);
    assert_eq!(s.wbar_lb, 1e-6);
    assert_eq!(s.wbar_ub, 1.5);
    assert_eq!(s.tau0, 0.1);
    assert_eq!(s.tau_min, 1e-8);
    assert_eq!(s.sigma2, 0.1);
    assert_eq!(s.eps, 1e-2);
    assert_eq!(s.vio_stop, 1e-3);
    assert_eq!(a.data.folds, 3);

    // the flags and the library defaults agree
    let cfg = s.to_config(0).unwrap();
    let lib = SolverConfig::default();
    assert_eq!(cfg.tau0, lib.tau0);
    assert_eq!(cfg.tau_min, lib.tau_min);
    assert_eq!(cfg.sigma1, lib.sigma1);
    assert_eq!(cfg.sigma2, lib.sigma2);
    assert_eq!(cfg.theta, lib.theta);
    assert_eq!(cfg.eps_inner, lib.eps_inner);
    assert_eq!(cfg.eps_mode, EpsilonMode::Constant);
    assert_eq!(cfg.vio_stop, lib.vio_stop);
    assert_eq!((cfg.c_lb, cfg.c_ub), (lib.c_lb, lib.c_ub));
    assert_eq!((cfg.wbar_lb, cfg.wbar_ub), (lib.wbar_lb, lib.wbar_ub));
    assert_eq!(cfg.max_outer, lib.max_outer);
    assert_eq!(cfg.max_inner, lib.max_inner);

    let cli = Cli::try_parse_from(["grlpn", "inlp", "--data", "x"]).unwrap();
    let CliCommand::Inlp(a) = cli.command else {
        panic!("expected inlp")
    };
    assert_eq!(a.tau, 1e-4);
}

#[test]
fn solve_writes_all_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let out = tmp.path().join("out");
    let o = grlpn(&[
        "solve",
        "--data",
        data.to_str().unwrap(),
        "--folds",
        "3",
        "--cv-size",
        "36",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
        "--trace",
    ]);
    assert_eq!(
        o.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "report.json",
        "trace.csv",
        "features.svg",
        "table.md",
        "inner_trace.csv",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let r = report(&out);
    assert_eq!(r["method"], "GRLPN");
    for key in ["C", "vio", "E_t", "E_C"] {
        assert!(r[key].is_number(), "field {key} missing");
    }
    assert!(r["vio"].as_f64().unwrap() < 1e-3);
    let svg = std::fs::read_to_string(out.join("features.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn same_seed_gives_identical_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = grlpn(&[
            "solve",
            "--data",
            data.to_str().unwrap(),
            "--cv-size",
            "36",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(EXIT_OK));
        let mut v = report(&out);
        v.as_object_mut().unwrap().remove("wall_time_secs");
        serde_json::to_string(&v).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn inlp_report_is_single_round() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let out = tmp.path().join("out");
    let o = grlpn(&[
        "inlp",
        "--tau",
        "1e-4",
        "--data",
        data.to_str().unwrap(),
        "--cv-size",
        "36",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let r = report(&out);
    assert_eq!(r["method"], "InLP");
    assert_eq!(r["outer_trace"].as_array().unwrap().len(), 1);
    assert_eq!(r["outer_trace"][0]["tau"].as_f64(), Some(1e-4));
}

#[test]
fn dump_then_check_mfcq() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let dump = tmp.path().join("problem.txt");
    let lp = tmp.path().join("first.lp");
    let o = grlpn(&[
        "dump-problem",
        "--data",
        data.to_str().unwrap(),
        "--cv-size",
        "36",
        "--out",
        dump.to_str().unwrap(),
        "--dump-lp",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(std::fs::read_to_string(&lp)
        .unwrap()
        .starts_with("Minimize"));

    let out = tmp.path().join("out");
    let o = grlpn(&[
        "solve",
        "--data",
        data.to_str().unwrap(),
        "--cv-size",
        "36",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let o = grlpn(&[
        "check-mfcq",
        "--problem",
        dump.to_str().unwrap(),
        "--point",
        out.join("report.json").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["full_row_rank"].is_boolean());
    assert!(r["positive_definite"].is_boolean());
    assert_eq!(r["strict_interior"].as_array().unwrap().len(), 3);
}

#[test]
fn grid_reports_gs_row() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let out = tmp.path().join("out");
    let o = grlpn(&[
        "grid",
        "--data",
        data.to_str().unwrap(),
        "--cv-size",
        "36",
        "--jobs",
        "2",
        "--c-grid",
        "0.1,1,10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&out);
    assert_eq!(r["cells"].as_u64(), Some(27));
    assert_eq!(r["E_C"].as_f64(), Some(0.0));
    assert!(std::fs::read_to_string(out.join("table.md"))
        .unwrap()
        .contains("| GS |"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_separable(tmp.path());
    let d = data.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["bogus"],
        vec!["solve"],
        vec!["solve", "--data", "/definitely/not/here"],
        vec!["solve", "--data", d, "--folds", "1"],
        vec!["solve", "--data", d, "--cv-size", "35"],
        vec!["solve", "--data", d, "--tau0", "-1"],
        vec!["solve", "--data", d, "--sigma2", "abc"],
        vec!["solve", "--data", d, "--lp-backend", "magic"],
        vec!["inlp", "--data", d, "--tau", "0"],
        vec!["grid", "--data", d, "--jobs", "0"],
        vec!["grid", "--data", d, "--budget", "5"],
    ];
    for args in cases {
        let o = grlpn(&args);
        assert_eq!(o.status.code(), Some(EXIT_USAGE), "args {args:?}");
    }
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, "+1 1:0.5\nnot a record\n").unwrap();
    assert_eq!(
        grlpn(&["solve", "--data", bad.to_str().unwrap()])
            .status
            .code(),
        Some(EXIT_USAGE)
    );
    assert_eq!(grlpn(&["--help"]).status.code(), Some(EXIT_OK));
}

#[test]
fn solver_failure_exits_two() {
    // every training fold holds a single class
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("one.txt");
    let text: String = (0..12)
        .map(|i| format!("+1 1:{}\n", 0.1 * i as f64 + 0.1))
        .collect();
    std::fs::write(&path, text).unwrap();
    let o = grlpn(&["solve", "--data", path.to_str().unwrap(), "--cv-size", "12"]);
    assert_eq!(o.status.code(), Some(EXIT_SOLVER));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate fold"));
}
