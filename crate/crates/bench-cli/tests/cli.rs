//! End-to-end runs of the harness: golden files, determinism, override
//! semantics and process exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use bench_cli::plan::parse_override;
use bench_cli::run::{compute_convergence, compute_sweep, run_sweep, SWEEP_HEADER, TRACE_HEADER};
use bench_cli::{parse_config, ExperimentPlan, Solver};

const GOLDEN_SWEEP: &str = include_str!("golden/sweep_pinned.csv");
const GOLDEN_TRACE: &str = include_str!("golden/trace_pinned.csv");

fn pinned(out: &Path) -> ExperimentPlan {
    let mut plan = parse_config("sweep.pmin_dbm = -30,-20\nrun.realizations = 1\nrun.seed = 7\n", &[]).unwrap();
    plan.out = out.to_path_buf();
    plan
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swipt-bench"))
}

#[test]
fn sweep_header_is_pinned() {
    assert_eq!(
        SWEEP_HEADER.join(","),
        "sweep_param,sweep_value,solver,mean_pt_watts,mean_pt_dbm,success_rate,mean_iterations,realizations"
    );
    assert_eq!(GOLDEN_SWEEP.lines().next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(GOLDEN_TRACE.lines().next().unwrap(), TRACE_HEADER.join(","));
}

#[test]
fn pinned_run_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&pinned(dir.path())).unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap(), GOLDEN_SWEEP);
    assert_eq!(fs::read_to_string(dir.path().join("trace_-30_0.csv")).unwrap(), GOLDEN_TRACE);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let plan = |out: &Path| {
        let mut p = parse_config("run.realizations = 6\nsweep.pmin_dbm = -30,-25\n", &[]).unwrap();
        p.out = out.to_path_buf();
        p
    };
    run_sweep(&plan(a.path())).unwrap();
    run_sweep(&plan(b.path())).unwrap();
    for name in ["sweep.csv", "detail.csv", "trace_-25_5.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn inserting_a_sweep_value_leaves_other_rows_alone() {
    let base = parse_config("run.realizations = 3\nsweep.pmin_dbm = -30,-20\n", &[]).unwrap();
    let wider = parse_config("run.realizations = 3\nsweep.pmin_dbm = -30,-25,-20\n", &[]).unwrap();
    let a = compute_sweep(&base);
    let b = compute_sweep(&wider);
    let pick = |r: &bench_cli::run::SweepResult, v: f64| r.rows.iter().filter(|x| x.sweep_value == v).cloned().collect::<Vec<_>>();
    assert_eq!(pick(&a, -30.0), pick(&b, -30.0));
    assert_eq!(pick(&a, -20.0), pick(&b, -20.0));
}

#[test]
fn realizations_use_the_seed_ladder() {
    let plan = parse_config("run.realizations = 4\nrun.seed = 40\nsweep.pmin_dbm = -30\n", &[]).unwrap();
    let res = compute_sweep(&plan);
    let seeds: Vec<u64> = res.details[0].1.iter().filter(|r| r.solver == Solver::Tdma).map(|r| r.seed).collect();
    assert_eq!(seeds, vec![40, 41, 42, 43]);
}

#[test]
fn sweep_rows_are_consistent_with_details() {
    let plan = parse_config("run.realizations = 5\nsweep.pmin_dbm = -25\n", &[]).unwrap();
    let res = compute_sweep(&plan);
    for row in &res.rows {
        assert!((0.0..=1.0).contains(&row.success_rate));
        let ok: Vec<f64> = res.details[0]
            .1
            .iter()
            .filter(|r| r.solver == row.solver && r.success)
            .map(|r| r.total_power)
            .collect();
        assert_eq!(row.realizations, 5);
        assert_eq!(row.success_rate, ok.len() as f64 / 5.0);
        let mean = ok.iter().sum::<f64>() / ok.len() as f64;
        assert!((row.mean_power - mean).abs() <= 1e-15 * mean);
    }
}

#[test]
fn file_and_flags_give_the_same_plan() {
    let text = "system.k = 6\nsystem.c = 3\nqos.rmin_bits_hz = 0.2\nsweep.pmin_dbm = -28,-12\nrun.seed = 5\n";
    let from_file = parse_config(text, &[]).unwrap();
    let flags: Vec<(String, String)> = text
        .lines()
        .map(|l| parse_override(&l.replace(' ', "")).unwrap())
        .collect();
    assert_eq!(parse_config("", &flags).unwrap(), from_file);
}

#[test]
fn convergence_trace_ends_at_reported_power() {
    let plan = parse_config("", &[]).unwrap();
    let reps = compute_convergence(&plan).unwrap();
    assert_eq!(reps.len(), 2);
    for (_, rep) in &reps {
        assert!(rep.converged && rep.iterations <= 20);
        let last = rep.trace.last().unwrap().total_power;
        assert!((last - rep.total_power()).abs() <= 1e-12 * last);
    }
    assert!(reps[1].1.total_power() >= reps[0].1.total_power());
}

#[test]
fn binary_writes_outputs_and_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.cfg");
    fs::write(&cfg, "sweep.pmin_dbm = -30\nrun.realizations = 2\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--solvers", "tdma", "--set", "run.seed=3"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 2);
    assert!(sweep.lines().nth(1).unwrap().starts_with("pmin_dbm,-30,tdma,"));

    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["sweep", "--set", "no.such.key=1"]), Some(1));
    assert_eq!(code(&["sweep", "--set", "system.k=11"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["sweep", "--config", "/nonexistent/plan.cfg"]), Some(2));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let status = bin()
        .args(["converge", "--out"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}

#[test]
fn certify_exit_codes() {
    let ok = bin()
        .args(["certify", "--realizations", "1", "--set", "sweep.pmin_dbm=-20"])
        .output()
        .unwrap()
        .status;
    assert_eq!(ok.code(), Some(0));
    // A grid this coarse cannot come within 0.1% of the optimum.
    let strict = bin()
        .args(["certify", "--realizations", "1", "--set", "sweep.pmin_dbm=-20"])
        .args(["--set", "oracle.points=4", "--set", "oracle.refinement=0", "--set", "oracle.slack=0.001"])
        .output()
        .unwrap()
        .status;
    assert_eq!(strict.code(), Some(3));
}
