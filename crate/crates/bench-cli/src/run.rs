//! Sweep, convergence and certification runs with their CSV outputs.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use swipt::metrics::{check_feasible, Tolerances};
use swipt::oracle::{certify, system_grid_search};
use swipt::sca::{sca_solve, solve_per_group, Outcome, ScaSettings, SolveReport, TraceRecord};
use swipt::sysmodel::build_instance;
use swipt::tdma::tdma_solve;
use swipt::units::{dbm_to_watts, watts_to_dbm};
use swipt::SystemConfig;

use crate::error::BenchError;
use crate::plan::{ExperimentPlan, Solver, SweepParam};

pub const SWEEP_HEADER: [&str; 8] = [
    "sweep_param",
    "sweep_value",
    "solver",
    "mean_pt_watts",
    "mean_pt_dbm",
    "success_rate",
    "mean_iterations",
    "realizations",
];

pub const DETAIL_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "realization",
    "seed",
    "solver",
    "success",
    "pt_watts",
    "pt_dbm",
    "iterations",
    "outcome",
];

pub const TRACE_HEADER: [&str; 6] = ["iteration", "pt_watts", "qp_status", "step", "rate_violation", "harvest_violation"];

pub const CONVERGE_HEADER: [&str; 8] =
    ["pmin_dbm", "iteration", "pt_watts", "pt_dbm", "qp_status", "step", "rate_violation", "harvest_violation"];

pub const CERTIFY_HEADER: [&str; 10] = [
    "sweep_param",
    "sweep_value",
    "realization",
    "group",
    "sca_pt_watts",
    "oracle_pt_watts",
    "relative_gap",
    "sca_feasible",
    "oracle_feasible",
    "passed",
];

/// Fixed-width scientific notation used for every computed float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.10e}")
}

/// One solver run on one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub realization: usize,
    pub seed: u64,
    pub solver: Solver,
    pub success: bool,
    pub total_power: f64,
    pub iterations: usize,
    pub outcome: String,
    /// Initial power and per-iteration records, sca-noma only.
    pub trace: Option<(f64, Vec<TraceRecord>)>,
}

/// Aggregate over realizations at one sweep value. Means are taken over
/// successful realizations only.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub solver: Solver,
    pub mean_power: f64,
    pub success_rate: f64,
    pub mean_iterations: f64,
    pub realizations: usize,
}

impl SweepRow {
    pub fn mean_power_dbm(&self) -> f64 {
        watts_to_dbm(self.mean_power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Per sweep value, all records ordered by realization then solver.
    pub details: Vec<(f64, Vec<RunRecord>)>,
}

fn outcome_label(o: &Outcome) -> String {
    match o {
        Outcome::Converged => "converged".into(),
        Outcome::NotConverged => "not_converged".into(),
        Outcome::InitializationFailed(_) => "initialization_failed".into(),
        Outcome::SubproblemFailed(s) => format!("subproblem_{s}"),
    }
}

fn sca_record(realization: usize, seed: u64, report: SolveReport) -> RunRecord {
    let label = if report.converged && !report.feasibility.feasible {
        "infeasible".to_string()
    } else {
        outcome_label(&report.outcome)
    };
    let initial = report.objective_trace.first().copied().unwrap_or(0.0);
    RunRecord {
        realization,
        seed,
        solver: Solver::ScaNoma,
        success: report.success(),
        total_power: report.total_power(),
        iterations: report.iterations,
        outcome: label,
        trace: Some((initial, report.trace)),
    }
}

fn failed(realization: usize, seed: u64, solver: Solver, why: &str) -> RunRecord {
    RunRecord {
        realization,
        seed,
        solver,
        success: false,
        total_power: f64::NAN,
        iterations: 0,
        outcome: why.into(),
        trace: None,
    }
}

/// Runs every requested solver on realization `r` at one configuration.
pub fn run_realization(plan: &ExperimentPlan, cfg: &SystemConfig, r: usize) -> Vec<RunRecord> {
    let seed = plan.seed.wrapping_add(r as u64);
    let instance = match build_instance(cfg, seed) {
        Ok(i) => i,
        Err(e) => {
            log::warn!("realization {r}: {e}");
            return plan.solvers.iter().map(|&s| failed(r, seed, s, "instance_error")).collect();
        }
    };
    let tol = Tolerances::default();
    plan.solvers
        .iter()
        .map(|&solver| match solver {
            Solver::ScaNoma => {
                let settings = ScaSettings { seed, ..plan.sca.clone() };
                sca_record(r, seed, solve_per_group(&instance, cfg, &settings))
            }
            Solver::Tdma => match tdma_solve(&instance, cfg) {
                Ok(sol) => {
                    let singles = instance.as_singletons(cfg.user_slot());
                    let ok = check_feasible(&singles, &sol.vars(), cfg, &tol).feasible;
                    RunRecord {
                        realization: r,
                        seed,
                        solver,
                        success: ok,
                        total_power: sol.total_power,
                        iterations: 0,
                        outcome: if ok { "closed_form" } else { "infeasible" }.into(),
                        trace: None,
                    }
                }
                Err(_) => failed(r, seed, solver, "infeasible"),
            },
            Solver::Oracle => match system_grid_search(&instance, cfg, &plan.grid) {
                Ok(res) => match (res.total, res.vars) {
                    (Some(total), Some(vars)) => {
                        let ok = check_feasible(&instance, &vars, cfg, &tol).feasible;
                        RunRecord {
                            realization: r,
                            seed,
                            solver,
                            success: ok,
                            total_power: total,
                            iterations: 0,
                            outcome: if ok { "grid" } else { "infeasible" }.into(),
                            trace: None,
                        }
                    }
                    _ => failed(r, seed, solver, "infeasible_at_resolution"),
                },
                Err(_) => failed(r, seed, solver, "grid_error"),
            },
        })
        .collect()
}

fn aggregate(value: f64, solver: Solver, records: &[RunRecord]) -> SweepRow {
    let mine: Vec<&RunRecord> = records.iter().filter(|r| r.solver == solver).collect();
    let ok: Vec<&&RunRecord> = mine.iter().filter(|r| r.success).collect();
    let n = ok.len() as f64;
    let (mean_power, mean_iterations) = if ok.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            ok.iter().map(|r| r.total_power).sum::<f64>() / n,
            ok.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        )
    };
    SweepRow {
        sweep_value: value,
        solver,
        mean_power,
        success_rate: n / mine.len() as f64,
        mean_iterations,
        realizations: mine.len(),
    }
}

/// Computes the sweep without touching the file system.
pub fn compute_sweep(plan: &ExperimentPlan) -> SweepResult {
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &value in plan.sweep_values() {
        let cfg = plan.config_at(value);
        log::info!("{} = {value}: {} realizations", plan.sweep_param.name(), plan.realizations);
        let records: Vec<RunRecord> = (0..plan.realizations)
            .into_par_iter()
            .map(|r| run_realization(plan, &cfg, r))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        for &solver in &plan.solvers {
            rows.push(aggregate(value, solver, &records));
        }
        details.push((value, records));
    }
    SweepResult { param: plan.sweep_param, rows, details }
}

fn create_dir(dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|source| BenchError::Io { path: dir.into(), source })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, BenchError> {
    csv::Writer::from_path(path).map_err(|source| BenchError::Csv { path: path.into(), source })
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), BenchError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| BenchError::Csv { path: path.into(), source };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| BenchError::Io { path: path.into(), source })
}

fn trace_rows(initial: f64, trace: &[TraceRecord]) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        "0".to_string(),
        fmt_f64(initial),
        "initial".to_string(),
        fmt_f64(0.0),
        fmt_f64(0.0),
        fmt_f64(0.0),
    ]];
    rows.extend(trace.iter().map(|t| {
        vec![
            t.iteration.to_string(),
            fmt_f64(t.total_power),
            t.qp_status.to_string(),
            fmt_f64(t.step),
            fmt_f64(t.rate_violation),
            fmt_f64(t.harvest_violation),
        ]
    }));
    rows
}

/// Name of the per-realization trace file.
pub fn trace_file_name(value: f64, realization: usize) -> String {
    format!("trace_{value}_{realization}.csv")
}

/// Writes `sweep.csv`, `detail.csv` and one trace file per sca-noma run.
pub fn write_sweep(result: &SweepResult, out: &Path) -> Result<(), BenchError> {
    create_dir(out)?;
    let param = result.param.name();
    write_rows(
        &out.join("sweep.csv"),
        &SWEEP_HEADER,
        result.rows.iter().map(|r| {
            vec![
                param.to_string(),
                r.sweep_value.to_string(),
                r.solver.to_string(),
                fmt_f64(r.mean_power),
                fmt_f64(r.mean_power_dbm()),
                fmt_f64(r.success_rate),
                fmt_f64(r.mean_iterations),
                r.realizations.to_string(),
            ]
        }),
    )?;
    write_rows(
        &out.join("detail.csv"),
        &DETAIL_HEADER,
        result.details.iter().flat_map(|(value, records)| {
            records.iter().map(move |r| {
                vec![
                    param.to_string(),
                    value.to_string(),
                    r.realization.to_string(),
                    r.seed.to_string(),
                    r.solver.to_string(),
                    r.success.to_string(),
                    fmt_f64(r.total_power),
                    fmt_f64(watts_to_dbm(r.total_power)),
                    r.iterations.to_string(),
                    r.outcome.clone(),
                ]
            })
        }),
    )?;
    for (value, records) in &result.details {
        for r in records {
            if let Some((initial, trace)) = &r.trace {
                write_rows(&out.join(trace_file_name(*value, r.realization)), &TRACE_HEADER, trace_rows(*initial, trace))?;
            }
        }
    }
    Ok(())
}

/// Full sweep: compute, then write under `plan.out`.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepResult, BenchError> {
    let result = compute_sweep(plan);
    write_sweep(&result, &plan.out)?;
    Ok(result)
}

/// Joint SCA on the realization with the base seed, once per P^min in
/// `converge.pmin_dbm`, at R^min = `converge.rmin_bits_hz`.
pub fn compute_convergence(plan: &ExperimentPlan) -> Result<Vec<(f64, SolveReport)>, BenchError> {
    let mut out = Vec::new();
    for &p in &plan.converge_pmin_dbm {
        let cfg = SystemConfig {
            min_rate: plan.converge_rmin,
            min_harvest: dbm_to_watts(p),
            seed: plan.seed,
            ..plan.base.clone()
        };
        let instance = build_instance(&cfg, plan.seed)?;
        let report = sca_solve(&instance, &cfg, &ScaSettings { seed: plan.seed, ..plan.sca.clone() });
        out.push((p, report));
    }
    Ok(out)
}

/// Writes `converge.csv` under `plan.out`.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<Vec<(f64, SolveReport)>, BenchError> {
    let reports = compute_convergence(plan)?;
    create_dir(&plan.out)?;
    let rows = reports.iter().flat_map(|(p, rep)| {
        let initial = rep.objective_trace.first().copied().unwrap_or(0.0);
        trace_rows(initial, &rep.trace).into_iter().map(move |mut row| {
            row.insert(0, p.to_string());
            row.insert(3, fmt_f64(watts_to_dbm(row[2].parse().unwrap_or(f64::NAN))));
            row
        })
    });
    write_rows(&plan.out.join("converge.csv"), &CONVERGE_HEADER, rows.collect::<Vec<_>>())?;
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyRow {
    pub sweep_value: f64,
    pub realization: usize,
    pub group: usize,
    pub sca_power: f64,
    pub oracle_power: Option<f64>,
    pub sca_feasible: bool,
    pub oracle_feasible: bool,
    pub passed: bool,
}

/// Certifies joint SCA against the grid oracle at every sweep value and
/// realization.
pub fn compute_certification(plan: &ExperimentPlan) -> Result<Vec<CertifyRow>, BenchError> {
    let mut rows = Vec::new();
    for &value in plan.sweep_values() {
        let cfg = plan.config_at(value);
        let per_value: Vec<Result<Vec<CertifyRow>, BenchError>> = (0..plan.realizations)
            .into_par_iter()
            .map(|r| {
                let seed = plan.seed.wrapping_add(r as u64);
                let instance = build_instance(&cfg, seed)?;
                let report = sca_solve(&instance, &cfg, &ScaSettings { seed, ..plan.sca.clone() });
                let cert = certify(&instance, &cfg, &report, &plan.grid, plan.certify_slack)?;
                Ok(cert
                    .groups
                    .iter()
                    .map(|g| CertifyRow {
                        sweep_value: value,
                        realization: r,
                        group: g.group,
                        sca_power: g.sca_objective,
                        oracle_power: g.oracle_objective,
                        sca_feasible: g.sca_feasible,
                        oracle_feasible: g.oracle_feasible,
                        passed: g.passed(),
                    })
                    .collect())
            })
            .collect();
        for block in per_value {
            rows.extend(block?);
        }
    }
    Ok(rows)
}

/// Certification with an optional `certify.csv`. Fails with
/// [`BenchError::CertificationFailed`] when any group misses the band.
pub fn run_certification(plan: &ExperimentPlan, out: Option<&Path>) -> Result<Vec<CertifyRow>, BenchError> {
    let rows = compute_certification(plan)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        let param = plan.sweep_param.name();
        write_rows(
            &dir.join("certify.csv"),
            &CERTIFY_HEADER,
            rows.iter().map(|r| {
                let oracle = r.oracle_power.unwrap_or(f64::NAN);
                vec![
                    param.to_string(),
                    r.sweep_value.to_string(),
                    r.realization.to_string(),
                    r.group.to_string(),
                    fmt_f64(r.sca_power),
                    fmt_f64(oracle),
                    fmt_f64((r.sca_power - oracle) / oracle),
                    r.sca_feasible.to_string(),
                    r.oracle_feasible.to_string(),
                    r.passed.to_string(),
                ]
            }),
        )?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(BenchError::CertificationFailed { failed, total: rows.len() });
    }
    Ok(rows)
}
