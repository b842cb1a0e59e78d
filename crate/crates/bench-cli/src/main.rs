use std::path::PathBuf;
use std::process::ExitCode;

use bench_cli::plan::parse_override;
use bench_cli::{load_plan, run, BenchError, ExperimentPlan};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "swipt-bench", version, about = "SWIPT NOMA/TDMA power sweeps, convergence traces and oracle certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean transmit power per solver over a QoS sweep.
    Sweep(Common),
    /// SCA convergence traces on one realization.
    Converge(Common),
    /// Compare SCA with the grid oracle; exits 3 on any miss.
    Certify(Common),
}

#[derive(Args)]
struct Common {
    /// key = value config file; defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set qos.rmin_bits_hz=0.1. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    set: Vec<(String, String)>,
    /// Output directory (run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Realizations per sweep value (run.realizations).
    #[arg(long)]
    realizations: Option<usize>,
    /// Comma-separated subset of sca-noma,tdma,oracle (run.solvers).
    #[arg(long)]
    solvers: Option<String>,
}

impl Common {
    fn plan(&self) -> Result<ExperimentPlan, BenchError> {
        let mut overrides = self.set.clone();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                overrides.push((k.to_string(), v));
            }
        };
        push("run.out", self.out.as_ref().map(|p| p.display().to_string()));
        push("run.seed", self.seed.map(|s| s.to_string()));
        push("run.realizations", self.realizations.map(|r| r.to_string()));
        push("run.solvers", self.solvers.clone());
        load_plan(self.config.as_deref(), &overrides)
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Sweep(c) => {
            let plan = c.plan()?;
            let result = run::run_sweep(&plan)?;
            for row in &result.rows {
                println!(
                    "{}={} {:<8} mean_pt={:.4e} W ({:.2} dBm) success={:.3}",
                    plan.sweep_param.name(),
                    row.sweep_value,
                    row.solver,
                    row.mean_power,
                    row.mean_power_dbm(),
                    row.success_rate
                );
            }
            println!("wrote {}", plan.out.join("sweep.csv").display());
        }
        Command::Converge(c) => {
            let plan = c.plan()?;
            for (p, rep) in run::run_convergence(&plan)? {
                println!(
                    "pmin_dbm={p} iterations={} converged={} pt={:.6e} W",
                    rep.iterations,
                    rep.converged,
                    rep.total_power()
                );
            }
            println!("wrote {}", plan.out.join("converge.csv").display());
        }
        Command::Certify(c) => {
            let out = c.out.clone();
            let plan = c.plan()?;
            let rows = run::run_certification(&plan, out.as_deref())?;
            println!("certified {} groups within {}", rows.len(), plan.certify_slack);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
