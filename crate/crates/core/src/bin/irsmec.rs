use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irsmec::experiment::{
    convergence_trace, run_experiment, sweep_irs_distance, sweep_rth, ExperimentError, ExperimentReport,
    ExperimentSpec, DEFAULT_OFFSET_GRID, DEFAULT_RTH_GRID,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

type Runner = Box<dyn Fn(&ExperimentSpec) -> Result<ExperimentReport, ExperimentError> + Send + Sync>;

#[derive(Parser)]
#[command(name = "irsmec", version, about = "Energy-efficiency experiments for IRS-assisted NOMA edge computing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON spec.
    Run(RunArgs),
    /// Sweep the per-user rate threshold (bits/s).
    SweepRth(SweepArgs),
    /// Sweep the extra UE→IRS distance (m).
    SweepIrsDistance(SweepArgs),
    /// Record per-iteration EE of the proposed scheme for several thresholds.
    TraceConvergence(SweepArgs),
    /// Check a JSON spec without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Output directory [default: the spec's `output`].
    #[arg(long, env = "IRSMEC_OUT_DIR")]
    out: Option<PathBuf>,
    /// Use seeds 0..n instead of the spec's list.
    #[arg(long)]
    seeds: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long)]
    threads: Option<usize>,
    /// Barrier tolerance, overriding the spec.
    #[arg(long)]
    tol: Option<f64>,
    /// Gaussian randomization draws, overriding the spec.
    #[arg(long)]
    randomizations: Option<usize>,
    /// Newton steps per barrier stage, overriding the spec.
    #[arg(long)]
    max_newton: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Base spec [default: built-in reference scenario].
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

fn load(config: Option<&Path>, common: &Common) -> Result<ExperimentSpec, ExperimentError> {
    let mut spec = match config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(out) = &common.out {
        spec.output = out.clone();
    }
    if let Some(n) = common.seeds {
        spec.seeds = (0..n).collect();
    }
    if let Some(tol) = common.tol {
        spec.solver.tol = tol;
    }
    if let Some(l) = common.randomizations {
        spec.solver.randomizations = l;
    }
    if let Some(n) = common.max_newton {
        spec.solver.max_newton = n;
    }
    Ok(spec)
}

fn execute(command: Command) -> Result<Option<(ExperimentReport, ExperimentSpec)>, ExperimentError> {
    let (spec, common, run): (ExperimentSpec, Common, Runner) = match command {
        Command::ValidateConfig { config } => {
            ExperimentSpec::load(&config)?;
            println!("{}: ok", config.display());
            return Ok(None);
        }
        Command::Run(a) => (load(Some(&a.config), &a.common)?, a.common, Box::new(run_experiment)),
        Command::SweepRth(a) => {
            let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_RTH_GRID.to_vec());
            (load(a.config.as_deref(), &a.common)?, a.common, Box::new(move |s| sweep_rth(s, &grid)))
        }
        Command::SweepIrsDistance(a) => {
            let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_OFFSET_GRID.to_vec());
            (load(a.config.as_deref(), &a.common)?, a.common, Box::new(move |s| sweep_irs_distance(s, &grid)))
        }
        Command::TraceConvergence(a) => {
            let grid = a.grid.clone().unwrap_or_else(|| DEFAULT_RTH_GRID.to_vec());
            (load(a.config.as_deref(), &a.common)?, a.common, Box::new(move |s| convergence_trace(s, &grid)))
        }
    };

    let report = match common.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(|| run(&spec))?,
        None => run(&spec)?,
    };
    for path in report.write(&spec.output)? {
        println!("wrote {}", path.display());
    }
    Ok(Some((report, spec)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some((report, spec))) => {
            for s in &report.summary {
                println!(
                    "{:<18} {}={:<10} EE {:.4e} ± {:.2e} bits/J  ({} ok, {} failed)",
                    s.scheme.label(),
                    s.sweep_var.name(),
                    s.sweep_value,
                    s.ee.mean,
                    s.ee.stderr(s.runs),
                    s.runs,
                    s.failed
                );
            }
            let failed = report.failed_fraction();
            if failed > spec.max_infeasible_fraction {
                eprintln!(
                    "error: {:.1}% of runs failed (limit {:.1}%)",
                    100.0 * failed,
                    100.0 * spec.max_infeasible_fraction
                );
                ExitCode::from(EXIT_INFEASIBLE)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ (ExperimentError::Validation(_) | ExperimentError::Parse(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
