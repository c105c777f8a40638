//! Seeded Monte Carlo sweeps over the rate threshold or the UE→IRS
//! distance, with CSV output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_scheme, Scheme, SchemeResult};
use crate::channel::{generate_channels, link_distances, ChannelError};
use crate::config::SystemConfig;
use crate::numerics::{stream_rng, Stream};
use crate::solvers::SolverOptions;

pub const RESULTS_HEADER: &str =
    "scheme,sweep_var,sweep_value,seed,ee_bits_per_joule,rate_bits_per_s,power_w,iterations,converged";
pub const SUMMARY_HEADER: &str = "scheme,sweep_var,sweep_value,runs,failed,ee_mean,ee_std,ee_stderr,rate_mean,rate_std,power_mean,power_std,converged_fraction";
pub const TRACE_HEADER: &str =
    "scheme,sweep_var,sweep_value,seed,iteration,ee_bits_per_joule,best_ee_bits_per_joule,rate_bits_per_s,power_w,eta1,run_converged";

pub const DEFAULT_RTH_GRID: [f64; 4] = [0.5e6, 1.0e6, 1.5e6, 2.0e6];
pub const DEFAULT_OFFSET_GRID: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("could not parse experiment: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    None,
    Rth,
    IrsDistance,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::None => "none",
            SweepVariable::Rth => "rth",
            SweepVariable::IrsDistance => "irs_distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    /// Ascending sweep values: bits/s for `rth`, meters for `irs_distance`.
    #[serde(default)]
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub solver: SolverOptions,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub output: PathBuf,
    /// Largest tolerated share of failed runs before the experiment is
    /// reported as failing.
    pub max_infeasible_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            solver: SolverOptions::default(),
            sweep: Sweep { variable: SweepVariable::None, grid: Vec::new() },
            seeds: (0..20).collect(),
            schemes: Scheme::ALL.to_vec(),
            output: PathBuf::from("results"),
            max_infeasible_fraction: 0.25,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// Sweep values actually run; a spec without a sweep has one point.
    pub fn points(&self) -> Vec<f64> {
        match self.sweep.variable {
            SweepVariable::None => vec![0.0],
            _ => self.sweep.grid.clone(),
        }
    }

    /// System configuration at one sweep value.
    pub fn config_at(&self, value: f64) -> SystemConfig {
        let mut cfg = self.system.clone();
        match self.sweep.variable {
            SweepVariable::None => {}
            SweepVariable::Rth => cfg.rate_threshold = value,
            SweepVariable::IrsDistance => cfg.ue_irs_offset_m = self.system.ue_irs_offset_m + value,
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let mut problems = Vec::new();
        if let Err(crate::config::ConfigError::Invalid(p)) = self.system.validate() {
            problems.extend(p.into_iter().map(|m| format!("system: {m}")));
        }
        problems.extend(self.solver.validate());

        let grid = &self.sweep.grid;
        match self.sweep.variable {
            SweepVariable::None => {
                if !grid.is_empty() {
                    problems.push("sweep.grid must be empty when sweep.variable is none".into());
                }
            }
            var => {
                if grid.is_empty() {
                    problems.push("sweep.grid must not be empty".into());
                }
                if grid.iter().any(|v| !v.is_finite()) {
                    problems.push("sweep.grid values must be finite".into());
                }
                if grid.windows(2).any(|w| !(w[0] < w[1])) {
                    problems.push("sweep.grid must be strictly increasing".into());
                }
                if var == SweepVariable::Rth && grid.iter().any(|&v| v < 0.0) {
                    problems.push("sweep.grid rate thresholds must be nonnegative".into());
                }
                if var == SweepVariable::IrsDistance {
                    if grid.iter().any(|&v| v < 0.0) {
                        problems.push("sweep.grid offsets must be nonnegative".into());
                    }
                    for &v in grid {
                        if link_distances(&self.config_at(v)).ue_irs.iter().any(|&d| !(d > 0.0)) {
                            problems.push(format!("sweep.grid offset {v} m puts a user on the IRS"));
                        }
                    }
                }
            }
        }

        if self.seeds.is_empty() {
            problems.push("seeds must not be empty".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            problems.push("seeds must be distinct".into());
        }
        if self.schemes.is_empty() {
            problems.push("schemes must not be empty".into());
        }
        let mut schemes = self.schemes.clone();
        schemes.sort_unstable();
        if schemes.windows(2).any(|w| w[0] == w[1]) {
            problems.push("schemes must be distinct".into());
        }
        if !(0.0..=1.0).contains(&self.max_infeasible_fraction) {
            problems.push("max_infeasible_fraction must lie in [0, 1]".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Validation(problems))
        }
    }
}

/// One line of the results CSV. Failed runs carry NaN metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub seed: u64,
    pub energy_efficiency: f64,
    pub sum_rate: f64,
    pub sum_power: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Optimizer failure or infeasible final allocation.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub scheme: Scheme,
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub seed: u64,
    /// 0 is the initial point.
    pub iteration: usize,
    pub energy_efficiency: f64,
    pub best_energy_efficiency: f64,
    pub sum_rate: f64,
    pub sum_power: f64,
    pub eta1: f64,
    pub run_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (n − 1); zero for a single value.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std =
            if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        Stats { mean, std }
    }

    pub fn stderr(&self, n: usize) -> f64 {
        self.std / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    /// Runs that produced a feasible allocation.
    pub runs: usize,
    pub failed: usize,
    pub ee: Stats,
    pub rate: Stats,
    pub power: Stats,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    pub traces: Vec<TraceRow>,
}

impl ExperimentReport {
    pub fn failed_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.failed).count() as f64 / self.rows.len() as f64
    }

    pub fn summary_for(&self, scheme: Scheme, sweep_value: f64) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.scheme == scheme && s.sweep_value == sweep_value)
    }

    pub fn results_csv(&self) -> String {
        let mut out = String::from(RESULTS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scheme,
                r.sweep_var.name(),
                r.sweep_value,
                r.seed,
                r.energy_efficiency,
                r.sum_rate,
                r.sum_power,
                r.iterations,
                r.converged
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.scheme,
                s.sweep_var.name(),
                s.sweep_value,
                s.runs,
                s.failed,
                s.ee.mean,
                s.ee.std,
                s.ee.stderr(s.runs),
                s.rate.mean,
                s.rate.std,
                s.power.mean,
                s.power.std,
                s.converged_fraction
            );
        }
        out
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for t in &self.traces {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                t.scheme,
                t.sweep_var.name(),
                t.sweep_value,
                t.seed,
                t.iteration,
                t.energy_efficiency,
                t.best_energy_efficiency,
                t.sum_rate,
                t.sum_power,
                t.eta1,
                t.run_converged
            );
        }
        out
    }

    /// Writes `results.csv`, `summary.csv` and `trace.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.into(), source })?;
        let files =
            [("results.csv", self.results_csv()), ("summary.csv", self.summary_csv()), ("trace.csv", self.trace_csv())];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|source| ExperimentError::Io { path: path.clone(), source })?;
            written.push(path);
        }
        Ok(written)
    }
}

struct Job {
    sweep_value: f64,
    seed: u64,
    scheme: Scheme,
}

fn run_job(spec: &ExperimentSpec, job: &Job) -> (ResultRow, Vec<TraceRow>) {
    let cfg = spec.config_at(job.sweep_value);
    let outcome: Result<SchemeResult, String> = generate_channels(&cfg, &mut stream_rng(job.seed, Stream::Fading))
        .map_err(|e: ChannelError| e.to_string())
        .and_then(|real| run_scheme(job.scheme, &real, &cfg, &spec.solver, job.seed).map_err(|e| e.to_string()));

    let base = ResultRow {
        scheme: job.scheme,
        sweep_var: spec.sweep.variable,
        sweep_value: job.sweep_value,
        seed: job.seed,
        energy_efficiency: f64::NAN,
        sum_rate: f64::NAN,
        sum_power: f64::NAN,
        iterations: 0,
        converged: false,
        failed: true,
    };
    match outcome {
        Err(_) => (base, Vec::new()),
        Ok(res) => {
            let trace_row = |iteration, ee, best, rate, power, eta1| TraceRow {
                scheme: job.scheme,
                sweep_var: spec.sweep.variable,
                sweep_value: job.sweep_value,
                seed: job.seed,
                iteration,
                energy_efficiency: ee,
                best_energy_efficiency: best,
                sum_rate: rate,
                sum_power: power,
                eta1,
                run_converged: res.converged,
            };
            let initial = res.trace.initial_energy_efficiency;
            let mut traces = vec![trace_row(0, initial, initial, f64::NAN, f64::NAN, f64::NAN)];
            traces.extend(res.trace.records.iter().map(|r| {
                trace_row(r.iteration, r.energy_efficiency, r.best_energy_efficiency, r.sum_rate, r.sum_power, r.eta1)
            }));
            let row = if res.feasible {
                ResultRow {
                    energy_efficiency: res.energy_efficiency,
                    sum_rate: res.sum_rate,
                    sum_power: res.sum_power,
                    iterations: res.iterations,
                    converged: res.converged,
                    failed: false,
                    ..base
                }
            } else {
                ResultRow { iterations: res.iterations, converged: res.converged, ..base }
            };
            (row, traces)
        }
    }
}

fn summarize(spec: &ExperimentSpec, rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRow>> = BTreeMap::new();
    let points = spec.points();
    for r in rows {
        let p = points.iter().position(|&v| v == r.sweep_value).expect("row value comes from the grid");
        let s = spec.schemes.iter().position(|&s| s == r.scheme).expect("row scheme comes from the spec");
        groups.entry((p, s)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((p, s), group)| {
            let ok: Vec<&ResultRow> = group.iter().copied().filter(|r| !r.failed).collect();
            let column = |f: fn(&ResultRow) -> f64| Stats::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                scheme: spec.schemes[s],
                sweep_var: spec.sweep.variable,
                sweep_value: points[p],
                runs: ok.len(),
                failed: group.len() - ok.len(),
                ee: column(|r| r.energy_efficiency),
                rate: column(|r| r.sum_rate),
                power: column(|r| r.sum_power),
                converged_fraction: group.iter().filter(|r| r.converged).count() as f64 / group.len() as f64,
            }
        })
        .collect()
}

/// Runs every (sweep value, seed, scheme) combination. Rows come out
/// ordered by sweep value, then seed, then scheme as listed in the spec,
/// independent of scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let jobs: Vec<Job> = spec
        .points()
        .into_iter()
        .flat_map(|v| {
            spec.seeds
                .iter()
                .flat_map(move |&seed| spec.schemes.iter().map(move |&scheme| Job { sweep_value: v, seed, scheme }))
        })
        .collect();
    let results: Vec<(ResultRow, Vec<TraceRow>)> = jobs.par_iter().map(|job| run_job(spec, job)).collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (row, t) in results {
        rows.push(row);
        traces.extend(t);
    }
    let summary = summarize(spec, &rows);
    Ok(ExperimentReport { rows, summary, traces })
}

/// [`run_experiment`] with the UE→IRS offset as the sweep variable.
pub fn sweep_irs_distance(spec: &ExperimentSpec, offsets: &[f64]) -> Result<ExperimentReport, ExperimentError> {
    let mut spec = spec.clone();
    spec.sweep = Sweep { variable: SweepVariable::IrsDistance, grid: offsets.to_vec() };
    run_experiment(&spec)
}

/// [`run_experiment`] over rate thresholds.
pub fn sweep_rth(spec: &ExperimentSpec, thresholds: &[f64]) -> Result<ExperimentReport, ExperimentError> {
    let mut spec = spec.clone();
    spec.sweep = Sweep { variable: SweepVariable::Rth, grid: thresholds.to_vec() };
    run_experiment(&spec)
}

/// Per-iteration EE traces of the proposed scheme for each rate threshold.
pub fn convergence_trace(spec: &ExperimentSpec, thresholds: &[f64]) -> Result<ExperimentReport, ExperimentError> {
    let mut spec = spec.clone();
    spec.schemes = vec![Scheme::Proposed];
    sweep_rth(&spec, thresholds)
}
