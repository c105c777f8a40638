//! Alternating optimization of powers, frequencies, beams and IRS phases.
//!
//! Each outer iteration solves the three blocks in turn with the log-bound
//! multipliers `t` and the Dinkelbach price `η₁` frozen, then refreshes both
//! at the new point. A block result is only adopted when it is feasible and
//! does not lower the block objective, so the energy efficiency never drops
//! from one iteration to the next.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::numerics::{dominant_eigvec, CVector};
use crate::ratemodel::{Access, Allocation, AuxState, RateModel};
use crate::solvers::{
    recover_rank1, score_allocation, solve_beamforming, solve_irs_phase, solve_power_freq, CandidateScore,
    ConicSolution, RecoveryMode, SolverError, SolverOptions,
};

/// Relative slack on rate thresholds and the power cap when judging
/// feasibility of a final allocation.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Variant {
    pub access: Access,
    pub local_computing: bool,
    pub optimize_irs: bool,
}

impl Variant {
    pub const PROPOSED: Variant = Variant { access: Access::Noma, local_computing: true, optimize_irs: true };
}

impl Default for Variant {
    fn default() -> Self {
        Self::PROPOSED
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("initial point infeasible: user {user} reaches {rate:.6e} bits/s of the required {threshold:.6e}")]
    InfeasibleStart { user: usize, rate: f64, threshold: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOutcome {
    /// The new block value was adopted.
    Accepted,
    /// Solved, but the recovered point was infeasible or worse.
    KeptPrevious,
    /// The block problem itself was infeasible.
    Infeasible,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStatus {
    pub outcome: BlockOutcome,
    /// Value reported by the block solver (the relaxed value for lifted
    /// blocks), bits/s; NaN when the block was not solved.
    pub solver_objective: f64,
    /// Block objective at the allocation kept after this block, bits/s.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy_efficiency: f64,
    pub best_energy_efficiency: f64,
    pub sum_rate: f64,
    pub sum_power: f64,
    pub rates: Vec<f64>,
    /// Price used by the blocks of this iteration.
    pub eta1: f64,
    /// Multipliers after the end-of-iteration update.
    pub t: Vec<f64>,
    pub power_freq: BlockStatus,
    pub beamforming: BlockStatus,
    pub irs_phase: BlockStatus,
    pub feasible: bool,
    pub allocation: Allocation,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub initial_energy_efficiency: f64,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Best feasible iterate (the initial point counts).
    pub allocation: Allocation,
    pub energy_efficiency: f64,
    pub sum_rate: f64,
    pub sum_power: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub trace: RunTrace,
}

/// `η₁ = Σ R / Σ P` at `alloc`.
pub fn dinkelbach_update(model: &RateModel, alloc: &Allocation) -> f64 {
    let rate = model.sum_rate(alloc);
    if rate == 0.0 {
        return 0.0;
    }
    rate / model.sum_power(alloc)
}

/// Rate thresholds and power caps hold to [`FEASIBILITY_TOL`].
pub fn is_feasible(model: &RateModel, alloc: &Allocation) -> bool {
    let cfg = model.cfg;
    let floor = cfg.rate_threshold - FEASIBILITY_TOL * cfg.rate_threshold.max(1.0);
    let cap = cfg.power_budget() * (1.0 + FEASIBILITY_TOL);
    model.total_rates(alloc).iter().all(|&r| r >= floor)
        && (0..model.users()).all(|k| alloc.power[k] + cfg.capacitance * alloc.frequency[k].powi(3) <= cap)
}

fn matched_beams(real: &ChannelRealization, irs: &CVector) -> Vec<CVector> {
    (0..real.users())
        .map(|k| {
            let h = real.effective_channel(k, irs);
            let norm = h.norm();
            if norm > 0.0 {
                h.unscale(norm)
            } else {
                let mut e = CVector::zeros(h.len());
                e[0] = Complex64::new(1.0, 0.0);
                e
            }
        })
        .collect()
}

fn aux_at(model: &RateModel, alloc: &Allocation) -> AuxState {
    AuxState { t: model.lemma1_multipliers(alloc), eta1: dinkelbach_update(model, alloc) }
}

/// Starting point: identity phases, matched-filter beams, half the budget
/// on transmission and a quarter on computing.
///
/// If that point misses a rate threshold, the power/frequency block is
/// asked for a feasible point before giving up.
pub fn initialize(
    model: &RateModel,
    variant: Variant,
    opts: &SolverOptions,
) -> Result<(Allocation, AuxState), OptimizerError> {
    let cfg = model.cfg;
    let k = model.users();
    let budget = cfg.power_budget();
    let irs = CVector::from_element(model.real.elements() + 1, Complex64::new(1.0, 0.0));
    let frequency = if variant.local_computing { (budget / (4.0 * cfg.capacitance)).cbrt() } else { 0.0 };
    let mut alloc = Allocation {
        power: vec![budget / 2.0; k],
        frequency: vec![frequency; k],
        beams: matched_beams(model.real, &irs),
        irs,
    };

    if !is_feasible(model, &alloc) {
        let aux = aux_at(model, &alloc);
        if let Ok(sol) = solve_power_freq(model, &alloc, &aux, variant.local_computing, opts) {
            let mut repaired = alloc.clone();
            repaired.power = sol.power;
            repaired.frequency = sol.frequency;
            if is_feasible(model, &repaired) {
                alloc = repaired;
            }
        }
    }
    if !is_feasible(model, &alloc) {
        let rates = model.total_rates(&alloc);
        let (user, rate) =
            rates
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, r)| if r < acc.1 { (i, r) } else { acc });
        return Err(OptimizerError::InfeasibleStart { user, rate, threshold: cfg.rate_threshold });
    }
    let aux = aux_at(model, &alloc);
    Ok((alloc, aux))
}

/// Block objective and surrogate-constraint violation of `alloc` under the
/// frozen multipliers and price in `aux`.
pub fn block_score(model: &RateModel, aux: &AuxState, alloc: &Allocation) -> CandidateScore {
    let problem = model.rate_problem(aux, &model.local_rates(alloc));
    score_allocation(model, &problem, alloc, aux.eta1)
}

/// Rank-one beams from the lifted beamforming solution, recovered one user
/// at a time against the block objective of the whole allocation.
pub fn recover_beams<R: Rng + ?Sized>(
    model: &RateModel,
    aux: &AuxState,
    alloc: &Allocation,
    lifted: &[ConicSolution],
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<(Allocation, CandidateScore), SolverError> {
    let mut cand = alloc.clone();
    for (k, sol) in lifted.iter().enumerate() {
        cand.beams[k] = dominant_eigvec(&sol.x)?.0;
    }
    for (k, sol) in lifted.iter().enumerate() {
        let rec = recover_rank1(&sol.x, RecoveryMode::Beam, opts.randomizations, opts.tol, rng, |v| {
            let mut trial = cand.clone();
            trial.beams[k] = v.clone();
            block_score(model, aux, &trial)
        })?;
        cand.beams[k] = rec.vector;
    }
    let score = block_score(model, aux, &cand);
    Ok((cand, score))
}

/// Unit-modulus IRS vector from the lifted phase solution.
pub fn recover_irs<R: Rng + ?Sized>(
    model: &RateModel,
    aux: &AuxState,
    alloc: &Allocation,
    lifted: &ConicSolution,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<(Allocation, CandidateScore), SolverError> {
    let rec = recover_rank1(&lifted.x, RecoveryMode::Phase, opts.randomizations, opts.tol, rng, |w| {
        let mut trial = alloc.clone();
        trial.irs = w.clone();
        block_score(model, aux, &trial)
    })?;
    let mut cand = alloc.clone();
    cand.irs = rec.vector;
    Ok((cand, rec.score))
}

struct BlockScorer<'a> {
    model: &'a RateModel<'a>,
    aux: &'a AuxState,
    tol: f64,
}

impl BlockScorer<'_> {
    fn score(&self, alloc: &Allocation) -> CandidateScore {
        block_score(self.model, self.aux, alloc)
    }

    fn acceptable(&self, candidate: &CandidateScore, current: &CandidateScore) -> bool {
        candidate.violation <= self.tol && candidate.objective >= current.objective
    }
}

fn skipped(objective: f64) -> BlockStatus {
    BlockStatus { outcome: BlockOutcome::Skipped, solver_objective: f64::NAN, objective }
}

fn infeasible(objective: f64) -> BlockStatus {
    BlockStatus { outcome: BlockOutcome::Infeasible, solver_objective: f64::NAN, objective }
}

/// Runs the alternating loop from [`initialize`] until the relative change
/// of the energy efficiency drops to `cfg.tolerance` or
/// `cfg.max_iterations` is reached.
pub fn alternate<R: Rng + ?Sized>(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    variant: Variant,
    opts: &SolverOptions,
    rng: &mut R,
) -> Result<RunOutcome, OptimizerError> {
    let model = RateModel::new(cfg, real, variant.access);
    let (mut alloc, mut aux) = initialize(&model, variant, opts)?;
    let initial_ee = model.energy_efficiency(&alloc);
    let optimize_irs = variant.optimize_irs && real.elements() > 0;

    let mut best = (initial_ee, alloc.clone());
    let mut previous_ee = initial_ee;
    let mut records = Vec::new();
    let mut converged = false;

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();
        let scorer = BlockScorer { model: &model, aux: &aux, tol: opts.tol };
        let mut current = scorer.score(&alloc);

        let power_freq = match solve_power_freq(&model, &alloc, &aux, variant.local_computing, opts) {
            Ok(sol) => {
                let mut cand = alloc.clone();
                cand.power = sol.power;
                cand.frequency = sol.frequency;
                let s = scorer.score(&cand);
                let outcome = if scorer.acceptable(&s, &current) {
                    alloc = cand;
                    current = s;
                    BlockOutcome::Accepted
                } else {
                    BlockOutcome::KeptPrevious
                };
                BlockStatus { outcome, solver_objective: sol.objective, objective: current.objective }
            }
            Err(SolverError::Infeasible { .. }) => infeasible(current.objective),
            Err(e) => return Err(e.into()),
        };

        let beamforming = match solve_beamforming(&model, &alloc, &aux, opts) {
            Ok(sols) => {
                let (cand, s) = recover_beams(&model, &aux, &alloc, &sols, opts, rng)?;
                let outcome = if scorer.acceptable(&s, &current) {
                    alloc = cand;
                    current = s;
                    BlockOutcome::Accepted
                } else {
                    BlockOutcome::KeptPrevious
                };
                BlockStatus { outcome, solver_objective: sols[0].objective, objective: current.objective }
            }
            Err(SolverError::Infeasible { .. }) => infeasible(current.objective),
            Err(e) => return Err(e.into()),
        };

        let irs_phase = if !optimize_irs {
            skipped(current.objective)
        } else {
            match solve_irs_phase(&model, &alloc, &aux, opts) {
                Ok(sol) => {
                    let (cand, s) = recover_irs(&model, &aux, &alloc, &sol, opts, rng)?;
                    let outcome = if scorer.acceptable(&s, &current) {
                        alloc = cand;
                        current = s;
                        BlockOutcome::Accepted
                    } else {
                        BlockOutcome::KeptPrevious
                    };
                    BlockStatus { outcome, solver_objective: sol.objective, objective: current.objective }
                }
                Err(SolverError::Infeasible { .. }) => infeasible(current.objective),
                Err(e) => return Err(e.into()),
            }
        };

        let ee = model.energy_efficiency(&alloc);
        let feasible = is_feasible(&model, &alloc);
        if feasible && ee > best.0 {
            best = (ee, alloc.clone());
        }
        let eta1 = aux.eta1;
        aux = aux_at(&model, &alloc);
        records.push(IterationRecord {
            iteration,
            energy_efficiency: ee,
            best_energy_efficiency: best.0,
            sum_rate: model.sum_rate(&alloc),
            sum_power: model.sum_power(&alloc),
            rates: model.total_rates(&alloc),
            eta1,
            t: aux.t.clone(),
            power_freq,
            beamforming,
            irs_phase,
            feasible,
            allocation: alloc.clone(),
            wall_time: started.elapsed(),
        });

        if ee != 0.0 && ((ee - previous_ee) / ee).abs() <= cfg.tolerance {
            converged = true;
            break;
        }
        previous_ee = ee;
    }

    let (energy_efficiency, allocation) = best;
    Ok(RunOutcome {
        energy_efficiency,
        sum_rate: model.sum_rate(&allocation),
        sum_power: model.sum_power(&allocation),
        feasible: is_feasible(&model, &allocation),
        allocation,
        iterations: records.len(),
        converged,
        trace: RunTrace { initial_energy_efficiency: initial_ee, records },
    })
}
