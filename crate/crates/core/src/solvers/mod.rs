//! Convex block solvers and rank-one recovery.

mod barrier;
mod beamforming;
mod irs_phase;
mod lifted;
mod power_freq;
mod recovery;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{CMatrix, NumericsError};

pub use beamforming::solve_beamforming;
pub use irs_phase::{lifted_from_phases, phases_from_lifted, solve_irs_phase};
pub use power_freq::{solve_power_freq, PowerFreqSolution};
pub use recovery::{recover_rank1, score_allocation, CandidateScore, Recovered, RecoveryMode, RANK_ONE_RATIO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Barrier duality-gap target and feasibility tolerance, in nats.
    pub tol: f64,
    /// Newton steps allowed per barrier stage.
    pub max_newton: usize,
    pub mu0: f64,
    pub mu_shrink: f64,
    /// Gaussian randomization draws L.
    pub randomizations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_newton: 100, mu0: 1.0, mu_shrink: 0.2, randomizations: 200 }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            problems.push(format!("solver.tol must be positive (got {})", self.tol));
        }
        if self.max_newton == 0 {
            problems.push("solver.max_newton must be at least 1".into());
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            problems.push(format!("solver.mu0 must be positive (got {})", self.mu0));
        }
        if !(self.mu_shrink > 0.0 && self.mu_shrink < 1.0) {
            problems.push(format!("solver.mu_shrink must lie in (0, 1) (got {})", self.mu_shrink));
        }
        if self.randomizations == 0 {
            problems.push("solver.randomizations must be at least 1".into());
        }
        problems
    }
}

/// Solution of one lifted block.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    /// Hermitian PSD lifted variable.
    pub x: CMatrix,
    /// Block objective `Σ R − η₁ Σ P` at the relaxed point, bits/s.
    pub objective: f64,
    /// Duality-gap bound `ν μ` at termination, nats.
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    PowerFrequency,
    Beamforming,
    IrsPhase,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Block::PowerFrequency => "power/frequency",
            Block::Beamforming => "beamforming",
            Block::IrsPhase => "IRS phase",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("{block} block infeasible: user {user} reaches at most {max_surrogate_rate:.6e} bits/s of the required {threshold:.6e}")]
    Infeasible { block: Block, user: usize, max_surrogate_rate: f64, threshold: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("lifted IRS entry {0} is zero")]
    ZeroEntry(usize),
}
