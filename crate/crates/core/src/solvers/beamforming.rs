//! Receive beamforming block via semidefinite relaxation.
//!
//! Each beam `m_k` is lifted to `M_k = m_k m_kᴴ` with `Tr M_k = 1`; user k's
//! SNR becomes `a₀ p_k h̄_kᴴ M_k h̄_k` where `h̄_k = H̄_kᴴ w̄`.

use num_complex::Complex64;

use super::barrier::follow_path;
use super::lifted::{Equality, Functional, LiftedProgram};
use super::{Block, ConicSolution, SolverError, SolverOptions};
use crate::numerics::{outer, CMatrix};
use crate::ratemodel::{Allocation, AuxState, RateModel};

/// Weight of the identity in the interior starting point.
const START_SPREAD: f64 = 0.01;

/// Solves the relaxed beamforming block with powers, frequencies and the
/// IRS fixed; returns one lifted solution per user.
pub fn solve_beamforming(
    model: &RateModel,
    alloc: &Allocation,
    aux: &AuxState,
    opts: &SolverOptions,
) -> Result<Vec<ConicSolution>, SolverError> {
    let k = model.users();
    let n = model.real.antennas();
    let problem = model.rate_problem(aux, &model.local_rates(alloc));
    let functionals = (0..k)
        .map(|u| {
            let h = model.real.effective_channel(u, &alloc.irs);
            Functional { block: u, vector: h * Complex64::new((model.a0() * alloc.power[u]).sqrt(), 0.0) }
        })
        .collect();
    let program = LiftedProgram {
        dims: vec![n; k],
        equalities: (0..k).map(|u| (u, Equality::Trace)).collect(),
        functionals,
        objective: &problem.objective,
        constraints: &problem.constraints,
    };

    let spread = CMatrix::identity(n, n) * Complex64::new(START_SPREAD / n as f64, 0.0);
    let x0: Vec<CMatrix> = alloc
        .beams
        .iter()
        .map(|m| {
            let m = m.unscale(m.norm().max(f64::MIN_POSITIVE));
            outer(&m) * Complex64::new(1.0 - START_SPREAD, 0.0) + &spread
        })
        .collect();

    match follow_path(&program, x0, opts) {
        Ok(res) => {
            let s = program.functional_values(&res.point);
            let objective = model.block_objective(problem.objective.value(&s), alloc, aux.eta1);
            let gap = (k * n + k) as f64 * res.mu;
            Ok(res
                .point
                .into_iter()
                .map(|x| ConicSolution { x, objective, kkt_residual: gap, iterations: res.iterations })
                .collect())
        }
        Err(bad) => {
            let kappa = 1.0 / model.nats_to_bits();
            let (user, slack) = (bad.worst, bad.slack);
            Err(SolverError::Infeasible {
                block: Block::Beamforming,
                user,
                max_surrogate_rate: model.cfg.rate_threshold + slack / kappa,
                threshold: model.cfg.rate_threshold,
            })
        }
    }
}
