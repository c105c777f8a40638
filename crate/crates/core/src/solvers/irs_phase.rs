//! IRS phase block via semidefinite relaxation, and the conversion between
//! the lifted IRS vector and physical phase shifts.
//!
//! The lifted vector `w̄` enters every gain as `w̄ᴴ H̄_k m_k`, so element m
//! applies `e^{jθ_m} = conj(w̄_m / w̄_{M+1})`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::barrier::follow_path;
use super::lifted::{Equality, Functional, LiftedProgram};
use super::{Block, ConicSolution, SolverError, SolverOptions};
use crate::numerics::{outer, CMatrix, CVector};
use crate::ratemodel::{Allocation, AuxState, RateModel};

const START_SPREAD: f64 = 0.01;

/// Solves the relaxed phase block with powers, frequencies and beams fixed.
/// The returned `W` is `(M+1)×(M+1)` with unit diagonal.
pub fn solve_irs_phase(
    model: &RateModel,
    alloc: &Allocation,
    aux: &AuxState,
    opts: &SolverOptions,
) -> Result<ConicSolution, SolverError> {
    let k = model.users();
    let dim = model.real.elements() + 1;
    if model.real.elements() == 0 {
        return Err(SolverError::Configuration("phase block needs at least one IRS element".into()));
    }
    let problem = model.rate_problem(aux, &model.local_rates(alloc));
    let functionals = (0..k)
        .map(|u| {
            let v = &model.real.composite[u] * &alloc.beams[u];
            Functional { block: 0, vector: v * Complex64::new((model.a0() * alloc.power[u]).sqrt(), 0.0) }
        })
        .collect();
    let program = LiftedProgram {
        dims: vec![dim],
        equalities: (0..dim).map(|j| (0, Equality::Diagonal(j))).collect(),
        functionals,
        objective: &problem.objective,
        constraints: &problem.constraints,
    };

    let w = alloc.irs.map(crate::numerics::unit_phase);
    let x0 = vec![
        outer(&w) * Complex64::new(1.0 - START_SPREAD, 0.0)
            + CMatrix::identity(dim, dim) * Complex64::new(START_SPREAD, 0.0),
    ];

    match follow_path(&program, x0, opts) {
        Ok(res) => {
            let s = program.functional_values(&res.point);
            let objective = model.block_objective(problem.objective.value(&s), alloc, aux.eta1);
            let x = res.point.into_iter().next().expect("one block");
            Ok(ConicSolution { x, objective, kkt_residual: (dim + k) as f64 * res.mu, iterations: res.iterations })
        }
        Err(bad) => {
            let kappa = 1.0 / model.nats_to_bits();
            let (user, slack) = (bad.worst, bad.slack);
            Err(SolverError::Infeasible {
                block: Block::IrsPhase,
                user,
                max_surrogate_rate: model.cfg.rate_threshold + slack / kappa,
                threshold: model.cfg.rate_threshold,
            })
        }
    }
}

/// Phase shifts `θ_m ∈ [0, 2π)` realized by the lifted vector `w̄`.
pub fn phases_from_lifted(w: &CVector) -> Result<Vec<f64>, SolverError> {
    if let Some(i) = w.iter().position(|z| z.norm() == 0.0) {
        return Err(SolverError::ZeroEntry(i));
    }
    let Some(&last) = w.iter().next_back() else {
        return Ok(Vec::new());
    };
    Ok(w.iter()
        .take(w.len() - 1)
        .map(|&z| {
            let theta = (z / last).conj().arg().rem_euclid(TAU);
            if theta >= TAU {
                0.0
            } else {
                theta
            }
        })
        .collect())
}

/// Inverse of [`phases_from_lifted`] with the last entry fixed to 1.
pub fn lifted_from_phases(theta: &[f64]) -> CVector {
    CVector::from_iterator(
        theta.len() + 1,
        theta.iter().map(|&t| Complex64::from_polar(1.0, -t)).chain(std::iter::once(Complex64::new(1.0, 0.0))),
    )
}
