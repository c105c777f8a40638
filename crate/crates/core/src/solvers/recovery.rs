//! Rank-one recovery of lifted solutions.

use rand::Rng;

use super::SolverError;
use crate::numerics::{eig_hermitian, sample_cgauss, unit_phase, CMatrix, CVector};
use crate::ratemodel::{Allocation, RateModel, RateProblem};

/// `λ₁ / Tr(X)` at or above which a lifted solution counts as rank one.
pub const RANK_ONE_RATIO: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Unit-norm receive beam.
    Beam,
    /// Unit-modulus lifted IRS vector with the last entry fixed to 1.
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub objective: f64,
    /// Largest constraint violation, zero when feasible.
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct Recovered {
    pub vector: CVector,
    pub score: CandidateScore,
    pub feasible: bool,
    /// The lifted solution passed the rank-one test; no draws were made.
    pub rank_one: bool,
}

/// Maps an arbitrary vector onto the feasible set of `mode`.
pub fn project(v: &CVector, mode: RecoveryMode) -> CVector {
    match mode {
        RecoveryMode::Beam => {
            let norm = v.norm();
            if norm > 0.0 {
                v.unscale(norm)
            } else {
                let mut e = CVector::zeros(v.len());
                if !e.is_empty() {
                    e[0] = num_complex::Complex64::new(1.0, 0.0);
                }
                e
            }
        }
        RecoveryMode::Phase => {
            let phased = v.map(unit_phase);
            match phased.len() {
                0 => phased,
                n => {
                    let anchor = phased[n - 1];
                    phased.map(|z| z / anchor)
                }
            }
        }
    }
}

/// Recovers a feasible rank-one point from the lifted solution `x`.
///
/// A rank-one `x` yields its principal eigenvector directly. Otherwise the
/// principal eigenvector and `draws` samples from `CN(0, x)` are projected
/// and scored; the best candidate with violation at most `feasibility_tol`
/// wins, or the least-violating one if none qualifies.
pub fn recover_rank1<R, F>(
    x: &CMatrix,
    mode: RecoveryMode,
    draws: usize,
    feasibility_tol: f64,
    rng: &mut R,
    mut score: F,
) -> Result<Recovered, SolverError>
where
    R: Rng + ?Sized,
    F: FnMut(&CVector) -> CandidateScore,
{
    let eig = eig_hermitian(x)?;
    let trace: f64 = eig.eigenvalues.iter().sum();
    let principal = project(&eig.eigenvector(0), mode);
    let rank_one = trace > 0.0 && eig.eigenvalues[0] >= RANK_ONE_RATIO * trace;

    if rank_one {
        let s = score(&principal);
        return Ok(Recovered { vector: principal, score: s, feasible: s.violation <= feasibility_tol, rank_one });
    }
    if draws == 0 {
        return Err(SolverError::Configuration("randomization count must be positive for rank > 1".into()));
    }

    let mut best: Option<(CVector, CandidateScore)> = None;
    let better = |cand: &CandidateScore, cur: &CandidateScore| -> bool {
        let cf = cand.violation <= feasibility_tol;
        let bf = cur.violation <= feasibility_tol;
        match (cf, bf) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => cand.objective > cur.objective,
            (false, false) => cand.violation < cur.violation,
        }
    };
    let mut consider = |v: CVector, s: CandidateScore| {
        if best.as_ref().is_none_or(|(_, b)| better(&s, b)) {
            best = Some((v, s));
        }
    };

    let s = score(&principal);
    consider(principal, s);
    for _ in 0..draws {
        let z = project(&sample_cgauss(x, rng)?, mode);
        let s = score(&z);
        consider(z, s);
    }
    let (vector, score) = best.expect("at least one candidate");
    Ok(Recovered { vector, score, feasible: score.violation <= feasibility_tol, rank_one })
}

/// Block objective (bits/s) and worst rate violation (nats) of `alloc`
/// against `problem`.
pub fn score_allocation(model: &RateModel, problem: &RateProblem, alloc: &Allocation, eta1: f64) -> CandidateScore {
    let s = model.snr_terms(alloc);
    let objective = model.block_objective(problem.objective.value(&s), alloc, eta1);
    let violation = problem.constraints.iter().map(|g| (-g.value(&s)).max(0.0)).fold(0.0, f64::max);
    CandidateScore { objective, violation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{outer, standard_cgauss_vec, stream_rng, Stream};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn rayleigh(c: &CMatrix) -> impl FnMut(&CVector) -> CandidateScore + '_ {
        move |v| CandidateScore { objective: v.dotc(&(c * v)).re, violation: 0.0 }
    }

    #[test]
    fn rank_one_passthrough_up_to_phase() {
        let mut rng = stream_rng(1, Stream::Init);
        let v = standard_cgauss_vec(4, &mut rng);
        let v = v.unscale(v.norm());
        let x = outer(&v);
        let c = CMatrix::identity(4, 4);
        let rec = recover_rank1(&x, RecoveryMode::Beam, 0, 1e-6, &mut rng, rayleigh(&c)).unwrap();
        assert!(rec.rank_one && rec.feasible);
        assert_relative_eq!(rec.vector.dotc(&v).norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn phase_mode_all_ones() {
        let ones = CVector::from_element(3, Complex64::new(1.0, 0.0));
        let x = outer(&ones);
        let mut rng = stream_rng(1, Stream::Randomization);
        let c = CMatrix::identity(3, 3);
        let rec = recover_rank1(&x, RecoveryMode::Phase, 5, 1e-6, &mut rng, rayleigh(&c)).unwrap();
        for z in rec.vector.iter() {
            assert_relative_eq!(z.re, 1.0, epsilon = 1e-10);
            assert_relative_eq!(z.im, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_draws_with_higher_rank_is_a_configuration_error() {
        let x = CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        let mut rng = stream_rng(1, Stream::Randomization);
        let c = CMatrix::identity(2, 2);
        let err = recover_rank1(&x, RecoveryMode::Beam, 0, 1e-6, &mut rng, rayleigh(&c)).unwrap_err();
        assert!(matches!(err, SolverError::Configuration(_)));
    }

    #[test]
    fn randomization_recovers_most_of_the_relaxed_value() {
        let mut rng = stream_rng(11, Stream::Randomization);
        for _ in 0..100 {
            let a = standard_cgauss_vec(4, &mut rng);
            let b = standard_cgauss_vec(4, &mut rng);
            let mut x = outer(&a) * Complex64::new(0.7, 0.0) + outer(&b) * Complex64::new(0.3, 0.0);
            let tr = x.trace().re;
            x /= Complex64::new(tr, 0.0);
            let g = CMatrix::from_fn(4, 4, |_, _| crate::numerics::standard_cgauss(&mut rng));
            let c = &g * g.adjoint();
            let relaxed = crate::numerics::trace_product(&c, &x);
            let rec = recover_rank1(&x, RecoveryMode::Beam, 200, 1e-6, &mut rng, rayleigh(&c)).unwrap();
            assert!(!rec.rank_one);
            assert!(rec.score.objective >= 0.9 * relaxed, "{} vs {}", rec.score.objective, relaxed);
        }
    }

    #[test]
    fn infeasible_candidates_fall_back_to_least_violation() {
        let x = CMatrix::identity(2, 2) * Complex64::new(0.5, 0.0);
        let mut rng = stream_rng(2, Stream::Randomization);
        let rec = recover_rank1(&x, RecoveryMode::Beam, 50, 1e-6, &mut rng, |v| CandidateScore {
            objective: 0.0,
            violation: 1.0 + v[0].norm(),
        })
        .unwrap();
        assert!(!rec.feasible);
        assert!(rec.score.violation < 1.2);
    }

    #[test]
    fn projections_land_on_feasible_sets() {
        let mut rng = stream_rng(4, Stream::Init);
        let v = standard_cgauss_vec(5, &mut rng);
        assert_relative_eq!(project(&v, RecoveryMode::Beam).norm(), 1.0, epsilon = 1e-12);
        let w = project(&v, RecoveryMode::Phase);
        assert!(w.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_relative_eq!(w[4].re, 1.0, epsilon = 1e-12);
    }
}
