//! Log-barrier path following shared by the dense and the lifted solvers.
//!
//! Both engines minimize a merit `ψ` built from a concave objective and
//! concave constraints `g_j ≥ 0`:
//!
//! * optimality phase: `ψ = −f − μ Σ log g_j`
//! * feasibility phase: `ψ = μ log Σ exp(−g_j / μ)`, a smoothed `−min g_j`
//!
//! and shrink `μ` geometrically until `ν μ` drops below the tolerance, `ν`
//! being the barrier degree.

use nalgebra::{DMatrix, DVector};

use super::SolverOptions;
use crate::ratemodel::Smooth;

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-2;
/// Newton decrement (λ²/2) below which a stage counts as centered.
const CENTERED: f64 = 1e-11;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    Feasibility,
    Optimality,
}

/// Merit to minimize at barrier weight `mu`; `None` when a constraint is
/// not strictly satisfied in the optimality phase.
pub(crate) fn merit(phase: Phase, mu: f64, objective: Option<&Smooth>, constraints: &[Smooth]) -> Option<Smooth> {
    let n = constraints.first().map(|c| c.grad.len()).or_else(|| objective.map(|o| o.grad.len())).unwrap_or(0);
    match phase {
        Phase::Optimality => {
            let mut value = 0.0;
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            if let Some(f) = objective {
                value -= f.value;
                grad -= &f.grad;
                hess -= &f.hess;
            }
            for g in constraints {
                if !(g.value > 0.0) {
                    return None;
                }
                value -= mu * g.value.ln();
                grad.axpy(-mu / g.value, &g.grad, 1.0);
                hess.ger(mu / (g.value * g.value), &g.grad, &g.grad, 1.0);
                hess -= &g.hess * (mu / g.value);
            }
            Some(Smooth { value, grad, hess })
        }
        Phase::Feasibility => {
            if constraints.is_empty() {
                return Some(Smooth { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) });
            }
            let scaled: Vec<f64> = constraints.iter().map(|g| -g.value / mu).collect();
            let top = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scaled.iter().map(|a| (a - top).exp()).collect();
            let total: f64 = weights.iter().sum();
            let value = mu * (top + total.ln());

            let mut mean_grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for (g, w) in constraints.iter().zip(&weights) {
                let pi = w / total;
                mean_grad.axpy(-pi, &g.grad, 1.0);
                hess -= &g.hess * pi;
                hess.ger(pi / mu, &g.grad, &g.grad, 1.0);
            }
            hess.ger(-1.0 / mu, &mean_grad, &mean_grad, 1.0);
            Some(Smooth { value, grad: mean_grad, hess })
        }
    }
}

/// A problem that can be re-centered for a given barrier weight.
pub(crate) trait Centering {
    type Point: Clone;

    /// Barrier degree `ν` of the optimality phase.
    fn degree(&self) -> f64;
    fn slacks(&self, x: &Self::Point) -> Vec<f64>;
    /// Damped Newton iterations on the merit; returns the centered point and
    /// the number of Newton steps taken.
    fn center(&self, x: Self::Point, phase: Phase, mu: f64, opts: &SolverOptions) -> (Self::Point, usize);
}

#[derive(Debug, Clone)]
pub(crate) struct PathResult<P> {
    pub point: P,
    pub mu: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct InfeasiblePath<P> {
    pub point: P,
    /// Index of the most violated constraint at the best point found.
    pub worst: usize,
    /// Its (nonpositive) slack.
    pub slack: f64,
}

pub(crate) fn worst_slack(slacks: &[f64]) -> (usize, f64) {
    slacks.iter().copied().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

/// Phase I (only if `x0` is not strictly feasible) followed by the central
/// path down to `ν μ < tol`.
pub(crate) fn follow_path<C: Centering>(
    problem: &C,
    x0: C::Point,
    opts: &SolverOptions,
) -> Result<PathResult<C::Point>, InfeasiblePath<C::Point>> {
    let mut x = x0;
    let mut iterations = 0;
    let degree = problem.degree().max(1.0);

    let (_, start_slack) = worst_slack(&problem.slacks(&x));
    if !(start_slack > 0.0) {
        let mut mu = opts.mu0;
        loop {
            let (next, n) = problem.center(x, Phase::Feasibility, mu, opts);
            x = next;
            iterations += n;
            let (worst, slack) = worst_slack(&problem.slacks(&x));
            if slack > 0.0 {
                break;
            }
            if degree * mu < opts.tol {
                return Err(InfeasiblePath { point: x, worst, slack });
            }
            mu *= opts.mu_shrink;
        }
    }

    let mut mu = opts.mu0;
    loop {
        let (next, n) = problem.center(x, Phase::Optimality, mu, opts);
        x = next;
        iterations += n;
        if degree * mu < opts.tol {
            break;
        }
        mu *= opts.mu_shrink;
    }
    Ok(PathResult { point: x, mu, iterations })
}

/// A smooth concave program over a real vector.
pub(crate) trait ConcaveProgram {
    fn dim(&self) -> usize;
    fn constraint_count(&self) -> usize;
    /// Concave objective to maximize.
    fn objective(&self, z: &DVector<f64>) -> Option<Smooth>;
    /// Concave constraint functions, each required to be `≥ 0`.
    fn constraints(&self, z: &DVector<f64>) -> Option<Vec<Smooth>>;
}

pub(crate) struct Dense<'a, P: ConcaveProgram>(pub &'a P);

impl<P: ConcaveProgram> Dense<'_, P> {
    fn merit_at(&self, z: &DVector<f64>, phase: Phase, mu: f64) -> Option<Smooth> {
        let cons = self.0.constraints(z)?;
        match phase {
            Phase::Optimality => merit(phase, mu, Some(&self.0.objective(z)?), &cons),
            Phase::Feasibility => merit(phase, mu, None, &cons),
        }
    }
}

impl<P: ConcaveProgram> Centering for Dense<'_, P> {
    type Point = DVector<f64>;

    fn degree(&self) -> f64 {
        self.0.constraint_count() as f64
    }

    fn slacks(&self, z: &DVector<f64>) -> Vec<f64> {
        self.0.constraints(z).map(|c| c.iter().map(|g| g.value).collect()).unwrap_or_else(|| vec![f64::NEG_INFINITY])
    }

    fn center(&self, mut z: DVector<f64>, phase: Phase, mu: f64, opts: &SolverOptions) -> (DVector<f64>, usize) {
        let mut steps = 0;
        while steps < opts.max_newton {
            let Some(m) = self.merit_at(&z, phase, mu) else { break };
            let dir = newton_direction(&m.hess, &m.grad);
            let slope = m.grad.dot(&dir);
            if -slope / 2.0 <= CENTERED {
                break;
            }
            steps += 1;
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > MIN_STEP {
                let trial = &z + &dir * alpha;
                if let Some(t) = self.merit_at(&trial, phase, mu) {
                    if t.value <= m.value + ARMIJO * alpha * slope {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (z, steps)
    }
}

/// Solves `H d = −g`, regularizing `H` if it is not numerically PD.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let n = grad.len();
    let scale = hess.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut shift = 0.0;
    loop {
        let shifted = hess + DMatrix::identity(n, n) * shift;
        if let Some(ch) = shifted.cholesky() {
            return -ch.solve(grad);
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        if shift > 1e6 * scale {
            return -grad.clone();
        }
    }
}
