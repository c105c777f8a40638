//! Barrier Newton method over block-diagonal Hermitian PSD variables.
//!
//! Solves
//!
//! ```text
//! maximize   f(s)
//! subject to g_k(s) ≥ 0,  X_b ⪰ 0,  ⟨A_i, X_{b_i}⟩ = 1
//! where      s_l = v_lᴴ X_{b_l} v_l
//! ```
//!
//! with `f`, `g_k` concave in `s` and every `A_i` either the identity
//! (unit trace) or a diagonal selector (unit diagonal entry). The objective
//! and constraints only see `X` through a handful of rank-one functionals,
//! so the Newton system reduces to one small dense solve of size
//! `#equalities + #functionals`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use super::barrier::{merit, Centering, Phase};
use super::SolverOptions;
use crate::numerics::{hermitian_part, CMatrix, CVector};
use crate::ratemodel::{LogAffine, Smooth};

const ARMIJO: f64 = 1e-2;
const CENTERED: f64 = 1e-11;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Equality {
    /// `Tr(X_b) = 1`.
    Trace,
    /// `(X_b)_{jj} = 1`.
    Diagonal(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Functional {
    pub block: usize,
    pub vector: CVector,
}

pub(crate) struct LiftedProgram<'a> {
    pub dims: Vec<usize>,
    pub equalities: Vec<(usize, Equality)>,
    pub functionals: Vec<Functional>,
    pub objective: &'a LogAffine,
    pub constraints: &'a [LogAffine],
}

fn quad_form(x: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(x * v)).re
}

fn eq_inner(eq: Equality, y: &CMatrix) -> f64 {
    match eq {
        Equality::Trace => y.trace().re,
        Equality::Diagonal(j) => y[(j, j)].re,
    }
}

struct Factored {
    chol: Vec<Cholesky<Complex64, Dyn>>,
    log_det: f64,
}

fn factor(x: &[CMatrix]) -> Option<Factored> {
    let mut chol = Vec::with_capacity(x.len());
    let mut log_det = 0.0;
    for xb in x {
        if xb.nrows() == 0 {
            chol.push(Cholesky::new(xb.clone())?);
            continue;
        }
        let c = Cholesky::new(xb.clone())?;
        let l = c.l_dirty();
        for i in 0..xb.nrows() {
            let d = l[(i, i)].re;
            if !(d > 0.0 && d.is_finite()) {
                return None;
            }
            log_det += 2.0 * d.ln();
        }
        chol.push(c);
    }
    Some(Factored { chol, log_det })
}

impl LiftedProgram<'_> {
    pub fn functional_values(&self, x: &[CMatrix]) -> Vec<f64> {
        self.functionals.iter().map(|f| quad_form(&x[f.block], &f.vector)).collect()
    }

    fn score(&self, s: &[f64], phase: Phase, mu: f64) -> Option<Smooth> {
        let cons: Vec<Smooth> = self.constraints.iter().map(|g| g.smooth(s)).collect::<Option<_>>()?;
        match phase {
            Phase::Optimality => merit(phase, mu, Some(&self.objective.smooth(s)?), &cons),
            Phase::Feasibility => {
                if cons.is_empty() {
                    let n = s.len();
                    return Some(Smooth { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) });
                }
                merit(phase, mu, None, &cons)
            }
        }
    }

    /// Merit including the `−μ log det` term, with the functional-space
    /// derivatives needed by the Newton step.
    fn evaluate(&self, x: &[CMatrix], phase: Phase, mu: f64) -> Option<(f64, Smooth, Factored)> {
        let f = factor(x)?;
        let s = self.functional_values(x);
        let sm = self.score(&s, phase, mu)?;
        Some((sm.value - mu * f.log_det, sm, f))
    }

    /// Rescales each block so the equality constraints hold exactly.
    fn restore_equalities(&self, x: &mut [CMatrix]) {
        for (b, xb) in x.iter_mut().enumerate() {
            let eqs: Vec<Equality> = self.equalities.iter().filter(|(blk, _)| *blk == b).map(|(_, e)| *e).collect();
            if eqs.contains(&Equality::Trace) {
                let tr = xb.trace().re;
                if tr > 0.0 {
                    *xb /= Complex64::new(tr, 0.0);
                }
            }
            let diag: Vec<usize> =
                eqs.iter().filter_map(|e| if let Equality::Diagonal(j) = e { Some(*j) } else { None }).collect();
            if !diag.is_empty() {
                let n = xb.nrows();
                let mut scale = vec![1.0; n];
                for &j in &diag {
                    let d = xb[(j, j)].re;
                    if d > 0.0 {
                        scale[j] = 1.0 / d.sqrt();
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        xb[(i, j)] *= scale[i] * scale[j];
                    }
                }
            }
            *xb = hermitian_part(xb);
        }
    }

    /// Newton direction for the merit at `x`, respecting the equalities.
    fn direction(&self, x: &[CMatrix], sm: &Smooth, mu: f64) -> Option<Vec<CMatrix>> {
        let m = self.equalities.len();
        let k = self.functionals.len();

        // X A_i X for each equality.
        let p: Vec<CMatrix> = self
            .equalities
            .iter()
            .map(|&(b, eq)| match eq {
                Equality::Trace => &x[b] * &x[b],
                Equality::Diagonal(j) => {
                    let col = x[b].column(j).into_owned();
                    &col * col.adjoint()
                }
            })
            .collect();
        // X C_l X = (X v)(X v)ᴴ.
        let r: Vec<CMatrix> = self
            .functionals
            .iter()
            .map(|f| {
                let xv = &x[f.block] * &f.vector;
                &xv * xv.adjoint()
            })
            .collect();
        // X G X, blockwise.
        let gamma: Vec<CMatrix> = x
            .iter()
            .enumerate()
            .map(|(b, xb)| {
                let mut g = xb * Complex64::new(-mu, 0.0);
                for (l, f) in self.functionals.iter().enumerate() {
                    if f.block == b {
                        g += &r[l] * Complex64::new(sm.grad[l], 0.0);
                    }
                }
                g
            })
            .collect();

        let fun_inner = |l: usize, b: usize, y: &CMatrix| -> f64 {
            let f = &self.functionals[l];
            if f.block == b {
                quad_form(y, &f.vector)
            } else {
                0.0
            }
        };
        let eq_in = |j: usize, b: usize, y: &CMatrix| -> f64 {
            let (blk, eq) = self.equalities[j];
            if blk == b {
                eq_inner(eq, y)
            } else {
                0.0
            }
        };

        // T[n,i] = ⟨C_n, P_i⟩, U[n,l] = ⟨C_n, R_l⟩, c[n] = ⟨C_n, Γ⟩.
        let t = DMatrix::from_fn(k, m, |n, i| fun_inner(n, self.equalities[i].0, &p[i]));
        let u = DMatrix::from_fn(k, k, |n, l| fun_inner(n, self.functionals[l].block, &r[l]));
        let c = DVector::from_fn(k, |n, _| fun_inner(n, self.functionals[n].block, &gamma[self.functionals[n].block]));
        let q = &sm.hess;
        let qt = q * &t;
        let qu = q * &u;
        let qc = q * &c;

        let dim = m + k;
        let mut lhs = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for j in 0..m {
            let bj = self.equalities[j].0;
            for i in 0..m {
                lhs[(j, i)] = eq_in(j, self.equalities[i].0, &p[i]);
            }
            for l in 0..k {
                lhs[(j, m + l)] = -eq_in(j, self.functionals[l].block, &r[l]);
            }
            rhs[j] = eq_in(j, bj, &gamma[bj]);
        }
        for row in 0..k {
            for i in 0..m {
                lhs[(m + row, i)] = -qt[(row, i)];
            }
            for l in 0..k {
                lhs[(m + row, m + l)] = qu[(row, l)] + if row == l { mu } else { 0.0 };
            }
            rhs[m + row] = -qc[row];
        }
        let sol = if dim == 0 { DVector::zeros(0) } else { lhs.lu().solve(&rhs)? };

        let inv_mu = Complex64::new(1.0 / mu, 0.0);
        let dir = gamma
            .iter()
            .enumerate()
            .map(|(b, g)| {
                let mut d = -g.clone();
                for (i, &(blk, _)) in self.equalities.iter().enumerate() {
                    if blk == b {
                        d += &p[i] * Complex64::new(sol[i], 0.0);
                    }
                }
                for (l, f) in self.functionals.iter().enumerate() {
                    if f.block == b {
                        d -= &r[l] * Complex64::new(sol[m + l], 0.0);
                    }
                }
                hermitian_part(&(d * inv_mu))
            })
            .collect();
        Some(dir)
    }
}

impl Centering for LiftedProgram<'_> {
    type Point = Vec<CMatrix>;

    fn degree(&self) -> f64 {
        (self.dims.iter().sum::<usize>() + self.constraints.len()) as f64
    }

    fn slacks(&self, x: &Vec<CMatrix>) -> Vec<f64> {
        let s = self.functional_values(x);
        self.constraints.iter().map(|g| g.value(&s)).collect()
    }

    fn center(&self, mut x: Vec<CMatrix>, phase: Phase, mu: f64, opts: &SolverOptions) -> (Vec<CMatrix>, usize) {
        let mut steps = 0;
        while steps < opts.max_newton {
            let Some((value, sm, fac)) = self.evaluate(&x, phase, mu) else { break };
            let Some(dir) = self.direction(&x, &sm, mu) else { break };

            // ⟨G, ΔX⟩ = Σ ψ_l ⟨C_l, ΔX⟩ − μ Σ Tr(X⁻¹ ΔX).
            let mut slope = 0.0;
            for (l, f) in self.functionals.iter().enumerate() {
                slope += sm.grad[l] * quad_form(&dir[f.block], &f.vector);
            }
            for (b, d) in dir.iter().enumerate() {
                if d.nrows() > 0 {
                    slope -= mu * fac.chol[b].solve(d).trace().re;
                }
            }
            if !slope.is_finite() || -slope / 2.0 <= CENTERED {
                break;
            }
            steps += 1;

            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > MIN_STEP {
                let trial: Vec<CMatrix> =
                    x.iter().zip(&dir).map(|(xb, d)| hermitian_part(&(xb + d * Complex64::new(alpha, 0.0)))).collect();
                if let Some((tv, _, _)) = self.evaluate(&trial, phase, mu) {
                    if tv <= value + ARMIJO * alpha * slope {
                        x = trial;
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
        self.restore_equalities(&mut x);
        (x, steps)
    }
}
