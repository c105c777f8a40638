//! Transmit power and CPU frequency block.
//!
//! With beams and IRS fixed every user sees a constant effective gain
//! `A_k`, so the block is a smooth concave program in `(p, f)`. Frequencies
//! are normalized as `f = f_max u`, which makes the power cap read
//! `1 − p/P − u³ ≥ 0` with `P` the per-user budget.

use nalgebra::{DMatrix, DVector};

use super::barrier::{follow_path, ConcaveProgram, Dense};
use super::{Block, SolverError, SolverOptions};
use crate::ratemodel::{Allocation, AuxState, LogAffine, RateModel, Smooth};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFreqSolution {
    pub power: Vec<f64>,
    pub frequency: Vec<f64>,
    /// `Σ R − η₁ Σ P` in bits/s, with offloading rates in surrogate-free form.
    pub objective: f64,
    /// Duality-gap bound at termination, nats.
    pub kkt_residual: f64,
    pub iterations: usize,
}

struct PowerFreqProgram {
    gains: Vec<f64>,
    objective: LogAffine,
    rates: Vec<LogAffine>,
    kappa: f64,
    /// `f_max / C`, local bits/s at `u = 1`.
    local_scale: f64,
    eta1: f64,
    budget: f64,
    local: bool,
}

impl PowerFreqProgram {
    fn users(&self) -> usize {
        self.gains.len()
    }

    fn snr(&self, z: &DVector<f64>) -> Vec<f64> {
        self.gains.iter().enumerate().map(|(k, a)| a * z[k]).collect()
    }

    /// Pulls an SNR-space function back to `z` (acts on the `p` block only).
    fn pull_back(&self, f: Smooth) -> Smooth {
        let k = self.users();
        let n = self.dim();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..k {
            grad[i] = self.gains[i] * f.grad[i];
            for j in 0..k {
                hess[(i, j)] = self.gains[i] * f.hess[(i, j)] * self.gains[j];
            }
        }
        Smooth { value: f.value, grad, hess }
    }

    fn linear(&self, value: f64, index: usize, slope: f64) -> Smooth {
        let n = self.dim();
        let mut grad = DVector::zeros(n);
        grad[index] = slope;
        Smooth { value, grad, hess: DMatrix::zeros(n, n) }
    }
}

impl ConcaveProgram for PowerFreqProgram {
    fn dim(&self) -> usize {
        if self.local {
            2 * self.users()
        } else {
            self.users()
        }
    }

    fn constraint_count(&self) -> usize {
        if self.local {
            4 * self.users()
        } else {
            3 * self.users()
        }
    }

    fn objective(&self, z: &DVector<f64>) -> Option<Smooth> {
        let k = self.users();
        let mut f = self.pull_back(self.objective.smooth(&self.snr(z))?);
        let price = self.kappa * self.eta1;
        for i in 0..k {
            f.value -= price * z[i];
            f.grad[i] -= price;
        }
        if self.local {
            for i in 0..k {
                let u = z[k + i].max(0.0);
                f.value += self.kappa * self.local_scale * z[k + i] - price * self.budget * u.powi(3);
                f.grad[k + i] += self.kappa * self.local_scale - 3.0 * price * self.budget * u * u;
                f.hess[(k + i, k + i)] -= 6.0 * price * self.budget * u;
            }
        }
        Some(f)
    }

    fn constraints(&self, z: &DVector<f64>) -> Option<Vec<Smooth>> {
        let k = self.users();
        let s = self.snr(z);
        let mut out = Vec::with_capacity(self.constraint_count());
        for (i, g) in self.rates.iter().enumerate() {
            let mut r = self.pull_back(g.smooth(&s)?);
            if self.local {
                r.value += self.kappa * self.local_scale * z[k + i];
                r.grad[k + i] += self.kappa * self.local_scale;
            }
            out.push(r);
        }
        for i in 0..k {
            let mut cap = self.linear(1.0 - z[i] / self.budget, i, -1.0 / self.budget);
            if self.local {
                let u = z[k + i].max(0.0);
                cap.value -= u.powi(3);
                cap.grad[k + i] = -3.0 * u * u;
                cap.hess[(k + i, k + i)] = -6.0 * u;
            }
            out.push(cap);
        }
        for i in 0..k {
            out.push(self.linear(z[i], i, 1.0));
        }
        if self.local {
            for i in 0..k {
                out.push(self.linear(z[k + i], k + i, 1.0));
            }
        }
        Some(out)
    }
}

/// Maximizes `Σ R − η₁ Σ P` over powers and frequencies subject to the
/// per-user power cap and the surrogate rate thresholds.
///
/// Beams and the IRS vector are taken from `alloc`. With `local_computing`
/// off every frequency is pinned to zero.
pub fn solve_power_freq(
    model: &RateModel,
    alloc: &Allocation,
    aux: &AuxState,
    local_computing: bool,
    opts: &SolverOptions,
) -> Result<PowerFreqSolution, SolverError> {
    let cfg = model.cfg;
    let k = model.users();
    let budget = cfg.power_budget();
    if !(budget > 0.0) {
        return Err(SolverError::Configuration("power cap must exceed circuit power".into()));
    }
    let kappa = 1.0 / model.nats_to_bits();
    let problem = model.rate_problem(aux, &vec![0.0; k]);
    let f_max = cfg.max_frequency();
    let program = PowerFreqProgram {
        gains: (0..k).map(|i| model.effective_gain(alloc, i)).collect(),
        objective: problem.objective,
        rates: problem.constraints,
        kappa,
        local_scale: f_max / cfg.cycles_per_bit,
        eta1: aux.eta1,
        budget,
        local: local_computing,
    };

    let mut z0 = DVector::from_element(program.dim(), 0.25 * budget);
    if local_computing {
        for i in 0..k {
            z0[k + i] = 0.25f64.cbrt();
        }
    }

    match follow_path(&Dense(&program), z0, opts) {
        Ok(res) => {
            let z = res.point;
            let power: Vec<f64> = (0..k).map(|i| z[i].max(0.0)).collect();
            let frequency: Vec<f64> =
                (0..k).map(|i| if local_computing { f_max * z[k + i].max(0.0) } else { 0.0 }).collect();
            let mut next = alloc.clone();
            next.power = power.clone();
            next.frequency = frequency.clone();
            let offload = program.objective.value(&model.snr_terms(&next));
            Ok(PowerFreqSolution {
                power,
                frequency,
                objective: model.block_objective(offload, &next, aux.eta1),
                kkt_residual: program.constraint_count() as f64 * res.mu,
                iterations: res.iterations,
            })
        }
        Err(bad) => {
            let slacks: Vec<f64> = program
                .constraints(&bad.point)
                .map(|c| c[..k].iter().map(|g| g.value).collect())
                .unwrap_or_else(|| vec![f64::NEG_INFINITY; k]);
            let (user, slack) = super::barrier::worst_slack(&slacks);
            Err(SolverError::Infeasible {
                block: Block::PowerFrequency,
                user,
                max_surrogate_rate: cfg.rate_threshold + slack / kappa,
                threshold: cfg.rate_threshold,
            })
        }
    }
}
