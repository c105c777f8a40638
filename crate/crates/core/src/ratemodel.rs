//! Closed-form rates, powers, and energy efficiency.
//!
//! Everything the solvers touch is expressed through the per-user received
//! SNR `s_k = a₀ p_k |w̄ᴴ H̄_k m_k|²` with `a₀ = 1/σ²`. Rates in nats are
//! converted to bits/s with the single factor `B / ln 2`.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::numerics::CVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("log-bound argument must be positive (got {0})")]
    NonPositiveArgument(f64),
}

/// How the users share the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Access {
    /// Full band, successive interference cancellation in `sic_order`.
    Noma,
    /// Equal subbands `B/K`, each with noise `σ²/K`.
    Fdma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Offload transmit power per user (W).
    pub power: Vec<f64>,
    /// Local CPU frequency per user (cycles/s).
    pub frequency: Vec<f64>,
    /// Unit-norm receive beam per user, length N.
    pub beams: Vec<CVector>,
    /// Lifted IRS vector `w̄`, length M+1, unit-modulus entries.
    pub irs: CVector,
}

impl Allocation {
    pub fn users(&self) -> usize {
        self.power.len()
    }

    /// Checks the structural invariants (nonnegative powers, unit-norm beams,
    /// unit-modulus IRS entries) to `tol`.
    pub fn is_well_formed(&self, tol: f64) -> bool {
        self.power.iter().all(|&p| p >= 0.0)
            && self.frequency.iter().all(|&f| f >= 0.0)
            && self.beams.iter().all(|m| (m.norm() - 1.0).abs() <= tol)
            && self.irs.iter().all(|w| (w.norm() - 1.0).abs() <= tol)
    }
}

/// Log-bound multipliers and the Dinkelbach ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxState {
    pub t: Vec<f64>,
    pub eta1: f64,
}

pub fn local_rate(frequency: f64, cycles_per_bit: f64) -> f64 {
    frequency / cycles_per_bit
}

/// `p + ε f³ + P_cn`.
pub fn total_power(alloc: &Allocation, cfg: &SystemConfig, user: usize) -> f64 {
    alloc.power[user] + cfg.capacitance * alloc.frequency[user].powi(3) + cfg.circuit_power_w
}

/// Maximizer `t = 1/x` of `φ(t) = −t x + ln t + 1`.
pub fn lemma1_update(x: f64) -> Result<f64, RateError> {
    if !(x > 0.0) {
        return Err(RateError::NonPositiveArgument(x));
    }
    Ok(1.0 / x)
}

pub fn lemma1_phi(t: f64, x: f64) -> f64 {
    -t * x + t.ln() + 1.0
}

/// `Σ_j α_j ln(1 + u_jᵀ s) − vᵀ s + c` over the SNR vector `s`.
///
/// Concave whenever every `α_j ≥ 0`; `u_j ≥ 0` keeps it finite on `s ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogAffine {
    pub logs: Vec<(f64, Vec<f64>)>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

/// Value, gradient, and Hessian of a scalar function.
#[derive(Debug, Clone)]
pub struct Smooth {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl LogAffine {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        let mut v = self.constant - dot(&self.linear, s);
        for (alpha, u) in &self.logs {
            v += alpha * (1.0 + dot(u, s)).ln();
        }
        v
    }

    /// `None` outside the domain `1 + uᵀs > 0`.
    pub fn smooth(&self, s: &[f64]) -> Option<Smooth> {
        let n = self.dim();
        let mut value = self.constant - dot(&self.linear, s);
        let mut grad = DVector::from_iterator(n, self.linear.iter().map(|v| -v));
        let mut hess = DMatrix::zeros(n, n);
        for (alpha, u) in &self.logs {
            let arg = 1.0 + dot(u, s);
            if !(arg > 0.0) {
                return None;
            }
            value += alpha * arg.ln();
            let uv = DVector::from_column_slice(u);
            grad.axpy(alpha / arg, &uv, 1.0);
            hess.ger(-alpha / (arg * arg), &uv, &uv, 1.0);
        }
        Some(Smooth { value, grad, hess })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The objective and per-user rate constraints of one block, in nats, as
/// functions of the SNR vector.
///
/// `objective(s)` is the offload sum rate divided by `B/ln2`;
/// `constraints[k](s) ≥ 0` is user k's (surrogate) rate requirement with
/// the supplied local rate already moved into the constant.
#[derive(Debug, Clone)]
pub struct RateProblem {
    pub objective: LogAffine,
    pub constraints: Vec<LogAffine>,
}

/// Rate and power evaluation bound to one realization and access scheme.
#[derive(Debug, Clone, Copy)]
pub struct RateModel<'a> {
    pub cfg: &'a SystemConfig,
    pub real: &'a ChannelRealization,
    pub access: Access,
    a0: f64,
}

impl<'a> RateModel<'a> {
    pub fn new(cfg: &'a SystemConfig, real: &'a ChannelRealization, access: Access) -> Self {
        Self { cfg, real, access, a0: 1.0 / cfg.noise_power_w }
    }

    pub fn users(&self) -> usize {
        self.real.users()
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// `B / ln 2`.
    pub fn nats_to_bits(&self) -> f64 {
        self.cfg.bandwidth_hz / LN_2
    }

    pub fn gain(&self, alloc: &Allocation, user: usize) -> Complex64 {
        self.real
            .composite_gain(user, &alloc.irs, &alloc.beams[user])
            .expect("allocation dimensions match the realization")
    }

    /// `A_k = a₀ |w̄ᴴ H̄_k m_k|²`.
    pub fn effective_gain(&self, alloc: &Allocation, user: usize) -> f64 {
        self.a0 * self.gain(alloc, user).norm_sqr()
    }

    /// `s_k = p_k A_k` for every user.
    pub fn snr_terms(&self, alloc: &Allocation) -> Vec<f64> {
        (0..self.users()).map(|k| alloc.power[k] * self.effective_gain(alloc, k)).collect()
    }

    /// `1 + Σ_{i decoded before k} s_i` (always 1 without SIC).
    pub fn interference_plus_one(&self, s: &[f64], user: usize) -> f64 {
        match self.access {
            Access::Noma => {
                let pos = self.real.sic_position(user);
                1.0 + self.real.sic_order[..pos].iter().map(|&i| s[i]).sum::<f64>()
            }
            Access::Fdma => 1.0,
        }
    }

    pub fn sinr(&self, alloc: &Allocation, user: usize) -> f64 {
        let s = self.snr_terms(alloc);
        match self.access {
            Access::Noma => s[user] / self.interference_plus_one(&s, user),
            Access::Fdma => self.users() as f64 * s[user],
        }
    }

    fn share(&self) -> f64 {
        match self.access {
            Access::Noma => 1.0,
            Access::Fdma => 1.0 / self.users() as f64,
        }
    }

    pub fn offload_rate(&self, alloc: &Allocation, user: usize) -> f64 {
        self.share() * self.cfg.bandwidth_hz * (1.0 + self.sinr(alloc, user)).log2()
    }

    pub fn offload_rates(&self, alloc: &Allocation) -> Vec<f64> {
        (0..self.users()).map(|k| self.offload_rate(alloc, k)).collect()
    }

    pub fn local_rates(&self, alloc: &Allocation) -> Vec<f64> {
        alloc.frequency.iter().map(|&f| local_rate(f, self.cfg.cycles_per_bit)).collect()
    }

    /// Offload plus local rate for each user.
    pub fn total_rates(&self, alloc: &Allocation) -> Vec<f64> {
        self.offload_rates(alloc).iter().zip(self.local_rates(alloc)).map(|(a, b)| a + b).collect()
    }

    pub fn sum_rate(&self, alloc: &Allocation) -> f64 {
        self.total_rates(alloc).iter().sum()
    }

    pub fn sum_power(&self, alloc: &Allocation) -> f64 {
        (0..self.users()).map(|k| total_power(alloc, self.cfg, k)).sum()
    }

    pub fn energy_efficiency(&self, alloc: &Allocation) -> f64 {
        self.sum_rate(alloc) / self.sum_power(alloc)
    }

    /// Lower bound on user k's offload rate from `−ln x ≥ ln t + 1 − t·x`, tight at `t_k = 1/x`.
    pub fn surrogate_rate(&self, alloc: &Allocation, aux: &AuxState, user: usize) -> f64 {
        let s = self.snr_terms(alloc);
        match self.access {
            Access::Noma => {
                let before = self.interference_plus_one(&s, user);
                let t = aux.t[user];
                self.nats_to_bits() * ((before + s[user]).ln() + t.ln() + 1.0 - t * before)
            }
            Access::Fdma => self.offload_rate(alloc, user),
        }
    }

    /// Tight multipliers `t_k = 1 / (1 + interference_k)` at `alloc`.
    pub fn lemma1_multipliers(&self, alloc: &Allocation) -> Vec<f64> {
        let s = self.snr_terms(alloc);
        (0..self.users())
            .map(|k| lemma1_update(self.interference_plus_one(&s, k)).expect("argument is at least 1"))
            .collect()
    }

    /// Block objective and rate constraints over `s`.
    ///
    /// `local` holds each user's fixed local rate (bits/s); pass zeros when
    /// the caller optimizes local computing itself.
    pub fn rate_problem(&self, aux: &AuxState, local: &[f64]) -> RateProblem {
        let k = self.users();
        let kappa = 1.0 / self.nats_to_bits();
        let rth = self.cfg.rate_threshold;
        match self.access {
            Access::Noma => {
                let objective = LogAffine { logs: vec![(1.0, vec![1.0; k])], linear: vec![0.0; k], constant: 0.0 };
                let constraints = (0..k)
                    .map(|user| {
                        let pos = self.real.sic_position(user);
                        let upto: Vec<f64> =
                            (0..k).map(|i| if self.real.sic_position(i) <= pos { 1.0 } else { 0.0 }).collect();
                        let t = aux.t[user];
                        let before: Vec<f64> =
                            (0..k).map(|i| if self.real.sic_position(i) < pos { t } else { 0.0 }).collect();
                        LogAffine {
                            logs: vec![(1.0, upto)],
                            linear: before,
                            constant: t.ln() + 1.0 - t + kappa * (local[user] - rth),
                        }
                    })
                    .collect();
                RateProblem { objective, constraints }
            }
            Access::Fdma => {
                let share = 1.0 / k as f64;
                let unit =
                    |user: usize| -> Vec<f64> { (0..k).map(|i| if i == user { k as f64 } else { 0.0 }).collect() };
                let objective = LogAffine {
                    logs: (0..k).map(|user| (share, unit(user))).collect(),
                    linear: vec![0.0; k],
                    constant: 0.0,
                };
                let constraints = (0..k)
                    .map(|user| LogAffine {
                        logs: vec![(share, unit(user))],
                        linear: vec![0.0; k],
                        constant: kappa * (local[user] - rth),
                    })
                    .collect();
                RateProblem { objective, constraints }
            }
        }
    }

    /// `Σ R − η₁ Σ P` in bits/s for a block whose offload part is
    /// `objective(s)` in nats.
    pub fn block_objective(&self, offload_nats: f64, alloc: &Allocation, eta1: f64) -> f64 {
        self.nats_to_bits() * offload_nats + self.local_rates(alloc).iter().sum::<f64>() - eta1 * self.sum_power(alloc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate_channels;
    use crate::numerics::{standard_cgauss_vec, stream_rng, CMatrix, Stream};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Single-antenna, no-IRS realization with the given direct amplitudes.
    fn scalar_real(amps: &[f64]) -> ChannelRealization {
        ChannelRealization::from_links(
            amps.iter().map(|&a| CVector::from_vec(vec![c(a, 0.0)])).collect(),
            vec![CVector::zeros(0); amps.len()],
            CMatrix::zeros(0, 1),
        )
        .unwrap()
    }

    fn scalar_alloc(power: &[f64], freq: &[f64]) -> Allocation {
        Allocation {
            power: power.to_vec(),
            frequency: freq.to_vec(),
            beams: vec![CVector::from_vec(vec![c(1.0, 0.0)]); power.len()],
            irs: CVector::from_vec(vec![c(1.0, 0.0)]),
        }
    }

    fn random_instance(seed: u64) -> (SystemConfig, ChannelRealization, Allocation) {
        let cfg = SystemConfig { ap_antennas: 3, irs_elements: 4, ..SystemConfig::default() };
        let real = generate_channels(&cfg, &mut stream_rng(seed, Stream::Fading)).unwrap();
        let mut rng = stream_rng(seed, Stream::Init);
        let beams = (0..2)
            .map(|_| {
                let v = standard_cgauss_vec(3, &mut rng);
                &v / c(v.norm(), 0.0)
            })
            .collect();
        let irs = CVector::from_fn(5, |_, _| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU));
        let alloc = Allocation {
            power: vec![rng.random::<f64>(), rng.random::<f64>()],
            frequency: vec![rng.random::<f64>() * 1e9, rng.random::<f64>() * 1e9],
            beams,
            irs,
        };
        (cfg, real, alloc)
    }

    #[test]
    fn single_user_unit_sinr() {
        let cfg = SystemConfig::default();
        let real = scalar_real(&[cfg.noise_power_w.sqrt()]);
        let model = RateModel::new(&cfg, &real, Access::Noma);
        let alloc = scalar_alloc(&[1.0], &[0.0]);
        assert_relative_eq!(model.sinr(&alloc, 0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(model.offload_rate(&alloc, 0), 1e6, max_relative = 1e-12);
        assert_relative_eq!(model.effective_gain(&alloc, 0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_power_zero_sinr() {
        let cfg = SystemConfig::default();
        let real = scalar_real(&[1e-6, 2e-6]);
        let model = RateModel::new(&cfg, &real, Access::Noma);
        let alloc = scalar_alloc(&[0.0, 0.3], &[0.0, 0.0]);
        assert_eq!(model.sinr(&alloc, 0), 0.0);
        assert_eq!(model.offload_rate(&alloc, 0), 0.0);
    }

    #[test]
    fn sinr_three_gives_two_bits() {
        let cfg = SystemConfig::default();
        let real = scalar_real(&[(3.0 * cfg.noise_power_w).sqrt()]);
        let model = RateModel::new(&cfg, &real, Access::Noma);
        let alloc = scalar_alloc(&[1.0], &[0.0]);
        assert_relative_eq!(model.offload_rate(&alloc, 0), 2e6, max_relative = 1e-12);
    }

    #[test]
    fn sinr_matches_explicit_phase_matrix() {
        for seed in 0..10 {
            let (cfg, real, alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            // Θ with e^{jθ_m} = conj(w̄_m / w̄_{M+1}).
            let m = cfg.irs_elements;
            let theta =
                CMatrix::from_fn(m, m, |i, j| if i == j { (alloc.irs[i] / alloc.irs[m]).conj() } else { c(0.0, 0.0) });
            let received: Vec<f64> = (0..2)
                .map(|k| {
                    let row = real.direct[k].adjoint() + real.ue_irs[k].adjoint() * &theta * &real.irs_ap;
                    alloc.power[k] * (row * &alloc.beams[k])[(0, 0)].norm_sqr()
                })
                .collect();
            let (weak, strong) = (real.sic_order[0], real.sic_order[1]);
            let sigma2 = cfg.noise_power_w;
            assert_relative_eq!(model.sinr(&alloc, weak), received[weak] / sigma2, max_relative = 1e-9);
            assert_relative_eq!(
                model.sinr(&alloc, strong),
                received[strong] / (received[weak] + sigma2),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn local_rate_values() {
        assert_eq!(local_rate(1e9, 1e3), 1e6);
        assert_eq!(local_rate(0.0, 1e3), 0.0);
        assert_eq!(local_rate(2.5e9, 1e3), 2.5e6);
    }

    #[test]
    fn total_power_values() {
        let cfg = SystemConfig::default();
        let idle = scalar_alloc(&[0.0], &[0.0]);
        assert_relative_eq!(total_power(&idle, &cfg, 0), 0.19953, max_relative = 1e-4);
        let busy = scalar_alloc(&[0.5], &[1e9]);
        assert_relative_eq!(cfg.capacitance * 1e27, 0.1, max_relative = 1e-12);
        assert_relative_eq!(total_power(&busy, &cfg, 0), 0.79953, max_relative = 1e-4);
    }

    #[test]
    fn energy_efficiency_simple_ratio() {
        // 1 bit/s offload-free, local only: f/C = 1e6 bits/s at P = 1 W.
        let cfg = SystemConfig { circuit_power_w: 0.9, ..SystemConfig::default() };
        let real = scalar_real(&[0.0]);
        let model = RateModel::new(&cfg, &real, Access::Noma);
        let alloc = scalar_alloc(&[0.0], &[1e9]);
        assert_relative_eq!(model.energy_efficiency(&alloc), 1e6, max_relative = 1e-12);
        let doubled = SystemConfig { cycles_per_bit: 500.0, ..cfg.clone() };
        let model2 = RateModel::new(&doubled, &real, Access::Noma);
        assert_relative_eq!(model2.energy_efficiency(&alloc), 2e6, max_relative = 1e-12);
    }

    #[test]
    fn energy_efficiency_term_by_term() {
        for seed in 0..10 {
            let (cfg, real, alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            let mut rate = 0.0;
            let mut power = 0.0;
            for k in 0..2 {
                let g = real.composite_gain(k, &alloc.irs, &alloc.beams[k]).unwrap().norm_sqr();
                let interference: f64 = real.sic_order[..real.sic_position(k)]
                    .iter()
                    .map(|&i| alloc.power[i] * real.composite_gain(i, &alloc.irs, &alloc.beams[i]).unwrap().norm_sqr())
                    .sum();
                let gamma = alloc.power[k] * g / (interference + cfg.noise_power_w);
                rate += cfg.bandwidth_hz * (1.0 + gamma).log2() + alloc.frequency[k] / cfg.cycles_per_bit;
                power += alloc.power[k] + cfg.capacitance * alloc.frequency[k].powi(3) + cfg.circuit_power_w;
            }
            assert_relative_eq!(model.energy_efficiency(&alloc), rate / power, max_relative = 1e-9);
        }
    }

    #[test]
    fn log_bound_examples() {
        assert_eq!(lemma1_update(1.0).unwrap(), 1.0);
        assert_eq!(lemma1_phi(1.0, 1.0), 0.0);
        assert_eq!(lemma1_update(2.0).unwrap(), 0.5);
        assert_relative_eq!(lemma1_phi(0.5, 2.0), -LN_2, max_relative = 1e-15);
        let e = std::f64::consts::E;
        assert_relative_eq!(lemma1_update(e).unwrap(), 1.0 / e, max_relative = 1e-15);
        assert_relative_eq!(lemma1_phi(1.0 / e, e), -1.0, max_relative = 1e-15);
        assert!(lemma1_update(0.0).is_err());
        assert!(lemma1_update(-1.0).is_err());
    }

    #[test]
    fn log_bound_tight_on_log_grid() {
        for i in 0..=60 {
            let x = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
            let t = lemma1_update(x).unwrap();
            assert!((lemma1_phi(t, x) + x.ln()).abs() <= 1e-9);
            for factor in [0.5, 0.9, 1.1, 2.0] {
                assert!(lemma1_phi(t * factor, x) <= lemma1_phi(t, x));
            }
        }
    }

    #[test]
    fn surrogate_tight_and_majorized() {
        for seed in 0..100 {
            let (cfg, real, alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            let t = model.lemma1_multipliers(&alloc);
            let aux = AuxState { t: t.clone(), eta1: 0.0 };
            for k in 0..2 {
                let exact = model.offload_rate(&alloc, k);
                let sur = model.surrogate_rate(&alloc, &aux, k);
                assert!((sur - exact).abs() <= 1e-9 * exact.max(1.0), "seed {seed}");
                for factor in [0.3, 0.8, 1.5, 4.0] {
                    let mut other = aux.clone();
                    other.t[k] *= factor;
                    assert!(model.surrogate_rate(&alloc, &other, k) <= exact + 1e-9 * exact);
                }
            }
        }
    }

    #[test]
    fn surrogate_grid_max_matches_rate() {
        for seed in 0..5 {
            let (cfg, real, alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            for k in 0..2 {
                let exact = model.offload_rate(&alloc, k);
                let best = (0..=20_000)
                    .map(|i| {
                        let t = 10f64.powf(-3.0 + 6.0 * i as f64 / 20_000.0);
                        let mut aux = AuxState { t: vec![1.0; 2], eta1: 0.0 };
                        aux.t[k] = t;
                        model.surrogate_rate(&alloc, &aux, k)
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((best - exact).abs() <= 1e-4 * exact.max(1.0), "{best} vs {exact}");
            }
        }
    }

    #[test]
    fn telescoped_sum_equals_single_log() {
        for seed in 0..20 {
            let (cfg, real, alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            let s = model.snr_terms(&alloc);
            let single = model.nats_to_bits() * (1.0 + s.iter().sum::<f64>()).ln();
            let sum: f64 = model.offload_rates(&alloc).iter().sum();
            assert_relative_eq!(sum, single, max_relative = 1e-12);
            let problem = model.rate_problem(&AuxState { t: vec![1.0; 2], eta1: 0.0 }, &[0.0; 2]);
            assert_relative_eq!(problem.objective.value(&s) * model.nats_to_bits(), single, max_relative = 1e-12);
        }
    }

    #[test]
    fn rate_problem_constraints_match_surrogate() {
        for seed in 0..20 {
            let (cfg, real, alloc) = random_instance(seed);
            for access in [Access::Noma, Access::Fdma] {
                let model = RateModel::new(&cfg, &real, access);
                let aux = AuxState { t: vec![0.7, 1.3], eta1: 0.0 };
                let local = model.local_rates(&alloc);
                let problem = model.rate_problem(&aux, &local);
                let s = model.snr_terms(&alloc);
                for k in 0..2 {
                    let want = model.surrogate_rate(&alloc, &aux, k) + local[k] - cfg.rate_threshold;
                    let got = problem.constraints[k].value(&s) * model.nats_to_bits();
                    assert!((want - got).abs() <= 1e-9 * want.abs().max(1.0), "{access:?}");
                }
            }
        }
    }

    #[test]
    fn log_affine_derivatives_match_finite_differences() {
        let f = LogAffine {
            logs: vec![(1.0, vec![1.0, 2.0]), (0.5, vec![0.0, 3.0])],
            linear: vec![0.3, 0.1],
            constant: 0.2,
        };
        let s = [0.7, 1.1];
        let sm = f.smooth(&s).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut up = s;
            let mut dn = s;
            up[i] += h;
            dn[i] -= h;
            let fd = (f.value(&up) - f.value(&dn)) / (2.0 * h);
            assert_relative_eq!(sm.grad[i], fd, max_relative = 1e-6);
            let gup = f.smooth(&up).unwrap().grad;
            let gdn = f.smooth(&dn).unwrap().grad;
            for j in 0..2 {
                assert_relative_eq!(sm.hess[(j, i)], (gup[j] - gdn[j]) / (2.0 * h), max_relative = 1e-5);
            }
        }
        assert!(f.smooth(&[-5.0, 0.0]).is_none());
    }

    #[test]
    fn fdma_splits_band_and_noise() {
        let cfg = SystemConfig::default();
        let amp = cfg.noise_power_w.sqrt();
        let real = scalar_real(&[amp, amp]);
        let model = RateModel::new(&cfg, &real, Access::Fdma);
        let alloc = scalar_alloc(&[1.0, 1.0], &[0.0, 0.0]);
        // SNR per subband 2·1 = 2; rate (B/2) log2(3).
        for k in 0..2 {
            assert_relative_eq!(model.sinr(&alloc, k), 2.0, max_relative = 1e-12);
            assert_relative_eq!(model.offload_rate(&alloc, k), 0.5e6 * 3f64.log2(), max_relative = 1e-12);
        }
    }

    #[test]
    fn single_user_fdma_equals_noma() {
        let cfg = SystemConfig { ue_positions: vec![[5.0, 50.0, 10.0]], ..SystemConfig::default() };
        let real = generate_channels(&cfg, &mut stream_rng(1, Stream::Fading)).unwrap();
        let alloc = Allocation {
            power: vec![0.3],
            frequency: vec![1e8],
            beams: vec![CVector::from_element(4, c(0.5, 0.0))],
            irs: CVector::from_element(17, c(1.0, 0.0)),
        };
        let a = RateModel::new(&cfg, &real, Access::Noma).energy_efficiency(&alloc);
        let b = RateModel::new(&cfg, &real, Access::Fdma).energy_efficiency(&alloc);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn sum_rate_invariant_to_irs_global_phase(seed in 0u64..500, phase in 0.0f64..std::f64::consts::TAU) {
            let (cfg, real, mut alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            let before: f64 = model.offload_rates(&alloc).iter().sum();
            alloc.irs *= Complex64::from_polar(1.0, phase);
            let after: f64 = model.offload_rates(&alloc).iter().sum();
            prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
        }

        #[test]
        fn offload_rate_nondecreasing_in_own_power(seed in 0u64..500, bump in 0.0f64..2.0) {
            let (cfg, real, mut alloc) = random_instance(seed);
            let model = RateModel::new(&cfg, &real, Access::Noma);
            for k in 0..2 {
                let before = model.offload_rate(&alloc, k);
                alloc.power[k] += bump;
                prop_assert!(model.offload_rate(&alloc, k) >= before);
                alloc.power[k] -= bump;
            }
        }
    }
}
