//! The proposed scheme and its comparison schemes on shared channels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::config::SystemConfig;
use crate::numerics::{stream_rng, Stream};
use crate::optimizer::{alternate, OptimizerError, RunTrace, Variant};
use crate::ratemodel::{Access, Allocation};
use crate::solvers::SolverOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// NOMA with local computing and an optimized IRS.
    #[serde(rename = "Efficiency-IRS")]
    Proposed,
    /// Equal-bandwidth FDMA, one shared IRS configuration.
    #[serde(rename = "OMA-IRS")]
    Oma,
    /// Everything offloaded, no local computing.
    #[serde(rename = "OnlyOff-IRS")]
    OnlyOff,
    /// Reflected path removed.
    #[serde(rename = "Efficiency-NoIRS")]
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Oma, Scheme::OnlyOff, Scheme::NoIrs];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Proposed => "Efficiency-IRS",
            Scheme::Oma => "OMA-IRS",
            Scheme::OnlyOff => "OnlyOff-IRS",
            Scheme::NoIrs => "Efficiency-NoIRS",
        }
    }

    pub fn variant(self) -> Variant {
        match self {
            Scheme::Proposed => Variant::PROPOSED,
            Scheme::Oma => Variant { access: Access::Fdma, ..Variant::PROPOSED },
            Scheme::OnlyOff => Variant { local_computing: false, ..Variant::PROPOSED },
            Scheme::NoIrs => Variant { optimize_irs: false, ..Variant::PROPOSED },
        }
    }

    /// Whether the scheme uses the reflected path at all.
    pub fn uses_irs(self) -> bool {
        self != Scheme::NoIrs
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub energy_efficiency: f64,
    pub sum_rate: f64,
    pub sum_power: f64,
    pub allocation: Allocation,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub trace: RunTrace,
}

/// Runs `scheme` on `real`; randomization draws come from `seed`'s
/// randomization stream.
pub fn run_scheme(
    scheme: Scheme,
    real: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SchemeResult, OptimizerError> {
    let mut rng = stream_rng(seed, Stream::Randomization);
    let stripped;
    let real = if scheme.uses_irs() {
        real
    } else {
        stripped = real.without_irs();
        &stripped
    };
    let out = alternate(real, cfg, scheme.variant(), opts, &mut rng)?;
    Ok(SchemeResult {
        scheme,
        energy_efficiency: out.energy_efficiency,
        sum_rate: out.sum_rate,
        sum_power: out.sum_power,
        allocation: out.allocation,
        iterations: out.iterations,
        converged: out.converged,
        feasible: out.feasible,
        trace: out.trace,
    })
}

pub fn run_proposed(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SchemeResult, OptimizerError> {
    run_scheme(Scheme::Proposed, real, cfg, opts, seed)
}

pub fn run_oma(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SchemeResult, OptimizerError> {
    run_scheme(Scheme::Oma, real, cfg, opts, seed)
}

pub fn run_onlyoff(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SchemeResult, OptimizerError> {
    run_scheme(Scheme::OnlyOff, real, cfg, opts, seed)
}

pub fn run_noirs(
    real: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolverOptions,
    seed: u64,
) -> Result<SchemeResult, OptimizerError> {
    run_scheme(Scheme::NoIrs, real, cfg, opts, seed)
}
