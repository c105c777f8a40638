//! Energy-efficient resource allocation for IRS-assisted NOMA uplinks with
//! mobile edge computing.
//!
//! [`optimizer::alternate`] runs the alternating power/frequency,
//! beamforming and IRS-phase optimization on one channel realization;
//! [`baselines`] wraps it into the comparison schemes and [`experiment`]
//! drives seeded sweeps that write CSV files.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod experiment;
pub mod numerics;
pub mod optimizer;
pub mod ratemodel;
pub mod solvers;

pub use baselines::{run_scheme, Scheme, SchemeResult};
pub use channel::{generate_channels, ChannelRealization};
pub use config::SystemConfig;
pub use experiment::{run_experiment, ExperimentReport, ExperimentSpec};
pub use optimizer::{alternate, RunOutcome, Variant};
pub use ratemodel::{Access, Allocation, RateModel};
pub use solvers::SolverOptions;
