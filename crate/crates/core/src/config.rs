//! System parameters.
//!
//! Everything inside [`SystemConfig`] is in SI units. The JSON form keeps the
//! customary logarithmic units for powers and the reference gain; they are
//! converted exactly once, when the document is deserialized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Position = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// `10^(dbm/10) / 1000` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemConfigFile", into = "SystemConfigFile")]
pub struct SystemConfig {
    /// N.
    pub ap_antennas: usize,
    /// M.
    pub irs_elements: usize,
    pub ap_position: Position,
    pub irs_position: Position,
    /// One entry per user; K is its length.
    pub ue_positions: Vec<Position>,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    /// G0 as a linear power gain at 1 m.
    pub reference_gain: f64,
    /// Pathloss exponent of the UE→AP link.
    pub exponent_direct: f64,
    /// Pathloss exponent of the IRS→AP link.
    pub exponent_irs_ap: f64,
    /// Pathloss exponent of the UE→IRS link.
    pub exponent_ue_irs: f64,
    /// Per-user cap on total consumed power.
    pub power_cap_w: f64,
    pub circuit_power_w: f64,
    pub cycles_per_bit: f64,
    /// Effective switched capacitance ε of the local CPU.
    pub capacitance: f64,
    /// Minimum total rate per user, bits/s.
    pub rate_threshold: f64,
    /// Relative EE change that stops the outer loop.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Extra UE→IRS distance in meters added to every user's IRS link.
    pub ue_irs_offset_m: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfigFile::default().try_into().expect("default configuration is valid")
    }
}

impl SystemConfig {
    pub fn users(&self) -> usize {
        self.ue_positions.len()
    }

    /// Power left for transmission and computation once circuit power is paid.
    pub fn power_budget(&self) -> f64 {
        self.power_cap_w - self.circuit_power_w
    }

    /// Highest CPU frequency the power cap allows with zero transmit power.
    pub fn max_frequency(&self) -> f64 {
        (self.power_budget().max(0.0) / self.capacitance).cbrt()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive and finite (got {v})"));
            }
        };
        positive("bandwidth_hz", self.bandwidth_hz);
        positive("noise_power", self.noise_power_w);
        positive("reference_gain", self.reference_gain);
        positive("exponent_direct", self.exponent_direct);
        positive("exponent_irs_ap", self.exponent_irs_ap);
        positive("exponent_ue_irs", self.exponent_ue_irs);
        positive("power_cap", self.power_cap_w);
        positive("circuit_power", self.circuit_power_w);
        positive("cycles_per_bit", self.cycles_per_bit);
        positive("capacitance", self.capacitance);

        if self.users() == 0 {
            problems.push("ue_positions must list at least one user".into());
        }
        if self.ap_antennas == 0 {
            problems.push("ap_antennas must be at least 1".into());
        }
        if self.irs_elements == 0 {
            problems.push("irs_elements must be at least 1".into());
        }
        if self.max_iterations == 0 {
            problems.push("max_iterations must be at least 1".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1.0) {
            problems.push(format!("tolerance must lie in (0, 1] (got {})", self.tolerance));
        }
        if !(self.rate_threshold >= 0.0 && self.rate_threshold.is_finite()) {
            problems.push(format!("rate_threshold must be nonnegative (got {})", self.rate_threshold));
        }
        if self.power_cap_w <= self.circuit_power_w {
            problems.push("power_cap must exceed circuit_power".into());
        }
        if !self.ue_irs_offset_m.is_finite() {
            problems.push("ue_irs_offset_m must be finite".into());
        }
        let all_positions = [self.ap_position, self.irs_position].into_iter().chain(self.ue_positions.iter().copied());
        if all_positions.flatten().any(|c| !c.is_finite()) {
            problems.push("positions must be finite".into());
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

/// On-disk form of [`SystemConfig`]. Missing fields take the reference
/// scenario values (two users, N = 4, M = 16).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfigFile {
    pub ap_antennas: usize,
    pub irs_elements: usize,
    pub ap_position: Position,
    pub irs_position: Position,
    pub ue_positions: Vec<Position>,
    pub bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub reference_gain_db: f64,
    pub exponent_direct: f64,
    pub exponent_irs_ap: f64,
    pub exponent_ue_irs: f64,
    pub power_cap_dbm: f64,
    pub circuit_power_dbm: f64,
    pub cycles_per_bit: f64,
    pub capacitance: f64,
    pub rate_threshold: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub ue_irs_offset_m: f64,
}

impl Default for SystemConfigFile {
    fn default() -> Self {
        Self {
            ap_antennas: 4,
            irs_elements: 16,
            ap_position: [5.0, 0.0, 20.0],
            irs_position: [0.0, 50.0, 2.0],
            ue_positions: vec![[5.0, 75.0, 5.0], [5.0, 50.0, 10.0]],
            bandwidth_hz: 1e6,
            noise_power_dbm: -105.0,
            reference_gain_db: -30.0,
            exponent_direct: 5.0,
            exponent_irs_ap: 3.5,
            exponent_ue_irs: 2.0,
            power_cap_dbm: 31.0,
            circuit_power_dbm: 23.0,
            cycles_per_bit: 1e3,
            capacitance: 1e-28,
            rate_threshold: 1e6,
            tolerance: 1e-3,
            max_iterations: 30,
            ue_irs_offset_m: 0.0,
        }
    }
}

impl TryFrom<SystemConfigFile> for SystemConfig {
    type Error = ConfigError;

    fn try_from(f: SystemConfigFile) -> Result<Self, Self::Error> {
        let cfg = SystemConfig {
            ap_antennas: f.ap_antennas,
            irs_elements: f.irs_elements,
            ap_position: f.ap_position,
            irs_position: f.irs_position,
            ue_positions: f.ue_positions,
            bandwidth_hz: f.bandwidth_hz,
            noise_power_w: dbm_to_watts(f.noise_power_dbm),
            reference_gain: db_to_linear(f.reference_gain_db),
            exponent_direct: f.exponent_direct,
            exponent_irs_ap: f.exponent_irs_ap,
            exponent_ue_irs: f.exponent_ue_irs,
            power_cap_w: dbm_to_watts(f.power_cap_dbm),
            circuit_power_w: dbm_to_watts(f.circuit_power_dbm),
            cycles_per_bit: f.cycles_per_bit,
            capacitance: f.capacitance,
            rate_threshold: f.rate_threshold,
            tolerance: f.tolerance,
            max_iterations: f.max_iterations,
            ue_irs_offset_m: f.ue_irs_offset_m,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<SystemConfig> for SystemConfigFile {
    fn from(c: SystemConfig) -> Self {
        Self {
            ap_antennas: c.ap_antennas,
            irs_elements: c.irs_elements,
            ap_position: c.ap_position,
            irs_position: c.irs_position,
            ue_positions: c.ue_positions,
            bandwidth_hz: c.bandwidth_hz,
            noise_power_dbm: watts_to_dbm(c.noise_power_w),
            reference_gain_db: linear_to_db(c.reference_gain),
            exponent_direct: c.exponent_direct,
            exponent_irs_ap: c.exponent_irs_ap,
            exponent_ue_irs: c.exponent_ue_irs,
            power_cap_dbm: watts_to_dbm(c.power_cap_w),
            circuit_power_dbm: watts_to_dbm(c.circuit_power_w),
            cycles_per_bit: c.cycles_per_bit,
            capacitance: c.capacitance,
            rate_threshold: c.rate_threshold,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
            ue_irs_offset_m: c.ue_irs_offset_m,
        }
    }
}
