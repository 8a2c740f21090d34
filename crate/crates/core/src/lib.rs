//! Transmit-power minimization for IRS-assisted SWIPT-NOMA downlinks.

pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod conic;
pub mod config;
pub mod error;
pub mod experiments;
pub mod jdbpr;
pub mod model;
pub mod phase_shift;
pub mod power_split;
pub mod rng;
pub mod sca;
pub mod stage1;
pub mod trace;
pub mod units;

#[cfg(test)]
mod testutil;

pub use config::SystemConfig;
pub use error::{Error, Result};
