//! Transmit-power minimization for SWIPT-enabled hybrid TDMA-NOMA downlinks.
//!
//! Users are paired into NOMA groups that share a TDMA slot. Every user has a
//! minimum rate and a minimum harvested power, received signals are power
//! split between decoding and harvesting, and the base station picks squared
//! amplitudes `p²` and split ratios `β` to minimize `Σ p²`.
//!
//! * [`sysmodel`] places users and forms groups.
//! * [`metrics`] evaluates the exact (non-convex) model.
//! * [`sca`] is the successive convex approximation solver.
//! * [`tdma`] is the orthogonal baseline, solved exactly.
//! * [`oracle`] is a brute-force grid reference for small groups.

pub mod config;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod sca;
pub mod sysmodel;
pub mod tdma;
pub mod units;

pub use config::SystemConfig;
pub use error::ModelError;
pub use metrics::{DesignVariables, FeasibilityReport, Tolerances};
pub use sysmodel::SystemInstance;
