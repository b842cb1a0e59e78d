//! Exact evaluators for the non-convex model: SINR after successive
//! interference cancellation, rates, harvested power and feasibility.
//!
//! Order indices are 0-based within a group; index 0 is the strongest user.
//! Receiver `m` decodes message `d ≥ m` after cancelling every message
//! weaker than `d`, so the interference left is the power of messages
//! `s < d`.

use crate::config::SystemConfig;
use crate::error::ModelError;
use crate::sysmodel::SystemInstance;

/// Per-user squared amplitudes `p²` (W) and split ratios `β`, indexed by
/// user.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVariables {
    pub power: Vec<f64>,
    pub split: Vec<f64>,
}

impl DesignVariables {
    pub fn zeros(users: usize) -> Self {
        Self { power: vec![0.0; users], split: vec![0.0; users] }
    }

    pub fn total_power(&self) -> f64 {
        total_transmit_power(self)
    }

    /// Gathers the entries of `users` in order.
    pub fn restrict(&self, users: &[usize]) -> (Vec<f64>, Vec<f64>) {
        (
            users.iter().map(|&u| self.power[u]).collect(),
            users.iter().map(|&u| self.split[u]).collect(),
        )
    }
}

/// One group's gains and decision variables in NOMA order.
#[derive(Debug, Clone, Copy)]
pub struct GroupView<'a> {
    pub gains: &'a [f64],
    pub power: &'a [f64],
    pub split: &'a [f64],
    pub slot_time: f64,
}

impl GroupView<'_> {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

fn sinr_unchecked(m: usize, d: usize, g: &GroupView, cfg: &SystemConfig) -> f64 {
    let bh = g.split[m] * g.gains[m];
    let interference: f64 = g.power[..d].iter().sum();
    let num = bh * g.power[d];
    if num == 0.0 {
        return 0.0;
    }
    num / (bh * interference + g.split[m] * cfg.noise_antenna + cfg.noise_id)
}

/// SINR of message `d` at receiver `m`.
pub fn sinr_decode(m: usize, d: usize, group: &GroupView, cfg: &SystemConfig) -> Result<f64, ModelError> {
    if m > d {
        return Err(ModelError::DecodeOrder { receiver: m, message: d });
    }
    Ok(sinr_unchecked(m, d, group, cfg))
}

/// Message `j` must be decodable at user `j` and at every stronger user that
/// cancels it, so the worst receiver sets its SINR.
pub fn effective_sinr(j: usize, group: &GroupView, cfg: &SystemConfig) -> f64 {
    (0..=j).map(|m| sinr_unchecked(m, j, group, cfg)).fold(f64::INFINITY, f64::min)
}

/// Achieved rate (bit/Hz) of user `j` over its slot.
pub fn rate(j: usize, group: &GroupView, cfg: &SystemConfig) -> f64 {
    group.slot_time * effective_sinr(j, group, cfg).ln_1p() / std::f64::consts::LN_2
}

/// Harvested power (W) of user `j`: η(1 − β_j)|h_j|² Σ_s p²_s.
pub fn harvested_power(j: usize, group: &GroupView, cfg: &SystemConfig) -> f64 {
    let received: f64 = group.power.iter().sum();
    cfg.eh_efficiency * (1.0 - group.split[j]) * group.gains[j] * received
}

pub fn total_transmit_power(vars: &DesignVariables) -> f64 {
    vars.power.iter().sum()
}

/// Per-family feasibility tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// bit/Hz
    pub rate: f64,
    /// Harvest tolerance relative to P^min.
    pub harvest_rel: f64,
    /// Harvest tolerance (W) used when P^min = 0.
    pub harvest_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rate: 1e-9, harvest_rel: 1e-6, harvest_abs: 1e-15 }
    }
}

impl Tolerances {
    pub fn harvest(&self, min_harvest: f64) -> f64 {
        if min_harvest > 0.0 {
            self.harvest_rel * min_harvest
        } else {
            self.harvest_abs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Per user, `rate − R^min` (bit/Hz).
    pub rate_slack: Vec<f64>,
    /// Per user, `harvested − P^min` (W).
    pub harvest_slack: Vec<f64>,
    /// Per group, the largest `p²_j − p²_{j+1}` clipped at 0 (W).
    pub sic_violation: Vec<f64>,
    /// Largest excursion of any β outside [0, 1].
    pub beta_violation: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn min_rate_slack(&self) -> f64 {
        self.rate_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_harvest_slack(&self) -> f64 {
        self.harvest_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_sic_violation(&self) -> f64 {
        self.sic_violation.iter().copied().fold(0.0, f64::max)
    }
}

fn sic_violation(power: &[f64]) -> f64 {
    power.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
}

fn beta_violation(split: &[f64]) -> f64 {
    split
        .iter()
        .map(|&b| if b.is_nan() { f64::INFINITY } else { (-b).max(b - 1.0).max(0.0) })
        .fold(0.0, f64::max)
}

/// Checks every rate, harvest, SIC-ordering and split-bound constraint of the
/// exact model. SIC ordering and β bounds get no tolerance.
pub fn check_feasible(
    instance: &SystemInstance,
    vars: &DesignVariables,
    cfg: &SystemConfig,
    tol: &Tolerances,
) -> FeasibilityReport {
    let k = instance.users();
    let mut rate_slack = vec![0.0; k];
    let mut harvest_slack = vec![0.0; k];
    let mut sic = Vec::with_capacity(instance.grouping.len());
    for users in &instance.grouping {
        let gains: Vec<f64> = users.iter().map(|&u| instance.gains[u]).collect();
        let (power, split) = vars.restrict(users);
        let view = GroupView { gains: &gains, power: &power, split: &split, slot_time: instance.slot_time };
        for (j, &u) in users.iter().enumerate() {
            rate_slack[u] = rate(j, &view, cfg) - cfg.min_rate;
            harvest_slack[u] = harvested_power(j, &view, cfg) - cfg.min_harvest;
        }
        sic.push(sic_violation(&power));
    }
    let beta = beta_violation(&vars.split);
    let h_tol = tol.harvest(cfg.min_harvest);
    let feasible = rate_slack.iter().all(|&s| s >= -tol.rate)
        && harvest_slack.iter().all(|&s| s >= -h_tol)
        && sic.iter().all(|&v| v == 0.0)
        && beta == 0.0
        && vars.power.iter().all(|&p| p >= 0.0);
    FeasibilityReport { rate_slack, harvest_slack, sic_violation: sic, beta_violation: beta, feasible }
}

/// Allocation-free feasibility test of one group, same rules as
/// [`check_feasible`].
pub fn group_feasible(group: &GroupView, cfg: &SystemConfig, tol: &Tolerances) -> bool {
    if sic_violation(group.power) > 0.0 || beta_violation(group.split) > 0.0 {
        return false;
    }
    if group.power.iter().any(|&p| !(p >= 0.0)) {
        return false;
    }
    let h_tol = tol.harvest(cfg.min_harvest);
    (0..group.len()).all(|j| {
        harvested_power(j, group, cfg) - cfg.min_harvest >= -h_tol
            && rate(j, group, cfg) - cfg.min_rate >= -tol.rate
    })
}
