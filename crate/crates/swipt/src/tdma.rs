//! Conventional TDMA baseline: each user alone in a slot of length T/K.
//!
//! With one user per slot the problem is two-dimensional. The rate needs
//! `p² ≥ A(β) = c(σ² + σ̃²/β)/|h|²`, decreasing in β, and the harvest needs
//! `p² ≥ B(β) = P^min/(η(1−β)|h|²)`, increasing in β, so the optimum of
//! `max(A, B)` sits at their crossing.

use crate::config::SystemConfig;
use crate::error::ModelError;
use crate::metrics::DesignVariables;
use crate::sca::{self, ScaSettings, SolveReport};
use crate::sysmodel::SystemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Rate,
    Harvest,
    Both,
    /// Both targets are zero.
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdmaUserSolution {
    /// p² (W)
    pub power: f64,
    pub split: f64,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSolution {
    /// Indexed by user.
    pub users: Vec<TdmaUserSolution>,
    pub total_power: f64,
}

impl TdmaSolution {
    pub fn vars(&self) -> DesignVariables {
        DesignVariables {
            power: self.users.iter().map(|u| u.power).collect(),
            split: self.users.iter().map(|u| u.split).collect(),
        }
    }
}

/// Rate requirement A(β) on p² for a slot with SINR threshold `c`.
pub fn rate_requirement(beta: f64, gain: f64, c: f64, cfg: &SystemConfig) -> f64 {
    c * (cfg.noise_antenna + cfg.noise_id / beta) / gain
}

/// Harvest requirement B(β) on p².
pub fn harvest_requirement(beta: f64, gain: f64, cfg: &SystemConfig) -> f64 {
    cfg.min_harvest / (cfg.eh_efficiency * (1.0 - beta) * gain)
}

/// Optimal single-user solve with the TDMA slot T/K.
pub fn tdma_user_solve(gain: f64, cfg: &SystemConfig) -> Result<TdmaUserSolution, ModelError> {
    tdma_user_solve_slot(gain, cfg.user_slot(), cfg)
}

/// Optimal single-user solve for an arbitrary slot length.
pub fn tdma_user_solve_slot(gain: f64, slot: f64, cfg: &SystemConfig) -> Result<TdmaUserSolution, ModelError> {
    let c = cfg.sinr_target(slot);
    let need_rate = cfg.min_rate > 0.0;
    let need_harvest = cfg.min_harvest > 0.0;
    if need_harvest && cfg.eh_efficiency == 0.0 {
        return Err(ModelError::Infeasible("harvest target with zero conversion efficiency".into()));
    }
    if (need_rate || need_harvest) && !(gain > 0.0) {
        return Err(ModelError::Infeasible(format!("non-positive channel gain {gain}")));
    }
    let sol = match (need_rate, need_harvest) {
        (false, false) => TdmaUserSolution { power: 0.0, split: 0.5, binding: Binding::Neither },
        (true, false) => TdmaUserSolution {
            power: rate_requirement(1.0, gain, c, cfg),
            split: 1.0,
            binding: Binding::Rate,
        },
        (false, true) => TdmaUserSolution {
            power: harvest_requirement(0.0, gain, cfg),
            split: 0.0,
            binding: Binding::Harvest,
        },
        (true, true) => {
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            while hi - lo > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if rate_requirement(mid, gain, c, cfg) > harvest_requirement(mid, gain, cfg) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let beta = 0.5 * (lo + hi);
            let power = rate_requirement(beta, gain, c, cfg).max(harvest_requirement(beta, gain, cfg));
            TdmaUserSolution { power, split: beta, binding: Binding::Both }
        }
    };
    Ok(sol)
}

/// Solves every user independently.
pub fn tdma_solve(instance: &SystemInstance, cfg: &SystemConfig) -> Result<TdmaSolution, ModelError> {
    let users = instance
        .gains
        .iter()
        .map(|&g| tdma_user_solve(g, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let total_power = users.iter().map(|u| u.power).sum();
    Ok(TdmaSolution { users, total_power })
}

/// The same baseline routed through the SCA solver, with every user in a
/// singleton group of length T/K.
pub fn tdma_solve_sca(instance: &SystemInstance, cfg: &SystemConfig, settings: &ScaSettings) -> SolveReport {
    sca::solve_per_group(&instance.as_singletons(cfg.user_slot()), cfg, settings)
}
