//! User placement, path-loss gains and NOMA grouping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::error::ModelError;

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    /// Per-user distance to the base station (m).
    pub distances: Vec<f64>,
    /// Per-user |h|².
    pub gains: Vec<f64>,
    /// User indices by descending gain.
    pub sorted_order: Vec<usize>,
    /// User indices per group, strongest first. Position in the list is the
    /// NOMA order index.
    pub grouping: Vec<Vec<usize>>,
    /// t_i (s).
    pub slot_time: f64,
}

/// |h|² = ref_attenuation / (d/d₀)^κ
pub fn channel_gain(distance: f64, cfg: &SystemConfig) -> Result<f64, ModelError> {
    if !(distance >= cfg.ref_distance) {
        return Err(ModelError::BelowReferenceDistance { distance, reference: cfg.ref_distance });
    }
    Ok(cfg.ref_attenuation / (distance / cfg.ref_distance).powf(cfg.path_loss_exp))
}

/// Orders user indices by descending gain, lower index first on ties.
pub fn sort_by_gain(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    order
}

/// Deals the gain-sorted users into `groups` groups.
///
/// For pairs this gives group i = {i-th strongest, i-th weakest}. Larger
/// groups continue the same back-and-forth deal, so the strongest group gets
/// ranks 1, 2C, 2C+1, 4C, ...
pub fn make_groups(
    sorted_users: &[usize],
    groups: usize,
    users_per_group: usize,
) -> Result<Vec<Vec<usize>>, ModelError> {
    if groups == 0 || users_per_group == 0 || sorted_users.len() != groups * users_per_group {
        return Err(ModelError::GroupMismatch {
            users: sorted_users.len(),
            groups,
            per_group: users_per_group,
        });
    }
    let mut out = vec![Vec::with_capacity(users_per_group); groups];
    for (rank, &user) in sorted_users.iter().enumerate() {
        let (round, pos) = (rank / groups, rank % groups);
        let g = if round % 2 == 0 { pos } else { groups - 1 - pos };
        out[g].push(user);
    }
    Ok(out)
}

/// Draws user positions uniformly over the cell disk and builds the
/// instance. Deterministic in `(cfg, seed)`.
pub fn build_instance(cfg: &SystemConfig, seed: u64) -> Result<SystemInstance, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distances: Vec<f64> = (0..cfg.users)
        .map(|_| {
            let u: f64 = rng.gen();
            (cfg.cell_radius * u.sqrt()).max(cfg.ref_distance)
        })
        .collect();
    instance_from_distances(cfg, distances)
}

/// Builds an instance from explicit distances (`cfg.users` of them).
pub fn instance_from_distances(
    cfg: &SystemConfig,
    distances: Vec<f64>,
) -> Result<SystemInstance, ModelError> {
    cfg.validate()?;
    if distances.len() != cfg.users {
        return Err(ModelError::InvalidConfig(format!(
            "{} distances for {} users",
            distances.len(),
            cfg.users
        )));
    }
    let gains = distances
        .iter()
        .map(|&d| channel_gain(d, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let sorted_order = sort_by_gain(&gains);
    let grouping = make_groups(&sorted_order, cfg.groups, cfg.users_per_group)?;
    Ok(SystemInstance { distances, gains, sorted_order, grouping, slot_time: cfg.group_slot() })
}

impl SystemInstance {
    pub fn users(&self) -> usize {
        self.gains.len()
    }

    /// Gains of group `g` in NOMA order.
    pub fn group_gains(&self, g: usize) -> Vec<f64> {
        self.grouping[g].iter().map(|&u| self.gains[u]).collect()
    }

    /// The sub-instance holding only group `g`, with users renumbered
    /// 0..n in NOMA order. The slot time is kept.
    pub fn restrict_to_group(&self, g: usize) -> SystemInstance {
        let users = &self.grouping[g];
        SystemInstance {
            distances: users.iter().map(|&u| self.distances[u]).collect(),
            gains: users.iter().map(|&u| self.gains[u]).collect(),
            sorted_order: (0..users.len()).collect(),
            grouping: vec![(0..users.len()).collect()],
            slot_time: self.slot_time,
        }
    }

    /// Every user alone in a slot of length `slot`, strongest first.
    pub fn as_singletons(&self, slot: f64) -> SystemInstance {
        SystemInstance {
            grouping: self.sorted_order.iter().map(|&u| vec![u]).collect(),
            slot_time: slot,
            ..self.clone()
        }
    }
}
