use crate::error::ModelError;
use crate::units::{db_to_linear, dbm_to_watts};

/// Scenario parameters. Every field is in linear SI units; use
/// [`crate::units`] at the boundary for dB and dBm inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// K
    pub users: usize,
    /// C
    pub groups: usize,
    pub users_per_group: usize,
    pub cell_radius: f64,
    pub path_loss_exp: f64,
    pub ref_distance: f64,
    /// Linear power gain at the reference distance.
    pub ref_attenuation: f64,
    /// σ², antenna noise (W).
    pub noise_antenna: f64,
    /// σ̃², information-decoding stage noise (W).
    pub noise_id: f64,
    /// σ̂², energy-harvesting stage noise (W). Carried but unused: the
    /// harvested-power model keeps only the signal part.
    pub noise_eh: f64,
    /// RF-DC conversion efficiency η.
    pub eh_efficiency: f64,
    /// T (s).
    pub frame_time: f64,
    /// R^min (bit/Hz).
    pub min_rate: f64,
    /// P^min (W).
    pub min_harvest: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            users: 10,
            groups: 5,
            users_per_group: 2,
            cell_radius: 10.0,
            path_loss_exp: 2.0,
            ref_distance: 1.0,
            ref_attenuation: db_to_linear(-30.0),
            noise_antenna: dbm_to_watts(-100.0),
            noise_id: dbm_to_watts(-100.0),
            noise_eh: dbm_to_watts(-100.0),
            eh_efficiency: 0.75,
            frame_time: 1.0,
            min_rate: 0.1,
            min_harvest: dbm_to_watts(-30.0),
            seed: 1,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.groups < 1 || self.users_per_group < 1 {
            return bad(format!(
                "need at least one group of at least one user (groups = {}, users_per_group = {})",
                self.groups, self.users_per_group
            ));
        }
        if self.groups * self.users_per_group != self.users {
            return Err(ModelError::GroupMismatch {
                users: self.users,
                groups: self.groups,
                per_group: self.users_per_group,
            });
        }
        let positive = [
            ("path_loss_exp", self.path_loss_exp),
            ("ref_distance", self.ref_distance),
            ("ref_attenuation", self.ref_attenuation),
            ("noise_antenna", self.noise_antenna),
            ("noise_id", self.noise_id),
            ("noise_eh", self.noise_eh),
            ("frame_time", self.frame_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.cell_radius >= self.ref_distance && self.cell_radius.is_finite()) {
            return bad(format!(
                "cell_radius {} must be finite and at least ref_distance {}",
                self.cell_radius, self.ref_distance
            ));
        }
        if !(0.0..=1.0).contains(&self.eh_efficiency) {
            return bad(format!("eh_efficiency must lie in [0, 1], got {}", self.eh_efficiency));
        }
        for (name, v) in [("min_rate", self.min_rate), ("min_harvest", self.min_harvest)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        Ok(())
    }

    /// Slot length of one hybrid TDMA-NOMA group, T/C.
    pub fn group_slot(&self) -> f64 {
        self.frame_time / self.groups as f64
    }

    /// Slot length of one conventional TDMA user, T/K.
    pub fn user_slot(&self) -> f64 {
        self.frame_time / self.users as f64
    }

    /// SINR threshold `2^(R^min/t) − 1` for a slot of length `t`.
    pub fn sinr_target(&self, slot: f64) -> f64 {
        (self.min_rate / slot).exp2() - 1.0
    }
}
