//! Brute-force grid reference for one group.
//!
//! Splits are gridded uniformly, powers logarithmically (plus an explicit
//! zero), and every candidate is judged by [`metrics::group_feasible`]
//! alone. Each round re-grids a shrunken box around the incumbent.
//!
//! The weakest user's power is not enumerated: raising it helps its own
//! rate, every harvest and the SIC order, and no other user's rate sees it,
//! so feasibility is upward closed along that axis and a binary search over
//! the axis finds the same point a full scan would.

use crate::config::SystemConfig;
use crate::error::ModelError;
use crate::metrics::{self, DesignVariables, GroupView, Tolerances};
use crate::sca::SolveReport;
use crate::sysmodel::SystemInstance;

const SPLIT_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Smallest nonzero p² on the power axis (W).
    pub power_min: f64,
    /// Largest p² on the power axis (W).
    pub power_max: f64,
    /// Log-spaced power points per axis; zero is added on top.
    pub power_points: usize,
    /// Points on the weakest user's power axis, which is binary searched
    /// rather than scanned and so can be much denser.
    pub last_power_points: usize,
    /// Points on the uniform split axis over [ε_β, 1 − ε_β].
    pub beta_points: usize,
    /// Zoom rounds after the first full grid.
    pub refinement: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            power_min: 1e-12,
            power_max: 1e-1,
            power_points: 24,
            last_power_points: 24 * 64,
            beta_points: 24,
            refinement: 3,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.power_points < 2 || self.last_power_points < 2 || self.beta_points < 2 {
            return Err(ModelError::InvalidConfig("grid axes need at least 2 points".into()));
        }
        if !(self.power_min > 0.0 && self.power_max > self.power_min && self.power_max.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "bad power range [{}, {}]",
                self.power_min, self.power_max
            )));
        }
        Ok(())
    }

    fn axis_points(&self, user: usize, n: usize) -> usize {
        if user + 1 == n {
            self.last_power_points
        } else {
            self.power_points
        }
    }

    /// Widens the power range so that it brackets the scale of the targets
    /// for this group. Never narrows it.
    pub fn for_targets(&self, cfg: &SystemConfig, gains: &[f64], slot: f64) -> GridSpec {
        let weakest = gains.iter().copied().fold(f64::INFINITY, f64::min);
        let strongest = gains.iter().copied().fold(0.0, f64::max);
        let c = cfg.sinr_target(slot);
        let n = gains.len() as i32;
        let rate_scale = (1.0 + c).powi(n) * c * (cfg.noise_antenna + 20.0 * cfg.noise_id) / weakest;
        let harvest_scale = if cfg.min_harvest > 0.0 {
            cfg.min_harvest / (0.05 * cfg.eh_efficiency * weakest)
        } else {
            0.0
        };
        let upper = 10.0 * (rate_scale + harvest_scale);
        let lower = 0.01 * c * (cfg.noise_antenna + cfg.noise_id) / strongest;
        GridSpec {
            power_max: self.power_max.max(upper),
            power_min: if lower > 0.0 { self.power_min.min(lower) } else { self.power_min },
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupOptimum {
    pub power: Vec<f64>,
    pub split: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridOutcome {
    Found(GroupOptimum),
    /// No grid point was feasible. Not a proof of infeasibility.
    InfeasibleAtResolution,
}

impl GridOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            GridOutcome::Found(o) => Some(o.objective),
            GridOutcome::InfeasibleAtResolution => None,
        }
    }
}

fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points).map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp()).collect()
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn with_point(mut axis: Vec<f64>, x: f64) -> Vec<f64> {
    axis.push(x);
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    axis
}

struct Search<'a> {
    gains: &'a [f64],
    slot: f64,
    cfg: &'a SystemConfig,
    tol: Tolerances,
    power_axes: Vec<Vec<f64>>,
    beta_axes: Vec<Vec<f64>>,
    binary: bool,
    best: Option<GroupOptimum>,
    // scratch
    power: Vec<f64>,
    split: Vec<f64>,
}

impl Search<'_> {
    fn feasible(&self) -> bool {
        let view = GroupView { gains: self.gains, power: &self.power, split: &self.split, slot_time: self.slot };
        metrics::group_feasible(&view, self.cfg, &self.tol)
    }

    fn offer(&mut self) {
        let objective: f64 = self.power.iter().sum();
        if self.best.as_ref().is_none_or(|b| objective < b.objective) {
            self.best = Some(GroupOptimum { power: self.power.clone(), split: self.split.clone(), objective });
        }
    }

    fn splits(&mut self, m: usize) {
        if m == self.gains.len() {
            self.powers(0);
            return;
        }
        for k in 0..self.beta_axes[m].len() {
            self.split[m] = self.beta_axes[m][k];
            self.splits(m + 1);
        }
    }

    fn powers(&mut self, d: usize) {
        let n = self.gains.len();
        let floor = if d > 0 { self.power[d - 1] } else { 0.0 };
        if d + 1 < n {
            for k in 0..self.power_axes[d].len() {
                let q = self.power_axes[d][k];
                if q < floor {
                    continue;
                }
                self.power[d] = q;
                self.powers(d + 1);
            }
            return;
        }
        let axis = std::mem::take(&mut self.power_axes[d]);
        let start = axis.partition_point(|&q| q < floor);
        let hit = if self.binary {
            // Smallest feasible index in axis[start..].
            let (mut lo, mut hi) = (start, axis.len());
            while lo < hi {
                let mid = (lo + hi) / 2;
                self.power[d] = axis[mid];
                if self.feasible() {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            (lo < axis.len()).then_some(lo)
        } else {
            (start..axis.len()).find(|&k| {
                self.power[d] = axis[k];
                self.feasible()
            })
        };
        if let Some(k) = hit {
            self.power[d] = axis[k];
            self.offer();
        }
        self.power_axes[d] = axis;
    }

    fn zoom(&mut self, spec: &GridSpec) {
        let Some(best) = self.best.clone() else { return };
        for j in 0..self.gains.len() {
            let axis = &self.power_axes[j];
            let i = axis.iter().position(|&q| q == best.power[j]).unwrap_or(0);
            // Two coarse steps either side; a denser axis spans as wide a window.
            let w = 2 * spec.axis_points(j, self.gains.len()).div_ceil(spec.power_points);
            // Index 0 is the explicit zero.
            let lo = axis[i.saturating_sub(w).max(1)];
            let hi = axis[(i + w).max(w).min(axis.len() - 1)];
            let mut next = vec![0.0];
            next.extend(logspace(lo, hi.max(lo), spec.axis_points(j, self.gains.len())));
            self.power_axes[j] = with_point(next, best.power[j]);

            let axis = &self.beta_axes[j];
            let i = axis.iter().position(|&b| b == best.split[j]).unwrap_or(0);
            let lo = axis[i.saturating_sub(2)];
            let hi = axis[(i + 2).min(axis.len() - 1)];
            self.beta_axes[j] = with_point(linspace(lo, hi, spec.beta_points), best.split[j]);
        }
    }
}

fn run_search(gains: &[f64], slot: f64, cfg: &SystemConfig, spec: &GridSpec, binary: bool) -> Result<GridOutcome, ModelError> {
    spec.validate()?;
    let n = gains.len();
    if n == 0 {
        return Err(ModelError::InvalidConfig("empty group".into()));
    }
    if n > 3 {
        return Err(ModelError::InvalidConfig(format!("grid search supports groups of at most 3, got {n}")));
    }
    if n == 3 {
        log::warn!("grid search over a 3-user group: 6-dimensional grid, expect long runtimes");
    }
    let power_axes = (0..n)
        .map(|j| {
            let mut axis = vec![0.0];
            axis.extend(logspace(spec.power_min, spec.power_max, spec.axis_points(j, n)));
            axis
        })
        .collect();
    let beta_axis = linspace(SPLIT_FLOOR, 1.0 - SPLIT_FLOOR, spec.beta_points);
    let mut s = Search {
        gains,
        slot,
        cfg,
        tol: Tolerances::default(),
        power_axes,
        beta_axes: vec![beta_axis; n],
        binary,
        best: None,
        power: vec![0.0; n],
        split: vec![0.5; n],
    };
    for round in 0..=spec.refinement {
        if round > 0 {
            s.zoom(spec);
        }
        s.splits(0);
    }
    Ok(match s.best {
        Some(b) => GridOutcome::Found(b),
        None => GridOutcome::InfeasibleAtResolution,
    })
}

/// Best feasible grid point of one group (gains in NOMA order).
pub fn group_grid_search(gains: &[f64], slot: f64, cfg: &SystemConfig, spec: &GridSpec) -> Result<GridOutcome, ModelError> {
    run_search(gains, slot, cfg, spec, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemGridResult {
    pub groups: Vec<GridOutcome>,
    /// Sum of group objectives; `None` if any group found nothing.
    pub total: Option<f64>,
    pub vars: Option<DesignVariables>,
}

/// Grid reference for the whole system: one independent search per group.
/// `spec` is widened per group with [`GridSpec::for_targets`].
pub fn system_grid_search(instance: &SystemInstance, cfg: &SystemConfig, spec: &GridSpec) -> Result<SystemGridResult, ModelError> {
    let mut groups = Vec::with_capacity(instance.grouping.len());
    let mut vars = DesignVariables { power: vec![0.0; instance.users()], split: vec![0.5; instance.users()] };
    let mut total = Some(0.0);
    for (g, users) in instance.grouping.iter().enumerate() {
        let gains = instance.group_gains(g);
        let local = spec.for_targets(cfg, &gains, instance.slot_time);
        let outcome = group_grid_search(&gains, instance.slot_time, cfg, &local)?;
        match &outcome {
            GridOutcome::Found(o) => {
                total = total.map(|t| t + o.objective);
                for (j, &u) in users.iter().enumerate() {
                    vars.power[u] = o.power[j];
                    vars.split[u] = o.split[j];
                }
            }
            GridOutcome::InfeasibleAtResolution => total = None,
        }
        groups.push(outcome);
    }
    let vars = total.map(|_| vars);
    Ok(SystemGridResult { groups, total, vars })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCertificate {
    pub group: usize,
    pub sca_objective: f64,
    pub oracle_objective: Option<f64>,
    pub sca_feasible: bool,
    pub oracle_feasible: bool,
    /// oracle ≤ sca·(1 + slack)
    pub oracle_within_slack: bool,
    /// sca ≤ oracle·(1 + slack)
    pub sca_within_slack: bool,
}

impl GroupCertificate {
    pub fn passed(&self) -> bool {
        self.sca_feasible && self.oracle_feasible && self.oracle_within_slack && self.sca_within_slack
    }

    /// (sca − oracle)/oracle
    pub fn relative_gap(&self) -> Option<f64> {
        self.oracle_objective.map(|o| (self.sca_objective - o) / o)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub slack: f64,
    pub groups: Vec<GroupCertificate>,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupCertificate::passed)
    }
}

/// Compares an SCA result group by group against the grid reference.
pub fn certify(
    instance: &SystemInstance,
    cfg: &SystemConfig,
    report: &SolveReport,
    spec: &GridSpec,
    slack: f64,
) -> Result<Certification, ModelError> {
    let tol = Tolerances::default();
    let mut groups = Vec::with_capacity(instance.grouping.len());
    for (g, users) in instance.grouping.iter().enumerate() {
        let gains = instance.group_gains(g);
        let (power, split) = report.final_vars.restrict(users);
        let sca_objective: f64 = power.iter().sum();
        let view = GroupView { gains: &gains, power: &power, split: &split, slot_time: instance.slot_time };
        let sca_feasible = report.success() && metrics::group_feasible(&view, cfg, &tol);
        let local = spec.for_targets(cfg, &gains, instance.slot_time);
        let outcome = group_grid_search(&gains, instance.slot_time, cfg, &local)?;
        let (oracle_objective, oracle_feasible) = match &outcome {
            GridOutcome::Found(o) => {
                let view = GroupView { gains: &gains, power: &o.power, split: &o.split, slot_time: instance.slot_time };
                (Some(o.objective), metrics::group_feasible(&view, cfg, &tol))
            }
            GridOutcome::InfeasibleAtResolution => (None, false),
        };
        let oracle_within_slack = oracle_objective.is_some_and(|o| o <= sca_objective * (1.0 + slack));
        let sca_within_slack = oracle_objective.is_some_and(|o| sca_objective <= o * (1.0 + slack));
        groups.push(GroupCertificate {
            group: g,
            sca_objective,
            oracle_objective,
            sca_feasible,
            oracle_feasible,
            oracle_within_slack,
            sca_within_slack,
        });
    }
    Ok(Certification { slack, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_search_matches_full_scan() {
        let cfg = SystemConfig { min_rate: 0.1, min_harvest: 1e-8, ..Default::default() };
        let spec = GridSpec { power_points: 12, last_power_points: 40, beta_points: 8, refinement: 1, ..Default::default() };
        for gains in [[1e-3, 1e-5], [4e-4, 2e-4], [2e-5, 1.5e-5]] {
            let spec = spec.for_targets(&cfg, &gains, 0.2);
            let a = run_search(&gains, 0.2, &cfg, &spec, true).unwrap();
            let b = run_search(&gains, 0.2, &cfg, &spec, false).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_targets_give_zero_power() {
        let cfg = SystemConfig { min_rate: 0.0, min_harvest: 0.0, ..Default::default() };
        let out = group_grid_search(&[1e-3, 1e-5], 0.2, &cfg, &GridSpec::default()).unwrap();
        assert_eq!(out.objective(), Some(0.0));
    }

    #[test]
    fn rejects_large_groups_and_bad_specs() {
        let cfg = SystemConfig::default();
        assert!(group_grid_search(&[1e-3; 4], 0.2, &cfg, &GridSpec::default()).is_err());
        let bad = GridSpec { beta_points: 1, ..Default::default() };
        assert!(group_grid_search(&[1e-3], 0.2, &cfg, &bad).is_err());
    }

    #[test]
    fn widening_never_narrows() {
        let cfg = SystemConfig { min_harvest: 1e-4, ..Default::default() };
        let base = GridSpec::default();
        let w = base.for_targets(&cfg, &[1e-3, 1e-5], 0.2);
        assert!(w.power_max >= base.power_max && w.power_min <= base.power_min);
        assert!(w.power_max > 1e-1);
    }
}
