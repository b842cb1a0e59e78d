//! Successive convex approximation for the power-minimization problem.
//!
//! Each outer iteration linearizes the bilinear products `β·p²` and
//! `(1−β)·p²` and the squared slack `χ²` around the current point, solves the
//! resulting QP, and moves the split ratios towards the QP answer. Powers are
//! not taken from the QP. For fixed splits the minimum power of a group has a
//! closed form ([`restore_power`]), so every iterate is the exact optimum for
//! its splits, exactly feasible, and the objective never increases: a step
//! is halved until the restored power is no worse than the current one.
//!
//! Variables per group of `n` users (order index 0 is the strongest):
//!
//! | block | count        | meaning                                   |
//! |-------|--------------|-------------------------------------------|
//! | q     | n            | p²                                        |
//! | β     | n            | split ratio                               |
//! | α     | n(n+1)/2     | `β_m·q_d ≥ α`, signal at receiver m ≤ d   |
//! | ι     | n(n−1)       | `β_m·q_s ≤ ι`, interference s < n−1       |
//! | χ     | n(n+1)/2     | `χ² ≥` interference + noise term          |
//! | ρ     | n²           | `(1−β_j)·q_s ≥ ρ`                         |
//! | ϱ     | n            | harvested power, `ϱ ≥ P^min`              |
//!
//! The θ slack of the rate constraint is pinned at `2^(R^min/t)`, which the
//! power objective would drive it to anyway, so all rows are linear.

use qp_core::{solve_qp, QpProblem, QpStatus, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SystemConfig;
use crate::metrics::{self, check_feasible, DesignVariables, FeasibilityReport, GroupView, Tolerances};
use crate::sysmodel::SystemInstance;

/// ε_β: splits stay inside [ε_β, 1 − ε_β].
pub const SPLIT_FLOOR: f64 = 1e-4;

/// Relative margin on the rate and harvest thresholds used by restoration,
/// so that rounding can never leave a restored point infeasible.
const RESTORE_MARGIN: f64 = 1e-12;

const LINE_SEARCH_HALVINGS: u32 = 12;
const PROX_MIN: f64 = 1e-6;
const PROX_MAX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaSettings {
    /// μ as a fraction of the initial total power.
    pub rel_mu: f64,
    /// Absolute μ (W); overrides `rel_mu` when set.
    pub abs_mu: Option<f64>,
    pub max_outer: usize,
    pub seed: u64,
    /// Starting proximal weight.
    pub prox: f64,
    pub qp: SolverSettings,
    pub tol: Tolerances,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            rel_mu: 1e-6,
            abs_mu: None,
            max_outer: 50,
            seed: 0,
            prox: 0.5,
            qp: SolverSettings::default(),
            tol: Tolerances::default(),
        }
    }
}

/// Expansion point and exact slack values of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    /// System user indices in NOMA order.
    pub users: Vec<usize>,
    pub gains: Vec<f64>,
    pub slot: f64,
    /// θ* = 2^(R^min/t)
    pub theta: f64,
    pub power: Vec<f64>,
    pub split: Vec<f64>,
    /// α[(m, d)] = β_m·q_d, indexed by [`tri`].
    pub alpha: Vec<f64>,
    /// ι[(m, s)] = β_m·q_s, indexed `m·(n−1) + s`.
    pub iota: Vec<f64>,
    /// χ[(m, d)]² = |h_m|² Σ_{s<d} ι + σ²β_m + σ̃², indexed by [`tri`].
    pub chi: Vec<f64>,
    /// ρ[(j, s)] = (1−β_j)·q_s, indexed `j·n + s`.
    pub rho: Vec<f64>,
    pub varrho: Vec<f64>,
    /// Exact rate r_j (bit/Hz).
    pub rate: Vec<f64>,
}

/// Index of the pair (m, d), m ≤ d, in a packed triangle.
pub fn tri(m: usize, d: usize) -> usize {
    debug_assert!(m <= d);
    d * (d + 1) / 2 + m
}

impl GroupState {
    /// Builds the state at `(power, split)` with every slack set from the
    /// exact expressions.
    pub fn at(
        users: Vec<usize>,
        gains: Vec<f64>,
        slot: f64,
        power: Vec<f64>,
        split: Vec<f64>,
        cfg: &SystemConfig,
    ) -> Self {
        let n = gains.len();
        let mut alpha = vec![0.0; n * (n + 1) / 2];
        let mut chi = vec![0.0; n * (n + 1) / 2];
        let mut iota = vec![0.0; n * n.saturating_sub(1)];
        let mut rho = vec![0.0; n * n];
        for m in 0..n {
            for s in 0..n.saturating_sub(1) {
                iota[m * (n - 1) + s] = split[m] * power[s];
            }
            for d in m..n {
                alpha[tri(m, d)] = split[m] * power[d];
                let interference: f64 = (0..d).map(|s| iota[m * (n - 1) + s]).sum();
                chi[tri(m, d)] =
                    (gains[m] * interference + cfg.noise_antenna * split[m] + cfg.noise_id).sqrt();
            }
            for s in 0..n {
                rho[m * n + s] = (1.0 - split[m]) * power[s];
            }
        }
        let varrho = (0..n)
            .map(|j| cfg.eh_efficiency * gains[j] * rho[j * n..(j + 1) * n].iter().sum::<f64>())
            .collect();
        let view = GroupView { gains: &gains, power: &power, split: &split, slot_time: slot };
        let rate = (0..n).map(|j| metrics::rate(j, &view, cfg)).collect();
        Self {
            users,
            theta: (cfg.min_rate / slot).exp2(),
            gains,
            slot,
            power,
            split,
            alpha,
            iota,
            chi,
            rho,
            varrho,
            rate,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// The SCA variable vector Γ for a whole system.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemState {
    pub groups: Vec<GroupState>,
}

impl SubproblemState {
    pub fn total_power(&self) -> f64 {
        self.groups.iter().map(GroupState::total_power).sum()
    }

    /// Scatters group variables back to a per-user vector of length `users`.
    pub fn vars(&self, users: usize) -> DesignVariables {
        let mut v = DesignVariables { power: vec![0.0; users], split: vec![0.5; users] };
        for g in &self.groups {
            for (j, &u) in g.users.iter().enumerate() {
                v.power[u] = g.power[j];
                v.split[u] = g.split[j];
            }
        }
        v
    }
}

/// Minimum power of a group for fixed splits.
///
/// Message d needs `q_d ≥ c(Σ_{s<d} q_s + N_d)` with
/// `N_d = max_{m≤d} (σ² + σ̃²/β_m)/|h_m|²`, the SIC order needs
/// `q_d ≥ q_{d−1}`, and harvesting needs `Σq ≥ max_j P^min/(η(1−β_j)|h_j|²)`.
/// Meeting the rate chain with equality from the strongest user down and
/// giving any harvest shortfall to the weakest user is optimal, since extra
/// power on the last message tightens no other constraint.
pub fn restore_power(gains: &[f64], split: &[f64], slot: f64, cfg: &SystemConfig) -> Vec<f64> {
    let n = gains.len();
    let c = cfg.sinr_target(slot) * (1.0 + RESTORE_MARGIN);
    let mut power = vec![0.0; n];
    let mut noise_floor = 0.0_f64;
    let mut sum = 0.0;
    for d in 0..n {
        noise_floor = noise_floor.max((cfg.noise_antenna + cfg.noise_id / split[d]) / gains[d]);
        let prev: f64 = if d > 0 { power[d - 1] } else { 0.0 };
        power[d] = if c > 0.0 { prev.max(c * (sum + noise_floor)) } else { prev };
        sum += power[d];
    }
    if cfg.min_harvest > 0.0 && n > 0 {
        let need = (0..n)
            .map(|j| cfg.min_harvest / (cfg.eh_efficiency * (1.0 - split[j]) * gains[j]))
            .fold(0.0, f64::max)
            * (1.0 + RESTORE_MARGIN);
        if sum < need {
            power[n - 1] += need - sum;
        }
    }
    power
}

/// A random allocation in SIC order whose rate chain survives scaling:
/// `q_d − c·Σ_{s<d} q_s > 0`.
pub fn seed_allocation(n: usize, slot: f64, cfg: &SystemConfig, rng: &mut impl Rng) -> Vec<f64> {
    let c = cfg.sinr_target(slot);
    let mut out = Vec::with_capacity(n);
    let mut sum = 0.0;
    for d in 0..n {
        let u: f64 = rng.gen_range(0.5..1.5);
        let prev: f64 = if d > 0 { out[d - 1] } else { 0.0 };
        let q = (c * sum + u).max(prev);
        out.push(q);
        sum += q;
    }
    out
}

/// Smallest scale λ (to relative 10⁻¹²) making `λ·shape` exactly feasible
/// with the given splits. `None` if no scale up to 10³⁰ works.
pub fn feasible_scale(gains: &[f64], split: &[f64], slot: f64, shape: &[f64], cfg: &SystemConfig) -> Option<f64> {
    let exact = Tolerances { rate: 0.0, harvest_rel: 0.0, harvest_abs: 0.0 };
    let ok = |lambda: f64| {
        let power: Vec<f64> = shape.iter().map(|q| lambda * q).collect();
        let view = GroupView { gains, power: &power, split, slot_time: slot };
        metrics::group_feasible(&view, cfg, &exact)
    };
    if ok(0.0) {
        return Some(0.0);
    }
    let mut hi = 1e-30;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e30 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if !ok(lo) {
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaError {
    #[error("initialization failed for group {group}: {reason}")]
    Initialization { group: usize, reason: String },
    #[error("subproblem {status} at outer iteration {iteration}")]
    Subproblem { iteration: usize, status: QpStatus },
}

/// One group to be solved: its users, gains, slot and RNG stream.
#[derive(Debug, Clone)]
struct GroupSpec {
    users: Vec<usize>,
    gains: Vec<f64>,
    slot: f64,
    stream: u64,
}

fn specs(instance: &SystemInstance) -> Vec<GroupSpec> {
    instance
        .grouping
        .iter()
        .enumerate()
        .map(|(g, users)| GroupSpec {
            users: users.clone(),
            gains: users.iter().map(|&u| instance.gains[u]).collect(),
            slot: instance.slot_time,
            stream: g as u64,
        })
        .collect()
}

fn init_group(spec: &GroupSpec, cfg: &SystemConfig, seed: u64) -> Result<GroupState, String> {
    let n = spec.gains.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(spec.stream);
    let split = vec![0.5; n];
    let shape = seed_allocation(n, spec.slot, cfg, &mut rng);
    let lambda = feasible_scale(&spec.gains, &split, spec.slot, &shape, cfg)
        .ok_or_else(|| "no finite power scale meets the targets".to_string())?;
    let power = shape.iter().map(|q| lambda * q).collect();
    Ok(GroupState::at(spec.users.clone(), spec.gains.clone(), spec.slot, power, split, cfg))
}

/// Feasible starting point: β = 0.5 everywhere and a random SIC-ordered
/// power shape scaled up just enough to meet every target exactly.
pub fn initialize(instance: &SystemInstance, cfg: &SystemConfig, seed: u64) -> Result<SubproblemState, ScaError> {
    let groups = specs(instance)
        .iter()
        .enumerate()
        .map(|(g, s)| init_group(s, cfg, seed).map_err(|reason| ScaError::Initialization { group: g, reason }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SubproblemState { groups })
}

/// Where one group's variables live in the QP and how they are scaled:
/// QP variable `z` stands for the physical value `scale·z`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    pub offset: usize,
    pub n: usize,
    /// S, the power unit of this group (W).
    pub power_unit: f64,
    pub scales: Vec<f64>,
    pub first_row: usize,
    pub rows: usize,
}

impl GroupLayout {
    fn tri_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
    pub fn power(&self, d: usize) -> usize {
        self.offset + d
    }
    pub fn split(&self, m: usize) -> usize {
        self.offset + self.n + m
    }
    pub fn alpha(&self, m: usize, d: usize) -> usize {
        self.offset + 2 * self.n + tri(m, d)
    }
    pub fn iota(&self, m: usize, s: usize) -> usize {
        self.offset + 2 * self.n + self.tri_len() + m * (self.n - 1) + s
    }
    pub fn chi(&self, m: usize, d: usize) -> usize {
        self.offset + 2 * self.n + self.tri_len() + self.n * (self.n - 1) + tri(m, d)
    }
    pub fn rho(&self, j: usize, s: usize) -> usize {
        self.offset + 2 * self.n + 2 * self.tri_len() + self.n * (self.n - 1) + j * self.n + s
    }
    pub fn varrho(&self, j: usize) -> usize {
        self.offset + 2 * self.n + 2 * self.tri_len() + self.n * (self.n - 1) + self.n * self.n + j
    }
    pub fn vars(&self) -> usize {
        variable_tally(self.n)
    }

    /// Value of variable `idx` in physical units.
    pub fn physical(&self, z: &[f64], idx: usize) -> f64 {
        self.scales[idx - self.offset] * z[idx]
    }
}

/// Number of QP variables for a group of `n` users.
pub fn variable_tally(n: usize) -> usize {
    2 * n + n * (n + 1) + n * n.saturating_sub(1) + n * n + n
}

/// Number of QP rows for a group of `n` users: α, ι, the two halves of the
/// SINR chain, ρ, harvest and SIC ordering.
pub fn row_tally(n: usize) -> usize {
    let t = n * (n + 1) / 2;
    t + n * n.saturating_sub(1) + 2 * t + n * n + n + n.saturating_sub(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemLayout {
    pub groups: Vec<GroupLayout>,
}

/// Rows are collected in physical units, then rescaled to QP units and
/// normalized to unit largest coefficient.
struct RowSink<'a> {
    qp: &'a mut QpProblem,
    scales: &'a [f64],
    offset: usize,
}

impl RowSink<'_> {
    fn push(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let coefs: Vec<(usize, f64)> = terms
            .iter()
            .map(|&(i, a)| (i, a * self.scales[i - self.offset]))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        let norm = coefs.iter().fold(0.0_f64, |m, &(_, a)| m.max(a.abs()));
        if norm == 0.0 {
            return;
        }
        self.qp.add_constraint(coefs.iter().map(|&(i, a)| (i, a / norm)).collect(), rhs / norm);
    }
}

fn group_block(qp: &mut QpProblem, g: &GroupState, offset: usize, prox: f64, cfg: &SystemConfig) -> GroupLayout {
    let n = g.len();
    let (sigma, sigma_id, eta) = (cfg.noise_antenna, cfg.noise_id, cfg.eh_efficiency);
    let c = g.theta - 1.0;
    let weakest = g.gains.iter().copied().fold(f64::INFINITY, f64::min);
    let unit = g.total_power().max((sigma + sigma_id) / weakest);
    let mut lay = GroupLayout {
        offset,
        n,
        power_unit: unit,
        scales: Vec::new(),
        first_row: qp.constraints.len(),
        rows: 0,
    };

    let mut scales = vec![0.0; variable_tally(n)];
    for j in 0..n {
        scales[lay.power(j) - offset] = unit;
        scales[lay.split(j) - offset] = 1.0;
        scales[lay.varrho(j) - offset] = if eta > 0.0 { eta * g.gains[j] * unit } else { g.gains[j] * unit };
        for d in j..n {
            scales[lay.alpha(j, d) - offset] = unit * g.split[j];
            scales[lay.chi(j, d) - offset] = g.chi[tri(j, d)];
        }
        for s in 0..n.saturating_sub(1) {
            scales[lay.iota(j, s) - offset] = unit * g.split[j];
        }
        for s in 0..n {
            scales[lay.rho(j, s) - offset] = unit * (1.0 - g.split[j]);
        }
    }

    // Bounds in QP units.
    for j in 0..n {
        qp.set_bounds(lay.power(j), 0.0, f64::INFINITY);
        qp.set_bounds(lay.split(j), SPLIT_FLOOR, 1.0 - SPLIT_FLOOR);
        qp.set_bounds(lay.varrho(j), cfg.min_harvest / scales[lay.varrho(j) - offset], f64::INFINITY);
        for d in j..n {
            qp.set_bounds(lay.alpha(j, d), 0.0, f64::INFINITY);
            qp.set_bounds(lay.chi(j, d), 0.0, f64::INFINITY);
        }
        for s in 0..n.saturating_sub(1) {
            qp.set_bounds(lay.iota(j, s), 0.0, f64::INFINITY);
        }
        for s in 0..n {
            qp.set_bounds(lay.rho(j, s), 0.0, f64::INFINITY);
        }
    }

    // Objective Σ q/S plus a proximal pull towards the expansion point.
    for j in 0..n {
        let (qi, bi) = (lay.power(j), lay.split(j));
        let q0 = g.power[j] / unit;
        qp.quad_diag[qi] = prox;
        qp.lin[qi] = 1.0 - 2.0 * prox * q0;
        qp.quad_diag[bi] = prox;
        qp.lin[bi] = -2.0 * prox * g.split[j];
    }

    let mut sink = RowSink { qp, scales: &scales, offset };
    let (q0, b0) = (&g.power, &g.split);
    // α ≤ β_m q_d, linearized.
    for d in 0..n {
        for m in 0..=d {
            sink.push(
                &[(lay.alpha(m, d), 1.0), (lay.power(d), -b0[m]), (lay.split(m), -q0[d])],
                -b0[m] * q0[d],
            );
        }
    }
    // ι ≥ β_m q_s, linearized.
    for m in 0..n {
        for s in 0..n.saturating_sub(1) {
            sink.push(
                &[(lay.iota(m, s), -1.0), (lay.power(s), b0[m]), (lay.split(m), q0[s])],
                b0[m] * q0[s],
            );
        }
    }
    // |h_m|² α ≥ (θ*−1) χ², with χ² linearized.
    for d in 0..n {
        for m in 0..=d {
            let x0 = g.chi[tri(m, d)];
            sink.push(&[(lay.alpha(m, d), -g.gains[m]), (lay.chi(m, d), 2.0 * c * x0)], c * x0 * x0);
        }
    }
    // χ² (linearized) ≥ |h_m|² Σ_{s<d} ι + σ²β_m + σ̃².
    for d in 0..n {
        for m in 0..=d {
            let x0 = g.chi[tri(m, d)];
            let mut terms = vec![(lay.chi(m, d), -2.0 * x0), (lay.split(m), sigma)];
            terms.extend((0..d).map(|s| (lay.iota(m, s), g.gains[m])));
            sink.push(&terms, -x0 * x0 - sigma_id);
        }
    }
    // ρ ≤ (1−β_j) q_s, linearized.
    for j in 0..n {
        for s in 0..n {
            sink.push(
                &[(lay.rho(j, s), 1.0), (lay.power(s), -(1.0 - b0[j])), (lay.split(j), q0[s])],
                q0[s] * b0[j],
            );
        }
    }
    // ϱ ≤ η|h_j|² Σ_s ρ.
    for j in 0..n {
        let mut terms = vec![(lay.varrho(j), 1.0)];
        terms.extend((0..n).map(|s| (lay.rho(j, s), eta * g.gains[j])));
        for t in terms.iter_mut().skip(1) {
            t.1 = -t.1;
        }
        sink.push(&terms, 0.0);
    }
    // SIC ordering q_d ≤ q_{d+1}.
    for d in 0..n.saturating_sub(1) {
        sink.push(&[(lay.power(d), 1.0), (lay.power(d + 1), -1.0)], 0.0);
    }
    lay.rows = sink.qp.constraints.len() - lay.first_row;
    lay.scales = scales;
    lay
}

fn build_with_prox(groups: &[GroupState], prox: &[f64], cfg: &SystemConfig) -> (QpProblem, SubproblemLayout) {
    let total: usize = groups.iter().map(|g| variable_tally(g.len())).sum();
    let mut qp = QpProblem::new(total);
    let mut layouts = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for (g, &w) in groups.iter().zip(prox) {
        let lay = group_block(&mut qp, g, offset, w, cfg);
        offset += lay.vars();
        layouts.push(lay);
    }
    (qp, SubproblemLayout { groups: layouts })
}

/// The convex subproblem around `state`, with the default proximal weight.
pub fn build_subproblem(state: &SubproblemState, cfg: &SystemConfig) -> (QpProblem, SubproblemLayout) {
    let prox = vec![ScaSettings::default().prox; state.groups.len()];
    build_with_prox(&state.groups, &prox, cfg)
}

impl SubproblemLayout {
    /// The expansion point of `state` in QP units.
    pub fn expansion_point(&self, state: &SubproblemState) -> Vec<f64> {
        let total = self.groups.iter().map(GroupLayout::vars).sum();
        let mut z = vec![0.0; total];
        for (lay, g) in self.groups.iter().zip(&state.groups) {
            let n = g.len();
            let mut set = |idx: usize, value: f64| z[idx] = value / lay.scales[idx - lay.offset];
            for j in 0..n {
                set(lay.power(j), g.power[j]);
                set(lay.split(j), g.split[j]);
                set(lay.varrho(j), g.varrho[j]);
                for d in j..n {
                    set(lay.alpha(j, d), g.alpha[tri(j, d)]);
                    set(lay.chi(j, d), g.chi[tri(j, d)]);
                }
                for s in 0..n.saturating_sub(1) {
                    set(lay.iota(j, s), g.iota[j * (n - 1) + s]);
                }
                for s in 0..n {
                    set(lay.rho(j, s), g.rho[j * n + s]);
                }
            }
        }
        z
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// P_t after the step (W).
    pub total_power: f64,
    pub qp_status: QpStatus,
    /// Smallest accepted step fraction across groups.
    pub step: f64,
    /// Worst rate shortfall (bit/Hz) of the raw QP point on the exact model.
    pub rate_violation: f64,
    /// Worst harvest shortfall (W) of the raw QP point on the exact model.
    pub harvest_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Converged,
    NotConverged,
    InitializationFailed(String),
    SubproblemFailed(QpStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub final_vars: DesignVariables,
    /// P_t per iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility: FeasibilityReport,
    pub subproblem_statuses: Vec<QpStatus>,
    pub trace: Vec<TraceRecord>,
    pub outcome: Outcome,
    pub restarts: usize,
    /// μ used for the stopping rule (W).
    pub mu: f64,
}

impl SolveReport {
    pub fn success(&self) -> bool {
        self.converged && self.feasibility.feasible
    }

    pub fn total_power(&self) -> f64 {
        self.final_vars.total_power()
    }
}

struct EngineOut {
    state: SubproblemState,
    objective_trace: Vec<f64>,
    statuses: Vec<QpStatus>,
    trace: Vec<TraceRecord>,
    converged: bool,
    mu: f64,
}

/// Returns the accepted step fraction and the new group state.
fn line_search(g: &GroupState, target: &[f64], cfg: &SystemConfig) -> (f64, GroupState) {
    let current = g.total_power();
    let mut tau = 1.0;
    for _ in 0..=LINE_SEARCH_HALVINGS {
        let split: Vec<f64> = g
            .split
            .iter()
            .zip(target)
            .map(|(&b, &t)| (b + tau * (t - b)).clamp(SPLIT_FLOOR, 1.0 - SPLIT_FLOOR))
            .collect();
        let power = restore_power(&g.gains, &split, g.slot, cfg);
        if power.iter().sum::<f64>() <= current {
            return (tau, GroupState::at(g.users.clone(), g.gains.clone(), g.slot, power, split, cfg));
        }
        tau *= 0.5;
    }
    let power = restore_power(&g.gains, &g.split, g.slot, cfg);
    (0.0, GroupState::at(g.users.clone(), g.gains.clone(), g.slot, power, g.split.clone(), cfg))
}

fn raw_violations(layout: &GroupLayout, z: &[f64], g: &GroupState, cfg: &SystemConfig) -> (f64, f64) {
    let n = g.len();
    let power: Vec<f64> = (0..n).map(|d| layout.physical(z, layout.power(d)).max(0.0)).collect();
    let split: Vec<f64> = (0..n).map(|m| z[layout.split(m)].clamp(0.0, 1.0)).collect();
    let view = GroupView { gains: &g.gains, power: &power, split: &split, slot_time: g.slot };
    let mut worst = (0.0_f64, 0.0_f64);
    for j in 0..n {
        worst.0 = worst.0.max(cfg.min_rate - metrics::rate(j, &view, cfg));
        worst.1 = worst.1.max(cfg.min_harvest - metrics::harvested_power(j, &view, cfg));
    }
    worst
}

fn run_engine(specs: &[GroupSpec], cfg: &SystemConfig, settings: &ScaSettings, seed: u64, mu_share: Option<f64>) -> Result<EngineOut, ScaError> {
    let groups = specs
        .iter()
        .enumerate()
        .map(|(g, s)| init_group(s, cfg, seed).map_err(|reason| ScaError::Initialization { group: g, reason }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut state = SubproblemState { groups };
    let p0 = state.total_power();
    let mu = mu_share.or(settings.abs_mu).unwrap_or(settings.rel_mu * p0);
    let mut out = EngineOut {
        state: state.clone(),
        objective_trace: vec![p0],
        statuses: Vec::new(),
        trace: Vec::new(),
        converged: false,
        mu,
    };
    if p0 == 0.0 {
        out.converged = true;
        return Ok(out);
    }

    let mut prox = vec![settings.prox; state.groups.len()];
    let mut stalls = 0;
    for iteration in 1..=settings.max_outer {
        let (qp, layout) = build_with_prox(&state.groups, &prox, cfg);
        let sol = solve_qp(&qp, &settings.qp).expect("subproblem is well formed");
        out.statuses.push(sol.status);
        if sol.status == QpStatus::Infeasible {
            return Err(ScaError::Subproblem { iteration, status: sol.status });
        }

        let before = state.total_power();
        let mut step = 1.0_f64;
        let mut stalled = false;
        let mut violations = (0.0_f64, 0.0_f64);
        for (k, lay) in layout.groups.iter().enumerate() {
            let g = &state.groups[k];
            let v = raw_violations(lay, &sol.z, g, cfg);
            violations = (violations.0.max(v.0), violations.1.max(v.1));
            let target: Vec<f64> = (0..g.len()).map(|m| sol.z[lay.split(m)]).collect();
            let moved = target.iter().zip(&g.split).any(|(t, b)| (t - b).abs() > 1e-12);
            let (tau, next) = line_search(g, &target, cfg);
            if tau == 1.0 {
                prox[k] = (prox[k] * 0.5).max(PROX_MIN);
            } else {
                prox[k] = (prox[k] * 4.0).min(PROX_MAX);
            }
            if tau == 0.0 && moved {
                stalled = true;
            }
            step = step.min(tau);
            state.groups[k] = next;
        }
        let after = state.total_power();
        out.objective_trace.push(after);
        out.trace.push(TraceRecord {
            iteration,
            total_power: after,
            qp_status: sol.status,
            step,
            rate_violation: violations.0,
            harvest_violation: violations.1,
        });
        stalls = if stalled { stalls + 1 } else { 0 };
        if (after - before).abs() < mu && (stalls == 0 || stalls >= 3) {
            out.converged = true;
            break;
        }
    }
    out.state = state;
    Ok(out)
}

fn zero_demand_report(instance: &SystemInstance, cfg: &SystemConfig, settings: &ScaSettings) -> SolveReport {
    let vars = DesignVariables { power: vec![0.0; instance.users()], split: vec![0.5; instance.users()] };
    SolveReport {
        feasibility: check_feasible(instance, &vars, cfg, &settings.tol),
        final_vars: vars,
        objective_trace: vec![0.0],
        iterations: 0,
        converged: true,
        subproblem_statuses: Vec::new(),
        trace: Vec::new(),
        outcome: Outcome::Converged,
        restarts: 0,
        mu: settings.abs_mu.unwrap_or(0.0),
    }
}

fn failed_report(instance: &SystemInstance, cfg: &SystemConfig, settings: &ScaSettings, outcome: Outcome, restarts: usize) -> SolveReport {
    let vars = DesignVariables::zeros(instance.users());
    SolveReport {
        feasibility: check_feasible(instance, &vars, cfg, &settings.tol),
        final_vars: vars,
        objective_trace: Vec::new(),
        iterations: 0,
        converged: false,
        subproblem_statuses: Vec::new(),
        trace: Vec::new(),
        outcome,
        restarts,
        mu: 0.0,
    }
}

/// Seed used for the one restart after a failed subproblem.
fn restart_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9e37_79b9_7f4a_7c15)
}

fn engine_with_restart(
    specs: &[GroupSpec],
    cfg: &SystemConfig,
    settings: &ScaSettings,
    mu_share: Option<f64>,
) -> (Result<EngineOut, ScaError>, usize) {
    match run_engine(specs, cfg, settings, settings.seed, mu_share) {
        Err(ScaError::Subproblem { .. }) => {
            (run_engine(specs, cfg, settings, restart_seed(settings.seed), mu_share), 1)
        }
        other => (other, 0),
    }
}

fn error_outcome(e: ScaError) -> Outcome {
    match e {
        ScaError::Initialization { reason, .. } => Outcome::InitializationFailed(reason),
        ScaError::Subproblem { status, .. } => Outcome::SubproblemFailed(status),
    }
}

fn zero_demands(cfg: &SystemConfig) -> bool {
    cfg.min_rate == 0.0 && cfg.min_harvest == 0.0
}

fn harvest_impossible(cfg: &SystemConfig) -> bool {
    cfg.min_harvest > 0.0 && cfg.eh_efficiency == 0.0
}

/// Runs the SCA loop on all groups jointly: one QP per outer iteration.
pub fn sca_solve(instance: &SystemInstance, cfg: &SystemConfig, settings: &ScaSettings) -> SolveReport {
    if zero_demands(cfg) {
        return zero_demand_report(instance, cfg, settings);
    }
    if harvest_impossible(cfg) {
        let why = "harvest target with zero conversion efficiency".to_string();
        return failed_report(instance, cfg, settings, Outcome::InitializationFailed(why), 0);
    }
    let (result, restarts) = engine_with_restart(&specs(instance), cfg, settings, None);
    match result {
        Err(e) => failed_report(instance, cfg, settings, error_outcome(e), restarts),
        Ok(out) => {
            let final_vars = out.state.vars(instance.users());
            let feasibility = check_feasible(instance, &final_vars, cfg, &settings.tol);
            SolveReport {
                final_vars,
                iterations: out.statuses.len(),
                objective_trace: out.objective_trace,
                converged: out.converged,
                feasibility,
                subproblem_statuses: out.statuses,
                trace: out.trace,
                outcome: if out.converged { Outcome::Converged } else { Outcome::NotConverged },
                restarts,
                mu: out.mu,
            }
        }
    }
}

/// Solves every group on its own and merges the results. The problem has no
/// cross-group constraint, so this matches [`sca_solve`]. Each group stops on
/// its own share `μ_g` of the stopping threshold; the shares sum to μ.
pub fn solve_per_group(instance: &SystemInstance, cfg: &SystemConfig, settings: &ScaSettings) -> SolveReport {
    if zero_demands(cfg) {
        return zero_demand_report(instance, cfg, settings);
    }
    if harvest_impossible(cfg) {
        let why = "harvest target with zero conversion efficiency".to_string();
        return failed_report(instance, cfg, settings, Outcome::InitializationFailed(why), 0);
    }
    let all = specs(instance);
    let share = settings.abs_mu.map(|mu| mu / all.len() as f64);
    let mut groups = Vec::with_capacity(all.len());
    let mut traces: Vec<Vec<f64>> = Vec::new();
    let mut statuses: Vec<Vec<QpStatus>> = Vec::new();
    let mut records: Vec<Vec<TraceRecord>> = Vec::new();
    let mut converged = true;
    let mut restarts = 0;
    let mut mu = 0.0;
    for spec in &all {
        let (result, r) = engine_with_restart(std::slice::from_ref(spec), cfg, settings, share);
        restarts += r;
        match result {
            Err(e) => return failed_report(instance, cfg, settings, error_outcome(e), restarts),
            Ok(out) => {
                converged &= out.converged;
                mu += out.mu;
                traces.push(out.objective_trace);
                statuses.push(out.statuses);
                records.push(out.trace);
                groups.extend(out.state.groups);
            }
        }
    }
    let state = SubproblemState { groups };
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let at = |t: &Vec<f64>, i: usize| t[i.min(t.len() - 1)];
    let objective_trace: Vec<f64> = (0..len).map(|i| traces.iter().map(|t| at(t, i)).sum()).collect();
    let iterations = len.saturating_sub(1);
    let subproblem_statuses: Vec<QpStatus> = (0..iterations)
        .map(|i| {
            statuses
                .iter()
                .filter_map(|s| s.get(i).copied())
                .find(|&s| s != QpStatus::Optimal)
                .unwrap_or(QpStatus::Optimal)
        })
        .collect();
    let trace = (0..iterations)
        .map(|i| {
            let live: Vec<&TraceRecord> = records.iter().filter_map(|r| r.get(i)).collect();
            TraceRecord {
                iteration: i + 1,
                total_power: objective_trace[i + 1],
                qp_status: subproblem_statuses[i],
                step: live.iter().map(|r| r.step).fold(1.0, f64::min),
                rate_violation: live.iter().map(|r| r.rate_violation).fold(0.0, f64::max),
                harvest_violation: live.iter().map(|r| r.harvest_violation).fold(0.0, f64::max),
            }
        })
        .collect();
    let final_vars = state.vars(instance.users());
    let feasibility = check_feasible(instance, &final_vars, cfg, &settings.tol);
    SolveReport {
        final_vars,
        objective_trace,
        iterations,
        converged,
        feasibility,
        subproblem_statuses,
        trace,
        outcome: if converged { Outcome::Converged } else { Outcome::NotConverged },
        restarts,
        mu,
    }
}
