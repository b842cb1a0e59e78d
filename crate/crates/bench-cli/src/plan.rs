//! Experiment plans from flat `key = value` files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted
//! (`system.k = 10`). Lists are comma separated. Later assignments win, so
//! command-line overrides are applied after the file. Unknown keys are
//! errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use swipt::oracle::GridSpec;
use swipt::sca::ScaSettings;
use swipt::units::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm};
use swipt::SystemConfig;

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// P^min, listed in dBm.
    MinHarvest,
    /// R^min, listed in bit/Hz.
    MinRate,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MinHarvest => "pmin_dbm",
            SweepParam::MinRate => "rmin_bits_hz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    ScaNoma,
    Tdma,
    Oracle,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::ScaNoma => "sca-noma",
            Solver::Tdma => "tdma",
            Solver::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sca-noma" => Ok(Solver::ScaNoma),
            "tdma" => Ok(Solver::Tdma),
            "oracle" => Ok(Solver::Oracle),
            other => Err(format!("unknown solver `{other}` (expected sca-noma, tdma or oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub base: SystemConfig,
    pub sweep_param: SweepParam,
    pub pmin_values_dbm: Vec<f64>,
    pub rmin_values: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    pub out: PathBuf,
    pub converge_pmin_dbm: Vec<f64>,
    pub converge_rmin: f64,
    pub sca: ScaSettings,
    pub grid: GridSpec,
    pub certify_slack: f64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            base: SystemConfig::default(),
            sweep_param: SweepParam::MinHarvest,
            pmin_values_dbm: vec![-30.0, -25.0, -20.0, -15.0, -10.0],
            rmin_values: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            realizations: 500,
            seed: 1,
            solvers: vec![Solver::ScaNoma, Solver::Tdma],
            out: PathBuf::from("out"),
            converge_pmin_dbm: vec![-30.0, -20.0],
            converge_rmin: 0.01,
            sca: ScaSettings::default(),
            grid: GridSpec::default(),
            certify_slack: 0.05,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, BenchError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| BenchError::BadValue { key: key.into(), msg: format!("`{value}`: {e}") })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, BenchError>
where
    T::Err: fmt::Display,
{
    value.split(',').map(|v| parse_num(key, v.trim())).collect()
}

impl ExperimentPlan {
    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), BenchError> {
        let v = value.trim();
        let b = &mut self.base;
        match key {
            "system.k" => b.users = parse_num(key, v)?,
            "system.c" => b.groups = parse_num(key, v)?,
            "system.users_per_group" => b.users_per_group = parse_num(key, v)?,
            "system.cell_radius_m" => b.cell_radius = parse_num(key, v)?,
            "system.path_loss_exp" => b.path_loss_exp = parse_num(key, v)?,
            "system.ref_distance_m" => b.ref_distance = parse_num(key, v)?,
            "system.ref_attenuation_db" => b.ref_attenuation = db_to_linear(parse_num(key, v)?),
            "system.noise_antenna_dbm_hz" => b.noise_antenna = dbm_to_watts(parse_num(key, v)?),
            "system.noise_id_dbm_hz" => b.noise_id = dbm_to_watts(parse_num(key, v)?),
            "system.noise_eh_dbm_hz" => b.noise_eh = dbm_to_watts(parse_num(key, v)?),
            "system.eh_efficiency" => b.eh_efficiency = parse_num(key, v)?,
            "system.frame_time_s" => b.frame_time = parse_num(key, v)?,
            "qos.rmin_bits_hz" => b.min_rate = parse_num(key, v)?,
            "qos.pmin_dbm" => b.min_harvest = dbm_to_watts(parse_num(key, v)?),
            "sweep.param" => {
                self.sweep_param = match v {
                    "pmin" | "pmin_dbm" => SweepParam::MinHarvest,
                    "rmin" | "rmin_bits_hz" => SweepParam::MinRate,
                    _ => return Err(BenchError::BadValue { key: key.into(), msg: format!("`{v}` is not pmin or rmin") }),
                }
            }
            "sweep.pmin_dbm" => self.pmin_values_dbm = parse_list(key, v)?,
            "sweep.rmin_bits_hz" => self.rmin_values = parse_list(key, v)?,
            "run.realizations" => self.realizations = parse_num(key, v)?,
            "run.seed" => self.seed = parse_num(key, v)?,
            "run.solvers" => self.solvers = parse_list(key, v)?,
            "run.out" => self.out = PathBuf::from(v),
            "converge.pmin_dbm" => self.converge_pmin_dbm = parse_list(key, v)?,
            "converge.rmin_bits_hz" => self.converge_rmin = parse_num(key, v)?,
            "sca.rel_mu" => self.sca.rel_mu = parse_num(key, v)?,
            "sca.max_outer" => self.sca.max_outer = parse_num(key, v)?,
            "oracle.points" => {
                let n: usize = parse_num(key, v)?;
                self.grid.power_points = n;
                self.grid.beta_points = n;
                self.grid.last_power_points = n * 64;
            }
            "oracle.refinement" => self.grid.refinement = parse_num(key, v)?,
            "oracle.slack" => self.certify_slack = parse_num(key, v)?,
            _ => return Err(BenchError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies every assignment of a config text.
    pub fn apply_text(&mut self, text: &str) -> Result<(), BenchError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Syntax { line: k + 1, msg: format!("expected key = value, got `{line}`") })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        self.base.validate()?;
        self.grid.validate()?;
        let values = self.sweep_values();
        if values.is_empty() {
            return Err(BenchError::Plan("sweep value list is empty".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(BenchError::Plan(format!("sweep values must be strictly increasing: {values:?}")));
        }
        if self.realizations == 0 {
            return Err(BenchError::Plan("run.realizations must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(BenchError::Plan("run.solvers is empty".into()));
        }
        if self.converge_pmin_dbm.is_empty() {
            return Err(BenchError::Plan("converge.pmin_dbm is empty".into()));
        }
        if !(self.sca.rel_mu > 0.0) || self.sca.max_outer == 0 {
            return Err(BenchError::Plan("sca.rel_mu must be positive and sca.max_outer at least 1".into()));
        }
        if !(self.certify_slack >= 0.0) {
            return Err(BenchError::Plan("oracle.slack must be non-negative".into()));
        }
        Ok(())
    }

    pub fn sweep_values(&self) -> &[f64] {
        match self.sweep_param {
            SweepParam::MinHarvest => &self.pmin_values_dbm,
            SweepParam::MinRate => &self.rmin_values,
        }
    }

    /// System configuration at one sweep value.
    pub fn config_at(&self, value: f64) -> SystemConfig {
        let mut cfg = self.base.clone();
        match self.sweep_param {
            SweepParam::MinHarvest => cfg.min_harvest = dbm_to_watts(value),
            SweepParam::MinRate => cfg.min_rate = value,
        }
        cfg.seed = self.seed;
        cfg
    }

    /// Renders the plan back into config text that [`parse_config`] accepts.
    pub fn to_text(&self) -> String {
        let b = &self.base;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let solvers = self.solvers.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("system.k = {}", b.users),
            format!("system.c = {}", b.groups),
            format!("system.users_per_group = {}", b.users_per_group),
            format!("system.cell_radius_m = {}", b.cell_radius),
            format!("system.path_loss_exp = {}", b.path_loss_exp),
            format!("system.ref_distance_m = {}", b.ref_distance),
            format!("system.ref_attenuation_db = {}", linear_to_db(b.ref_attenuation)),
            format!("system.noise_antenna_dbm_hz = {}", watts_to_dbm(b.noise_antenna)),
            format!("system.noise_id_dbm_hz = {}", watts_to_dbm(b.noise_id)),
            format!("system.noise_eh_dbm_hz = {}", watts_to_dbm(b.noise_eh)),
            format!("system.eh_efficiency = {}", b.eh_efficiency),
            format!("system.frame_time_s = {}", b.frame_time),
            format!("qos.rmin_bits_hz = {}", b.min_rate),
            format!("qos.pmin_dbm = {}", watts_to_dbm(b.min_harvest)),
            format!("sweep.param = {}", if self.sweep_param == SweepParam::MinHarvest { "pmin" } else { "rmin" }),
            format!("sweep.pmin_dbm = {}", list(&self.pmin_values_dbm)),
            format!("sweep.rmin_bits_hz = {}", list(&self.rmin_values)),
            format!("run.realizations = {}", self.realizations),
            format!("run.seed = {}", self.seed),
            format!("run.solvers = {solvers}"),
            format!("run.out = {}", self.out.display()),
            format!("converge.pmin_dbm = {}", list(&self.converge_pmin_dbm)),
            format!("converge.rmin_bits_hz = {}", self.converge_rmin),
            format!("sca.rel_mu = {}", self.sca.rel_mu),
            format!("sca.max_outer = {}", self.sca.max_outer),
            format!("oracle.refinement = {}", self.grid.refinement),
            format!("oracle.slack = {}", self.certify_slack),
        ];
        if self.grid.beta_points == self.grid.power_points && self.grid.last_power_points == 64 * self.grid.power_points {
            lines.push(format!("oracle.points = {}", self.grid.power_points));
        }
        lines.push(String::new());
        lines.join("\n")
    }
}

/// Defaults, then the config text, then the overrides in order.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentPlan, BenchError> {
    let mut plan = ExperimentPlan::default();
    plan.apply_text(text)?;
    for (k, v) in overrides {
        plan.set(k, v)?;
    }
    plan.validate()?;
    Ok(plan)
}

/// Like [`parse_config`] with an optional file.
pub fn load_plan(path: Option<&Path>, overrides: &[(String, String)]) -> Result<ExperimentPlan, BenchError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| BenchError::Io { path: p.into(), source })?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
