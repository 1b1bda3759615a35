//! Run configuration: JSON schema version "1".
//!
//! A config names one experiment and carries its parameter block under
//! `params`. Every object rejects unknown keys. Parsing and building the
//! core objects both happen before any computation starts.

use crate::error::RunError;
use holokit_core::dynamics::FidelityConvention;
use holokit_core::gates::{self, Loop, Pacman, Profile, Schedule, Which};
use holokit_core::noise::{MasterKernel, NoiseProcessSpec};
use holokit_core::{Arity, ModelConfig, C64};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const SCHEMA_VERSION: &str = "1";

/// A complex number as `[re, im]`.
pub type Complex = [f64; 2];

pub fn to_c64(z: &Complex) -> C64 {
    C64::new(z[0], z[1])
}

pub fn from_c64(z: C64) -> Complex {
    [z.re, z.im]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gate,
    Transport,
    Gap,
    TimeSweep,
    CoherentSweep,
    Stochastic,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Gate,
        ExperimentKind::Transport,
        ExperimentKind::Gap,
        ExperimentKind::TimeSweep,
        ExperimentKind::CoherentSweep,
        ExperimentKind::Stochastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gate => "gate",
            ExperimentKind::Transport => "transport",
            ExperimentKind::Gap => "gap",
            ExperimentKind::TimeSweep => "time-sweep",
            ExperimentKind::CoherentSweep => "coherent-sweep",
            ExperimentKind::Stochastic => "stochastic",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Gate => "closed-form gate and phases of one loop; radial integrand table",
            ExperimentKind::Transport => "parallel-transport holonomy vs closed form, optional Schrodinger check",
            ExperimentKind::Gap => "two-atom spectral gap over an interaction grid",
            ExperimentKind::TimeSweep => "CZ fidelity and leakage over (t1, t2, gamma)",
            ExperimentKind::CoherentSweep => "phase errors and fidelity under loop deformations",
            ExperimentKind::Stochastic => "noise-trajectory average vs master equation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must be "1".
    pub schema: String,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub model: ModelSpec,
    /// Output directory; overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub resolution: Resolution,
    /// Experiment-specific block, checked against that experiment's schema.
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_omega_d")]
    pub omega_d: Complex,
    #[serde(rename = "W", default = "default_w")]
    pub w: f64,
    #[serde(default)]
    pub gamma: f64,
}

fn default_d() -> usize {
    2
}
fn default_omega_d() -> Complex {
    [1.0, 0.0]
}
fn default_w() -> f64 {
    10.0
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { d: 2, omega_d: default_omega_d(), w: default_w(), gamma: 0.0 }
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<ModelConfig, RunError> {
        let cfg = ModelConfig { d: self.d, omega_d: to_c64(&self.omega_d), w: self.w, gamma: self.gamma };
        cfg.validate().map_err(RunError::schema)?;
        Ok(cfg)
    }
}

/// Integrator resolution. `steps` drives fixed-count integrations
/// (transport); `dt` drives time-stepped ones (evolution, noise).
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_steps() -> usize {
    4096
}
fn default_dt() -> f64 {
    0.05
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { steps: default_steps(), dt: default_dt() }
    }
}

/// Arc angle given directly, or solved for a target phase.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum BetaSpec {
    /// Total swept angle; values above 2 pi add full turns.
    Angle(f64),
    Target(PhaseTarget),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseTarget {
    Alpha1(f64),
    Alpha2(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum LoopSpec {
    Pacman {
        #[serde(rename = "R")]
        radius: f64,
        beta: BetaSpec,
        t1: f64,
        t2: f64,
        /// "linear", "quadratic" or "power(k)".
        #[serde(default = "default_schedule")]
        schedule: String,
        /// Drive direction; defaults to the last computational level.
        #[serde(default)]
        direction: Option<Vec<Complex>>,
    },
    Samples {
        times: Vec<f64>,
        values: Vec<Complex>,
        #[serde(default)]
        direction: Option<Vec<Complex>>,
    },
}

fn default_schedule() -> String {
    "linear".into()
}

pub fn parse_schedule(s: &str) -> Result<Schedule, RunError> {
    let s = s.trim();
    match s {
        "linear" => return Ok(Schedule::Linear),
        "quadratic" => return Ok(Schedule::Power(2.0)),
        _ => {}
    }
    let k = s
        .strip_prefix("power(")
        .and_then(|r| r.strip_suffix(')'))
        .and_then(|k| k.trim().parse::<f64>().ok())
        .ok_or_else(|| RunError::Schema(format!("unknown schedule {s:?}")))?;
    if k == 1.0 {
        Ok(Schedule::Linear)
    } else {
        Ok(Schedule::Power(k))
    }
}

/// Splits a total angle into (beta in (0, 2pi], wraps).
pub fn split_angle(total: f64) -> (f64, u32) {
    let two_pi = 2.0 * PI;
    if total.is_nan() || total <= two_pi {
        return (total, 0);
    }
    let wraps = (total / two_pi).ceil() - 1.0;
    (total - two_pi * wraps, wraps as u32)
}

impl LoopSpec {
    pub fn build(&self, d: usize) -> Result<Loop, RunError> {
        let direction = |dir: &Option<Vec<Complex>>| -> Vec<C64> {
            match dir {
                Some(v) => v.iter().map(to_c64).collect(),
                None => gates::last_level_direction(d),
            }
        };
        match self {
            LoopSpec::Pacman { radius, beta, t1, t2, schedule, direction: dir } => {
                let schedule = parse_schedule(schedule)?;
                let (b, wraps) = match beta {
                    BetaSpec::Angle(total) => split_angle(*total),
                    BetaSpec::Target(t) => {
                        let (target, which) = match *t {
                            PhaseTarget::Alpha1(a) => (a, Which::Alpha1),
                            PhaseTarget::Alpha2(a) => (a, Which::Alpha2),
                        };
                        let sol = gates::solve_beta_for_phase(*radius, target, which).map_err(RunError::from_core)?;
                        (sol.beta, sol.wraps)
                    }
                };
                let pac = Pacman::new(*radius, b, wraps, *t1, *t2, schedule).map_err(RunError::schema)?;
                Loop::new(Profile::Pacman(pac), direction(dir)).map_err(RunError::schema)
            }
            LoopSpec::Samples { times, values, direction: dir } => {
                let profile =
                    Profile::samples(times.clone(), values.iter().map(to_c64).collect()).map_err(RunError::schema)?;
                Loop::new(profile, direction(dir)).map_err(RunError::schema)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ArityName {
    One,
    #[default]
    Two,
}

impl From<ArityName> for Arity {
    fn from(a: ArityName) -> Arity {
        match a {
            ArityName::One => Arity::One,
            ArityName::Two => Arity::Two,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GateParams {
    #[serde(rename = "loop")]
    pub lp: LoopSpec,
    #[serde(default)]
    pub arity: ArityName,
    /// Points of the radial integrand table on [0, r_max].
    #[serde(default = "default_radial_points")]
    pub radial_points: usize,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// Points of the sampled loop outline.
    #[serde(default = "default_outline_points")]
    pub outline_points: usize,
}

fn default_radial_points() -> usize {
    201
}
fn default_r_max() -> f64 {
    5.0
}
fn default_outline_points() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum RouteName {
    ClosedForm,
    Frame,
    #[default]
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TransportParams {
    #[serde(rename = "loop")]
    pub lp: LoopSpec,
    #[serde(default)]
    pub arity: ArityName,
    #[serde(default)]
    pub route: RouteName,
    /// Also run Schrodinger evolution at `resolution.dt` and report its fidelity.
    #[serde(default)]
    pub schrodinger: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GapParams {
    #[serde(rename = "W_grid")]
    pub w_grid: Vec<f64>,
    /// Drive amplitudes Omega_0..Omega_{d-1}; defaults to (0, .., 5).
    #[serde(default)]
    pub amplitudes: Option<Vec<Complex>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    #[default]
    Raw,
    Renormalized,
}

impl From<ConventionName> for FidelityConvention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Raw => FidelityConvention::Raw,
            ConventionName::Renormalized => FidelityConvention::Renormalized,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TimeSweepParams {
    #[serde(rename = "R", default = "default_r_max")]
    pub radius: f64,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// Radial times; give either this or `total_times`.
    #[serde(default)]
    pub t1_grid: Vec<f64>,
    pub t2_grid: Vec<f64>,
    /// Fixed totals T = 2 t1 + t2, split over `t2_grid`.
    #[serde(default)]
    pub total_times: Vec<f64>,
    pub gammas: Vec<f64>,
    #[serde(default = "default_alpha2")]
    pub target_alpha2: f64,
    #[serde(default)]
    pub convention: ConventionName,
}

fn default_alpha2() -> f64 {
    PI
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CoherentSweepParams {
    pub radii: Vec<f64>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    #[default]
    Lindblad,
    Frozen,
    Propagated,
}

impl From<KernelName> for MasterKernel {
    fn from(k: KernelName) -> Self {
        match k {
            KernelName::Lindblad => MasterKernel::Lindblad,
            KernelName::Frozen => MasterKernel::Frozen,
            KernelName::Propagated => MasterKernel::Propagated,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct StochasticParams {
    #[serde(rename = "loop")]
    pub lp: LoopSpec,
    pub sigma2: f64,
    pub tau_c: f64,
    pub gamma: f64,
    pub n_traj: usize,
    #[serde(default)]
    pub arity: ArityName,
    #[serde(default)]
    pub kernel: KernelName,
}

impl StochasticParams {
    pub fn noise(&self, seed: u64) -> NoiseProcessSpec {
        NoiseProcessSpec { sigma2: self.sigma2, tau_c: self.tau_c, gamma: self.gamma, seed }
    }
}

/// Parameter block of a validated config.
#[derive(Debug, Clone)]
pub enum Params {
    Gate(GateParams),
    Transport(TransportParams),
    Gap(GapParams),
    TimeSweep(TimeSweepParams),
    CoherentSweep(CoherentSweepParams),
    Stochastic(StochasticParams),
}

fn params_of<T: for<'de> Deserialize<'de>>(v: &serde_json::Value) -> Result<T, RunError> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| RunError::Schema(format!("params: {e}")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, RunError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| RunError::Schema(e.to_string()))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(RunError::Schema(format!("schema version {:?}, expected {SCHEMA_VERSION:?}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<Params, RunError> {
        Ok(match self.experiment {
            ExperimentKind::Gate => Params::Gate(params_of(&self.params)?),
            ExperimentKind::Transport => Params::Transport(params_of(&self.params)?),
            ExperimentKind::Gap => Params::Gap(params_of(&self.params)?),
            ExperimentKind::TimeSweep => Params::TimeSweep(params_of(&self.params)?),
            ExperimentKind::CoherentSweep => Params::CoherentSweep(params_of(&self.params)?),
            ExperimentKind::Stochastic => Params::Stochastic(params_of(&self.params)?),
        })
    }
}

/// JSON schema of an experiment's parameter block, or of the whole config.
pub fn schema_for(name: &str) -> Option<serde_json::Value> {
    let schema = match name {
        "config" => schemars::schema_for!(RunConfig),
        "gate" => schemars::schema_for!(GateParams),
        "transport" => schemars::schema_for!(TransportParams),
        "gap" => schemars::schema_for!(GapParams),
        "time-sweep" => schemars::schema_for!(TimeSweepParams),
        "coherent-sweep" => schemars::schema_for!(CoherentSweepParams),
        "stochastic" => schemars::schema_for!(StochasticParams),
        _ => return None,
    };
    serde_json::to_value(schema).ok()
}
