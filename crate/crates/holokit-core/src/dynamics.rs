//! Full Hilbert-space evolution along a drive loop, effective gates and
//! fidelity-versus-time sweeps.

use crate::error::{Error, Result};
use crate::gates::{self, GateReport, Loop, Pacman, Profile, Schedule, Side, Which};
use crate::integrate;
use crate::linalg;
use crate::model::{self, Arity, ModelConfig};
use crate::CMat;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

pub const MIN_EVOLVE_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub steps: usize,
    /// When set, the run is repeated with half the steps and rejected if the
    /// propagator changes by more than this (relative, operator norm).
    pub check_tolerance: Option<f64>,
}

impl EvolveOptions {
    pub fn steps(steps: usize) -> Self {
        EvolveOptions { steps, check_tolerance: None }
    }

    /// Roughly `dt` per step, never below the minimum.
    pub fn step_size(duration: f64, dt: f64) -> Self {
        Self::steps(((duration / dt).ceil() as usize).max(MIN_EVOLVE_STEPS))
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Full-space propagator.
    pub propagator: CMat,
    pub steps: usize,
    /// Norm of each evolved computational basis state.
    pub final_norms: Vec<f64>,
    pub duration: f64,
    pub hamiltonian_builds: usize,
    /// Relative change against the half-step run, when requested.
    pub halving_change: Option<f64>,
    /// max(|f(0)|, |f(T)|).
    pub endpoint_offset: f64,
    pub arity: Arity,
}

fn propagate(cfg: &ModelConfig, lp: &Loop, steps: usize, arity: Arity) -> (CMat, usize) {
    let od = cfg.omega_d_abs();
    let decay = cfg.gamma > 0.0;
    let segments = integrate::allocate_steps(&lp.breakpoints(), steps);
    let mut builds = 0;
    let u = integrate::magnus4(
        |t| {
            builds += 1;
            let amps = lp.amplitudes(t, Side::Right, od);
            model::hamiltonian_matrix(cfg, &amps, arity, decay)
        },
        linalg::identity(arity.full_dim(cfg.d)),
        &segments,
    );
    (u, builds)
}

/// Propagator of i dpsi/dt = H(lambda(t)) psi, decay included when gamma > 0.
pub fn schrodinger_evolve(cfg: &ModelConfig, lp: &Loop, opts: EvolveOptions, arity: Arity) -> Result<EvolutionResult> {
    cfg.validate()?;
    if lp.d() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: lp.d() });
    }
    if opts.steps < MIN_EVOLVE_STEPS {
        return Err(Error::TooFewSteps { steps: opts.steps, min: MIN_EVOLVE_STEPS });
    }
    let (u, mut builds) = propagate(cfg, lp, opts.steps, arity);
    let halving_change = match opts.check_tolerance {
        None => None,
        Some(tol) => {
            let (coarse, b) = propagate(cfg, lp, (opts.steps / 2).max(1), arity);
            builds += b;
            let change = linalg::op_norm(&(&u - coarse)) / linalg::op_norm(&u).max(f64::MIN_POSITIVE);
            if change > tol {
                return Err(Error::NotConverged { change, tolerance: tol });
            }
            Some(change)
        }
    };
    let final_norms = arity.computational_indices(cfg.d).iter().map(|&j| u.column(j).norm()).collect();
    let start = lp.eval(0.0, Side::Right).0.norm();
    let end = lp.eval(lp.duration(), Side::Left).0.norm();
    Ok(EvolutionResult {
        propagator: u,
        steps: opts.steps,
        final_norms,
        duration: lp.duration(),
        hamiltonian_builds: builds,
        halving_change,
        endpoint_offset: start.max(end),
        arity,
    })
}

/// How the restricted operator enters the fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FidelityConvention {
    /// The sub-unitary restriction as it is.
    #[default]
    Raw,
    /// Restriction divided by sqrt(1 - leakage).
    Renormalized,
}

const BASE_POINT_TOL: f64 = 1e-12;

/// Restricts the propagator to the base-point computational subspace.
pub fn effective_gate(
    cfg: &ModelConfig,
    evo: &EvolutionResult,
    target: Option<&CMat>,
    convention: FidelityConvention,
) -> Result<GateReport> {
    if evo.endpoint_offset > BASE_POINT_TOL {
        return Err(Error::BasePointMismatch(evo.endpoint_offset));
    }
    let idx = evo.arity.computational_indices(cfg.d);
    let n = idx.len();
    if evo.propagator.nrows() != evo.arity.full_dim(cfg.d) {
        return Err(Error::DimensionMismatch { expected: evo.arity.full_dim(cfg.d), got: evo.propagator.nrows() });
    }
    let mut u = CMat::from_fn(n, n, |i, j| evo.propagator[(idx[i], idx[j])]);
    let kept: f64 = (0..n).map(|j| u.column(j).norm_squared()).sum::<f64>() / n as f64;
    let leakage = 1.0 - kept;
    if convention == FidelityConvention::Renormalized && kept > 0.0 {
        u /= crate::C64::new(kept.sqrt(), 0.0);
    }
    let report = GateReport::new(u, leakage);
    match target {
        Some(t) => report.with_target(t.clone()),
        None => Ok(report),
    }
}

/// Fidelity-versus-time grid around a pacman loop targeting alpha_2.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub radius: f64,
    pub schedule: Schedule,
    pub t1_grid: Vec<f64>,
    pub t2_grid: Vec<f64>,
    pub gammas: Vec<f64>,
    /// alpha_2 the arc angle is solved for.
    pub target_alpha2: f64,
    pub direction: Vec<crate::C64>,
    /// Integrator step size.
    pub dt: f64,
    pub convention: FidelityConvention,
}

impl SweepSpec {
    /// Grid of the CZ benchmark: R = 5, alpha_2 = pi, direction (0, .., 1).
    pub fn cz(d: usize, schedule: Schedule, t1_grid: Vec<f64>, t2_grid: Vec<f64>, gammas: Vec<f64>) -> Self {
        SweepSpec {
            radius: 5.0,
            schedule,
            t1_grid,
            t2_grid,
            gammas,
            target_alpha2: PI,
            direction: gates::last_level_direction(d),
            dt: 0.05,
            convention: FidelityConvention::Raw,
        }
    }

    /// Grid points in row order (gamma, t2, t1).
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut v = Vec::new();
        for &g in &self.gammas {
            for &t2 in &self.t2_grid {
                for &t1 in &self.t1_grid {
                    v.push((t1, t2, g));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |v: &[f64]| v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0));
        if bad(&self.t1_grid) || bad(&self.t2_grid) || !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("sweep grids and dt must be positive and non-empty".into()));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidConfig("sweep gammas must be non-negative and non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t1: f64,
    pub t2: f64,
    pub gamma: f64,
    pub radius: f64,
    pub w: f64,
    pub schedule: String,
    pub total_time: f64,
    pub fidelity: f64,
    pub leakage: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: [&'static str; 9] = ["t1", "t2", "gamma", "R", "W", "schedule", "T", "fidelity", "leakage"];

    /// Sorts rows by (gamma, t2, t1).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.gamma.total_cmp(&b.gamma).then(a.t2.total_cmp(&b.t2)).then(a.t1.total_cmp(&b.t1))
        });
    }

    /// Rows at a fixed gamma and t2, ordered by t1.
    pub fn curve(&self, gamma: f64, t2: f64) -> Vec<&SweepRow> {
        let mut v: Vec<&SweepRow> = self.rows.iter().filter(|r| r.gamma == gamma && r.t2 == t2).collect();
        v.sort_by(|a, b| a.t1.total_cmp(&b.t1));
        v
    }
}

/// The pacman loop of a sweep point.
pub fn sweep_loop(spec: &SweepSpec, t1: f64, t2: f64) -> Result<Loop> {
    let sol = gates::solve_beta_for_phase(spec.radius, spec.target_alpha2, Which::Alpha2)?;
    let pac = Pacman::new(spec.radius, sol.beta, sol.wraps, t1, t2, spec.schedule)?;
    Loop::with_direction(Profile::Pacman(pac), &spec.direction)
}

/// One sweep row: evolve, restrict, compare with the loop's own analytic gate.
pub fn sweep_row(cfg: &ModelConfig, spec: &SweepSpec, t1: f64, t2: f64, gamma: f64) -> Result<SweepRow> {
    let cfg = ModelConfig { gamma, ..*cfg };
    let lp = sweep_loop(spec, t1, t2)?;
    let target = gates::analytic_gate(&cfg, &lp, Arity::Two)?.u;
    let evo = schrodinger_evolve(&cfg, &lp, EvolveOptions::step_size(lp.duration(), spec.dt), Arity::Two)?;
    let report = effective_gate(&cfg, &evo, Some(&target), spec.convention)?;
    Ok(SweepRow {
        t1,
        t2,
        gamma,
        radius: spec.radius,
        w: cfg.w,
        schedule: spec.schedule.label(),
        total_time: lp.duration(),
        fidelity: report.fidelity.unwrap_or(f64::NAN),
        leakage: report.leakage,
    })
}

/// Sequential sweep over every grid point.
pub fn fidelity_time_sweep(cfg: &ModelConfig, spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let mut table = SweepTable::default();
    for (t1, t2, g) in spec.points() {
        table.rows.push(sweep_row(cfg, spec, t1, t2, g)?);
    }
    table.sort();
    Ok(table)
}

/// Splits of a fixed total time T = 2 t1 + t2 over the given arc times.
pub fn splits_for_total(total: f64, t2_candidates: &[f64]) -> Vec<(f64, f64)> {
    t2_candidates.iter().filter(|&&t2| t2 > 0.0 && t2 < total).map(|&t2| ((total - t2) / 2.0, t2)).collect()
}
