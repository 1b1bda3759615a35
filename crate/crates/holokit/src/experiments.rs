//! The experiment registry. Each run is prepared (fully validated) first,
//! then executed into in-memory artifacts; nothing touches disk here.

use crate::config::{
    from_c64, to_c64, ArityName, Complex, Params, RouteName, RunConfig, StochasticParams,
};
use crate::error::RunError;
use holokit_core::dynamics::{self, EvolveOptions, FidelityConvention, SweepRow, SweepSpec, SweepTable};
use holokit_core::gates::{self, Loop, PhaseMethod, Side};
use holokit_core::geometry::{self, TransportRoute, MIN_TRANSPORT_STEPS};
use holokit_core::noise::{self, CoherentTable, NoiseProcessSpec, StochasticOptions};
use holokit_core::{linalg, Arity, CMat, ModelConfig, ParameterPoint, C64};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

/// Trajectories per work item of the stochastic experiment.
pub const TRAJECTORY_CHUNK: usize = 50;

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// A validated experiment ready to execute.
#[derive(Debug, Clone)]
pub enum Prepared {
    Gate { cfg: ModelConfig, lp: Loop, arity: Arity, radial_points: usize, r_max: f64, outline_points: usize },
    Transport { cfg: ModelConfig, lp: Loop, arity: Arity, route: RouteName, schrodinger: bool, steps: usize, dt: f64 },
    Gap { cfg: ModelConfig, w_grid: Vec<f64>, point: ParameterPoint },
    TimeSweep { cfg: ModelConfig, spec: SweepSpec, points: Vec<(f64, f64, f64)> },
    CoherentSweep { cfg: ModelConfig, radii: Vec<f64>, epsilons: Vec<f64> },
    Stochastic { cfg: ModelConfig, lp: Loop, spec: NoiseProcessSpec, opts: StochasticOptions },
}

fn positive(name: &str, v: f64) -> Result<(), RunError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(RunError::Schema(format!("{name} must be positive and finite, got {v}")))
    }
}

fn loop_for(cfg: &ModelConfig, spec: &crate::config::LoopSpec) -> Result<Loop, RunError> {
    let lp = spec.build(cfg.d)?;
    if lp.d() != cfg.d {
        return Err(RunError::Schema(format!("loop direction has {} entries, model d = {}", lp.d(), cfg.d)));
    }
    lp.check_closed().map_err(RunError::schema)?;
    Ok(lp)
}

/// Validates a config and builds every core input.
pub fn prepare(run: &RunConfig) -> Result<Prepared, RunError> {
    let cfg = run.model.build()?;
    let res = &run.resolution;
    positive("resolution.dt", res.dt)?;
    Ok(match run.params()? {
        Params::Gate(p) => {
            if p.radial_points < 2 || p.outline_points < 2 {
                return Err(RunError::Schema("radial_points and outline_points must be at least 2".into()));
            }
            positive("r_max", p.r_max)?;
            let lp = loop_for(&cfg, &p.lp)?;
            Prepared::Gate {
                cfg,
                lp,
                arity: p.arity.into(),
                radial_points: p.radial_points,
                r_max: p.r_max,
                outline_points: p.outline_points,
            }
        }
        Params::Transport(p) => {
            if res.steps < MIN_TRANSPORT_STEPS {
                return Err(RunError::Schema(format!("resolution.steps must be at least {MIN_TRANSPORT_STEPS}")));
            }
            if cfg.gamma != 0.0 {
                return Err(RunError::Schema("transport requires model.gamma = 0".into()));
            }
            if p.arity == ArityName::Two && cfg.w <= 0.0 {
                return Err(RunError::Schema("two-atom transport requires W > 0".into()));
            }
            let lp = loop_for(&cfg, &p.lp)?;
            Prepared::Transport {
                cfg,
                lp,
                arity: p.arity.into(),
                route: p.route,
                schrodinger: p.schrodinger,
                steps: res.steps,
                dt: res.dt,
            }
        }
        Params::Gap(p) => {
            if cfg.gamma != 0.0 {
                return Err(RunError::Schema("gap requires model.gamma = 0".into()));
            }
            if p.w_grid.is_empty() {
                return Err(RunError::Schema("W_grid must not be empty".into()));
            }
            for &w in &p.w_grid {
                positive("W_grid entry", w)?;
            }
            let amps: Vec<C64> = match &p.amplitudes {
                Some(v) => v.iter().map(to_c64).collect(),
                None => {
                    let mut a = vec![C64::new(0.0, 0.0); cfg.d];
                    a[cfg.d - 1] = C64::new(5.0, 0.0);
                    a
                }
            };
            let point = ParameterPoint::from_amplitudes(&amps);
            point.check(&cfg).map_err(RunError::schema)?;
            Prepared::Gap { cfg, w_grid: p.w_grid, point }
        }
        Params::TimeSweep(p) => {
            let schedule = crate::config::parse_schedule(&p.schedule)?;
            positive("R", p.radius)?;
            if p.t1_grid.is_empty() == p.total_times.is_empty() {
                return Err(RunError::Schema("give exactly one of t1_grid and total_times".into()));
            }
            let mut splits = Vec::new();
            for &total in &p.total_times {
                let s = dynamics::splits_for_total(total, &p.t2_grid);
                if s.len() != p.t2_grid.len() {
                    return Err(RunError::Schema(format!("every t2 must lie in (0, {total})")));
                }
                splits.extend(s);
            }
            let t1_grid = if splits.is_empty() { p.t1_grid.clone() } else { splits.iter().map(|s| s.0).collect() };
            let spec = SweepSpec {
                radius: p.radius,
                target_alpha2: p.target_alpha2,
                dt: res.dt,
                convention: FidelityConvention::from(p.convention),
                ..SweepSpec::cz(cfg.d, schedule, t1_grid, p.t2_grid.clone(), p.gammas.clone())
            };
            spec.validate().map_err(RunError::schema)?;
            if cfg.gamma != 0.0 {
                return Err(RunError::Schema("time-sweep takes decay rates from params.gammas; set model.gamma = 0".into()));
            }
            gates::solve_beta_for_phase(spec.radius, spec.target_alpha2, gates::Which::Alpha2)
                .map_err(RunError::from_core)?;
            let points = if splits.is_empty() {
                spec.points()
            } else {
                p.gammas.iter().flat_map(|&g| splits.iter().map(move |&(t1, t2)| (t1, t2, g))).collect()
            };
            Prepared::TimeSweep { cfg, spec, points }
        }
        Params::CoherentSweep(p) => {
            if p.radii.is_empty() || p.epsilons.is_empty() {
                return Err(RunError::Schema("radii and epsilons must not be empty".into()));
            }
            for &r in &p.radii {
                positive("radius", r)?;
            }
            if p.epsilons.iter().any(|e| !e.is_finite() || e.abs() >= 1.0) {
                return Err(RunError::Schema("epsilons must be finite with |epsilon| < 1".into()));
            }
            Prepared::CoherentSweep { cfg, radii: p.radii, epsilons: p.epsilons }
        }
        Params::Stochastic(p) => prepare_stochastic(cfg, &p, run.seed, res.dt)?,
    })
}

fn prepare_stochastic(cfg: ModelConfig, p: &StochasticParams, seed: u64, dt: f64) -> Result<Prepared, RunError> {
    if cfg.gamma != 0.0 {
        return Err(RunError::Schema("stochastic requires model.gamma = 0".into()));
    }
    if p.n_traj == 0 {
        return Err(RunError::Schema("n_traj must be positive".into()));
    }
    let spec = p.noise(seed);
    spec.validate().map_err(RunError::schema)?;
    noise::check_grid(&spec, dt).map_err(RunError::schema)?;
    let lp = loop_for(&cfg, &p.lp)?;
    let opts = StochasticOptions { n_traj: p.n_traj, dt, kernel: p.kernel.into(), arity: p.arity.into() };
    Ok(Prepared::Stochastic { cfg, lp, spec, opts })
}

fn matrix_json(m: &CMat) -> Vec<Vec<Complex>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| from_c64(m[(i, j)])).collect()).collect()
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact, RunError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| RunError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact { name: name.into(), bytes })
}

fn csv_artifact(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Io(e.to_string()))?;
    Ok(Artifact { name: name.into(), bytes })
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> serde_json::Value {
    match x {
        Some(v) if v.is_finite() => json!(v),
        _ => serde_json::Value::Null,
    }
}

fn arity_name(a: Arity) -> &'static str {
    match a {
        Arity::One => "one",
        Arity::Two => "two",
    }
}

/// Runs a prepared experiment.
pub fn execute(prep: &Prepared) -> Result<Vec<Artifact>, RunError> {
    match prep {
        Prepared::Gate { cfg, lp, arity, radial_points, r_max, outline_points } => {
            gate(cfg, lp, *arity, *radial_points, *r_max, *outline_points)
        }
        Prepared::Transport { cfg, lp, arity, route, schrodinger, steps, dt } => {
            transport(cfg, lp, *arity, *route, *schrodinger, *steps, *dt)
        }
        Prepared::Gap { cfg, w_grid, point } => gap(cfg, w_grid, point),
        Prepared::TimeSweep { cfg, spec, points } => {
            let table = time_sweep(cfg, spec, points)?;
            Ok(vec![sweep_csv(&table)?])
        }
        Prepared::CoherentSweep { cfg, radii, epsilons } => {
            let table = noise::coherent_error_sweep(cfg, radii, epsilons).map_err(RunError::from_core)?;
            coherent_artifacts(&table)
        }
        Prepared::Stochastic { cfg, lp, spec, opts } => stochastic(cfg, lp, spec, opts),
    }
}

fn gate(
    cfg: &ModelConfig,
    lp: &Loop,
    arity: Arity,
    radial_points: usize,
    r_max: f64,
    outline_points: usize,
) -> Result<Vec<Artifact>, RunError> {
    let report = gates::analytic_gate(cfg, lp, arity).map_err(RunError::from_core)?;
    let line = report.phases.ok_or_else(|| RunError::Numerical("gate without phases".into()))?;
    let surface = gates::phase_integrals(lp, PhaseMethod::Surface).ok();
    let total_angle = lp.pacman().map(|p| p.total_angle());
    let body = json!({
        "arity": arity_name(arity),
        "d": cfg.d,
        "direction": lp.direction.iter().map(|z| from_c64(*z)).collect::<Vec<_>>(),
        "total_angle": opt_num(total_angle),
        "alpha1": line.alpha1,
        "alpha2": line.alpha2,
        "alpha1_surface": opt_num(surface.map(|s| s.alpha1)),
        "alpha2_surface": opt_num(surface.map(|s| s.alpha2)),
        "quadrature_error": line.error,
        "unitarity_defect": report.unitarity_defect,
        "U": matrix_json(&report.u),
    });
    let radial: Vec<Vec<String>> = (0..radial_points)
        .map(|i| {
            let r = r_max * i as f64 / (radial_points - 1) as f64;
            vec![num(r), num(gates::c1(r)), num(gates::c2(r))]
        })
        .collect();
    let t_end = lp.duration();
    let outline: Vec<Vec<String>> = (0..outline_points)
        .map(|i| {
            let t = t_end * i as f64 / (outline_points - 1) as f64;
            let side = if i + 1 == outline_points { Side::Left } else { Side::Right };
            let (f, _) = lp.eval(t, side);
            vec![num(t), num(f.re), num(f.im)]
        })
        .collect();
    Ok(vec![
        json_artifact("gate.json", &body)?,
        csv_artifact("radial.csv", &["r", "C1", "C2"], radial)?,
        csv_artifact("loop.csv", &["t", "re", "im"], outline)?,
    ])
}

fn transport(
    cfg: &ModelConfig,
    lp: &Loop,
    arity: Arity,
    route: RouteName,
    schrodinger: bool,
    steps: usize,
    dt: f64,
) -> Result<Vec<Artifact>, RunError> {
    let analytic = gates::analytic_gate(cfg, lp, arity).map_err(RunError::from_core)?.u;
    let routes: Vec<(&str, TransportRoute)> = match route {
        RouteName::ClosedForm => vec![("closed-form", TransportRoute::ClosedForm)],
        RouteName::Frame => vec![("frame", TransportRoute::Frame)],
        RouteName::Both => vec![("closed-form", TransportRoute::ClosedForm), ("frame", TransportRoute::Frame)],
    };
    let mut results = serde_json::Map::new();
    let mut mats = Vec::new();
    for (name, r) in routes {
        let hol = geometry::parallel_transport_via(cfg, lp, steps, arity, r).map_err(RunError::from_core)?;
        results.insert(
            name.into(),
            json!({
                "steps": hol.steps,
                "distance_to_analytic": linalg::op_norm(&(&hol.u - &analytic)),
                "unitarity_defect": hol.unitarity_defect,
                "off_block": hol.off_block,
                "U": matrix_json(&hol.u),
            }),
        );
        mats.push(hol.u);
    }
    let route_distance = if mats.len() == 2 { Some(linalg::op_norm(&(&mats[0] - &mats[1]))) } else { None };
    let evolution = if schrodinger {
        let evo = dynamics::schrodinger_evolve(cfg, lp, EvolveOptions::step_size(lp.duration(), dt), arity)
            .map_err(RunError::from_core)?;
        let rep = dynamics::effective_gate(cfg, &evo, Some(&analytic), FidelityConvention::Raw)
            .map_err(RunError::from_core)?;
        json!({
            "steps": evo.steps,
            "dt": dt,
            "fidelity": opt_num(rep.fidelity),
            "leakage": rep.leakage,
            "U": matrix_json(&rep.u),
        })
    } else {
        serde_json::Value::Null
    };
    let body = json!({
        "arity": arity_name(arity),
        "duration": lp.duration(),
        "analytic": matrix_json(&analytic),
        "routes": results,
        "route_distance": opt_num(route_distance),
        "schrodinger": evolution,
    });
    Ok(vec![json_artifact("transport.json", &body)?])
}

pub const GAP_HEADER: [&str; 6] = ["W", "gap", "asymptotic_gap", "D2", "root_mismatch", "near_W"];

fn gap(cfg: &ModelConfig, w_grid: &[f64], point: &ParameterPoint) -> Result<Vec<Artifact>, RunError> {
    let rows = w_grid
        .iter()
        .map(|&w| {
            let c = ModelConfig { w, ..*cfg };
            let rep = holokit_core::model::spectral_gap(&c, point).map_err(RunError::from_core)?;
            Ok(vec![
                num(w),
                num(rep.gap),
                num(rep.asymptotic_gap),
                num(rep.d2),
                num(rep.root_mismatch),
                rep.near_w.map(num).unwrap_or_default(),
            ])
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    Ok(vec![csv_artifact("gap.csv", &GAP_HEADER, rows)?])
}

/// Parallel sweep; rows come back sorted regardless of scheduling.
pub fn time_sweep(cfg: &ModelConfig, spec: &SweepSpec, points: &[(f64, f64, f64)]) -> Result<SweepTable, RunError> {
    let rows: Vec<SweepRow> = points
        .par_iter()
        .copied()
        .map(|(t1, t2, g)| dynamics::sweep_row(cfg, spec, t1, t2, g))
        .collect::<holokit_core::Result<Vec<_>>>()
        .map_err(RunError::from_core)?;
    let mut table = SweepTable { rows };
    table.sort();
    Ok(table)
}

pub fn sweep_csv(table: &SweepTable) -> Result<Artifact, RunError> {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.t1),
                num(r.t2),
                num(r.gamma),
                num(r.radius),
                num(r.w),
                r.schedule.clone(),
                num(r.total_time),
                num(r.fidelity),
                num(r.leakage),
            ]
        })
        .collect();
    csv_artifact("sweep.csv", &SweepTable::HEADER, rows)
}

fn coherent_artifacts(table: &CoherentTable) -> Result<Vec<Artifact>, RunError> {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.radius),
                num(r.beta),
                num(r.epsilon),
                num(r.dalpha1),
                num(r.dalpha2),
                num(r.bound1),
                num(r.bound2),
                num(r.f_exact),
                num(r.f_expansion),
            ]
        })
        .collect();
    let lo = table.fits.iter().map(|f| f.radius).fold(f64::INFINITY, f64::min);
    let hi = table.fits.iter().map(|f| f.radius).fold(f64::NEG_INFINITY, f64::max);
    let fits = json!({
        "fits": table.fits.iter().map(|f| json!({"R": f.radius, "slope": f.slope, "c": f.c})).collect::<Vec<_>>(),
        "c_exponent": opt_num(table.c_exponent(lo, hi)),
    });
    Ok(vec![csv_artifact("coherent.csv", &CoherentTable::HEADER, rows)?, json_artifact("coherent_fits.json", &fits)?])
}

/// Trajectory sum in fixed chunks, reduced in index order so the result
/// does not depend on the thread count.
pub fn chunked_trajectory_sum(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    opts: &StochasticOptions,
) -> Result<CMat, RunError> {
    let chunks: Vec<(u64, usize)> = (0..opts.n_traj)
        .step_by(TRAJECTORY_CHUNK)
        .map(|first| (first as u64, TRAJECTORY_CHUNK.min(opts.n_traj - first)))
        .collect();
    let parts: Vec<CMat> = chunks
        .into_par_iter()
        .map(|(first, count)| noise::trajectory_sum(cfg, lp, spec, first, count, opts))
        .collect::<holokit_core::Result<Vec<_>>>()
        .map_err(RunError::from_core)?;
    let n = opts.arity.full_dim(cfg.d);
    Ok(parts.iter().fold(CMat::zeros(n, n), |acc, p| acc + p))
}

fn stochastic(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    opts: &StochasticOptions,
) -> Result<Vec<Artifact>, RunError> {
    let sum = chunked_trajectory_sum(cfg, lp, spec, opts)?;
    let cmp = noise::compare_with_master(cfg, lp, spec, opts, sum).map_err(RunError::from_core)?;
    let body = json!({
        "gamma": spec.gamma,
        "tau_c": spec.tau_c,
        "sigma2": spec.sigma2,
        "n_traj": cmp.n_traj,
        "trace_distance": cmp.trace_distance,
        "seed": spec.seed,
        "kernel": format!("{:?}", opts.kernel).to_lowercase(),
        "dt": opts.dt,
        "steps": cmp.steps,
        "master_trace_error": cmp.master_trace_error,
        "min_eigenvalue_avg": cmp.rho_avg.min_eigenvalue(),
        "rho_avg": matrix_json(&cmp.rho_avg.rho),
        "rho_master": matrix_json(&cmp.rho_master.rho),
    });
    Ok(vec![json_artifact("stochastic.json", &body)?])
}
