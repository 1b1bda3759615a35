//! Coherent loop deformations and stochastic drive noise.

use crate::error::{Error, Result};
use crate::gates::loops::Side;
use crate::gates::{self, Loop, PhaseMethod, Profile, Which};
use crate::integrate::{self, Segment};
use crate::linalg;
use crate::model::{self, Arity, ModelConfig};
use crate::quadrature::GaussLegendre;
use crate::{CMat, CVec, C64};
use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real function of time used for amplitude and phase errors.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    /// amplitude * sin(angular_frequency * t + phase).
    Harmonic { amplitude: f64, angular_frequency: f64, phase: f64 },
    /// Piecewise-linear through (times, values); constant outside.
    Samples { times: Vec<f64>, values: Vec<f64> },
}

impl TimeFunction {
    pub fn zero() -> Self {
        TimeFunction::Constant(0.0)
    }

    pub fn eval(&self, t: f64, side: Side) -> (f64, f64) {
        match self {
            TimeFunction::Constant(c) => (*c, 0.0),
            TimeFunction::Harmonic { amplitude, angular_frequency, phase } => {
                let x = angular_frequency * t + phase;
                (amplitude * x.sin(), amplitude * angular_frequency * x.cos())
            }
            TimeFunction::Samples { times, values } => {
                let n = times.len();
                if n == 1 || t < times[0] || (t == times[0] && side == Side::Left) {
                    return (values[0], 0.0);
                }
                if t > times[n - 1] || (t == times[n - 1] && side == Side::Right) {
                    return (values[n - 1], 0.0);
                }
                let mut i = match times.binary_search_by(|x| x.total_cmp(&t)) {
                    Ok(i) => match side {
                        Side::Left => i.saturating_sub(1),
                        Side::Right => i,
                    },
                    Err(i) => i.saturating_sub(1),
                };
                i = i.min(n - 2);
                let slope = (values[i + 1] - values[i]) / (times[i + 1] - times[i]);
                (values[i] + slope * (t - times[i]), slope)
            }
        }
    }

    /// Kinks of the function.
    pub fn nodes(&self) -> Vec<f64> {
        match self {
            TimeFunction::Samples { times, .. } => times.clone(),
            _ => Vec::new(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            TimeFunction::Constant(c) => c.abs(),
            TimeFunction::Harmonic { amplitude, .. } => amplitude.abs(),
            TimeFunction::Samples { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TimeFunction::Constant(c) => c.is_finite(),
            TimeFunction::Harmonic { amplitude, angular_frequency, phase } => {
                amplitude.is_finite() && angular_frequency.is_finite() && phase.is_finite()
            }
            TimeFunction::Samples { times, values } => {
                !times.is_empty()
                    && times.len() == values.len()
                    && times.windows(2).all(|w| w[1] > w[0])
                    && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLoop(format!("malformed time function {self:?}")))
        }
    }
}

/// f -> (1 + epsilon(t)) f exp(i phi(t)).
#[derive(Debug, Clone, PartialEq)]
pub struct LoopPerturbation {
    pub epsilon: TimeFunction,
    pub phi: TimeFunction,
}

impl LoopPerturbation {
    pub fn constant_amplitude(epsilon: f64) -> Self {
        LoopPerturbation { epsilon: TimeFunction::Constant(epsilon), phi: TimeFunction::zero() }
    }

    pub(crate) fn validate(&self, _duration: f64) -> Result<()> {
        self.epsilon.validate()?;
        self.phi.validate()?;
        if self.epsilon.sup_norm() >= 1.0 {
            return Err(Error::InvalidLoop(format!("max |epsilon| = {} must be < 1", self.epsilon.sup_norm())));
        }
        Ok(())
    }

    /// Some(eps) for a pure constant amplitude error.
    pub fn constant_epsilon(&self) -> Option<f64> {
        match (&self.epsilon, &self.phi) {
            (TimeFunction::Constant(e), TimeFunction::Constant(p)) if *p == 0.0 => Some(*e),
            _ => None,
        }
    }
}

/// f -> (1 + eps) f exp(i phi) on the same direction.
pub fn perturb_loop(lp: &Loop, pert: LoopPerturbation) -> Result<Loop> {
    pert.validate(lp.duration())?;
    Loop::new(Profile::Perturbed { base: Box::new(lp.profile.clone()), perturbation: pert }, lp.direction.clone())
}

/// Phase shifts between an ideal and a deformed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaAlpha {
    /// Integral of |C_1| over the region between the loops (concentric pacman only).
    pub bound1: Option<f64>,
    pub bound2: Option<f64>,
    pub exact1: f64,
    pub exact2: f64,
    /// First order in eps: eps theta R^2 C_i(R) (concentric pacman only).
    pub leading1: Option<f64>,
    pub leading2: Option<f64>,
}

/// Radial integral of r |C_i(r)| between two radii.
fn annulus_integral(r0: f64, r1: f64, which: Which) -> f64 {
    let (lo, hi) = if r0 <= r1 { (r0, r1) } else { (r1, r0) };
    if hi == lo {
        return 0.0;
    }
    let gl = GaussLegendre::new(16);
    let c = |r: f64| match which {
        Which::Alpha1 => gates::c1(r),
        Which::Alpha2 => gates::c2(r),
    };
    // split at the sign change of C_2 so |C_2| stays smooth on each panel
    let kink = 0.85463;
    let mut edges = alloc::vec![lo];
    if which == Which::Alpha2 && lo < kink && kink < hi {
        edges.push(refine_c2_root());
    }
    edges.push(hi);
    edges.windows(2).map(|w| gl.integrate_real(w[0], w[1], 8, |r| r * c(r).abs())).sum()
}

/// Positive root of 4 - r^2 - 2r^4 - 6r^6.
fn refine_c2_root() -> f64 {
    let mut r: f64 = 0.85;
    for _ in 0..50 {
        let r2 = r * r;
        let p = 4.0 - r2 - 2.0 * r2 * r2 - 6.0 * r2 * r2 * r2;
        let dp = -2.0 * r - 8.0 * r2 * r - 36.0 * r2 * r2 * r;
        r -= p / dp;
    }
    r
}

/// Exact shifts by line integrals, and the geometric bound for concentric pacman deformations.
pub fn delta_alpha_bound(lp: &Loop, perturbed: &Loop) -> Result<DeltaAlpha> {
    let a = gates::phase_integrals(lp, PhaseMethod::Line)?;
    let b = gates::phase_integrals(perturbed, PhaseMethod::Line)?;
    let mut out = DeltaAlpha {
        bound1: None,
        bound2: None,
        exact1: b.alpha1 - a.alpha1,
        exact2: b.alpha2 - a.alpha2,
        leading1: None,
        leading2: None,
    };
    if let Some((radius, theta, eps)) = concentric_annulus(lp, perturbed) {
        let outer = radius * (1.0 + eps);
        out.bound1 = Some(theta.abs() * annulus_integral(radius, outer, Which::Alpha1));
        out.bound2 = Some(theta.abs() * annulus_integral(radius, outer, Which::Alpha2));
        let r2 = radius * radius;
        out.leading1 = Some(eps * theta * r2 * gates::c1(radius));
        out.leading2 = Some(eps * theta * r2 * gates::c2(radius));
    }
    Ok(out)
}

/// (R, signed total angle, eps) when `perturbed` is `lp` scaled by a constant 1 + eps.
fn concentric_annulus(lp: &Loop, perturbed: &Loop) -> Option<(f64, f64, f64)> {
    let Profile::Perturbed { base, perturbation } = &perturbed.profile else {
        return None;
    };
    if **base != lp.profile || perturbed.direction != lp.direction {
        return None;
    }
    let eps = perturbation.constant_epsilon()?;
    let (pac, sign) = match &lp.profile {
        Profile::Pacman(p) => (p, 1.0),
        Profile::Reversed(b) => match &**b {
            Profile::Pacman(p) => (p, -1.0),
            _ => return None,
        },
        _ => return None,
    };
    Some((pac.radius, sign * pac.total_angle(), eps))
}

/// Second-order fidelity between gates whose phases differ by (da1, da2).
pub fn fidelity_expansion(d: usize, da1: f64, da2: f64) -> f64 {
    let d = d as f64;
    let d2 = d * d;
    1.0 - 2.0 * (d - 1.0) / (d2 + 1.0) * da1 * da1
        - (d2 - 1.0) / (d2 * (d2 + 1.0)) * da2 * da2
        - 4.0 * (d - 1.0) / (d * (d2 + 1.0)) * da1 * da2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentRow {
    pub radius: f64,
    /// Total arc angle of the pacman loop.
    pub beta: f64,
    pub epsilon: f64,
    pub dalpha1: f64,
    pub dalpha2: f64,
    pub bound1: f64,
    pub bound2: f64,
    pub f_exact: f64,
    pub f_expansion: f64,
}

/// Per-radius fit of 1 - F against eps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub radius: f64,
    /// Free log-log slope.
    pub slope: f64,
    /// c(R) in 1 - F = c eps^2, fitted with the slope fixed at 2.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoherentTable {
    pub rows: Vec<CoherentRow>,
    pub fits: Vec<ScalingFit>,
}

impl CoherentTable {
    pub const HEADER: [&'static str; 9] =
        ["R", "beta", "epsilon", "dalpha1", "dalpha2", "bound1", "bound2", "F_exact", "F_expansion"];

    /// Log-log slope of c(R) against R over the fitted radii in [lo, hi].
    pub fn c_exponent(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.fits.iter().filter(|f| f.radius >= lo && f.radius <= hi && f.c > 0.0).map(|f| (f.radius.ln(), f.c.ln())).collect();
        least_squares_slope(&pts)
    }
}

/// Ordinary least-squares slope.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

/// Constant-amplitude deformations of the alpha_2 = pi pacman at each radius.
pub fn coherent_error_sweep(cfg: &ModelConfig, radii: &[f64], epsilons: &[f64]) -> Result<CoherentTable> {
    let dir = gates::last_level_direction(cfg.d);
    let mut table = CoherentTable::default();
    for &radius in radii {
        let sol = gates::solve_beta_for_phase(radius, PI, Which::Alpha2)?;
        let pac = sol.pacman(radius, 1.0, 1.0, gates::Schedule::Linear)?;
        let lp = Loop::new(Profile::Pacman(pac), dir.clone())?;
        let ideal = gates::phase_integrals(&lp, PhaseMethod::Line)?;
        let target = gates::gate_from_phases(&dir, ideal.alpha1, ideal.alpha2, Arity::Two);
        let mut pts = Vec::new();
        let mut c_logs = Vec::new();
        for &eps in epsilons {
            let perturbed = perturb_loop(&lp, LoopPerturbation::constant_amplitude(eps))?;
            let da = delta_alpha_bound(&lp, &perturbed)?;
            let u = gates::gate_from_phases(&dir, ideal.alpha1 + da.exact1, ideal.alpha2 + da.exact2, Arity::Two);
            let f_exact = gates::gate_fidelity(&u, &target)?;
            let row = CoherentRow {
                radius,
                beta: sol.total,
                epsilon: eps,
                dalpha1: da.exact1,
                dalpha2: da.exact2,
                bound1: da.bound1.unwrap_or(f64::NAN),
                bound2: da.bound2.unwrap_or(f64::NAN),
                f_exact,
                f_expansion: fidelity_expansion(cfg.d, da.exact1, da.exact2),
            };
            let infid = 1.0 - f_exact;
            if eps != 0.0 && infid > 0.0 {
                pts.push((eps.abs().ln(), infid.ln()));
                c_logs.push(infid.ln() - 2.0 * eps.abs().ln());
            }
            table.rows.push(row);
        }
        if let Some(slope) = least_squares_slope(&pts) {
            let c = (c_logs.iter().sum::<f64>() / c_logs.len() as f64).exp();
            table.fits.push(ScalingFit { radius, slope, c });
        }
    }
    Ok(table)
}

/// Ornstein-Uhlenbeck drive noise: D(t, s) = sigma2 exp(-|t - s|/tau_c) per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseProcessSpec {
    pub sigma2: f64,
    pub tau_c: f64,
    /// Coupling strength.
    pub gamma: f64,
    pub seed: u64,
}

impl NoiseProcessSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) || !(self.tau_c > 0.0 && self.tau_c.is_finite()) {
            return Err(Error::InvalidConfig(format!("need sigma2 >= 0 and tau_c > 0, got {self:?}")));
        }
        if !self.gamma.is_finite() {
            return Err(Error::InvalidConfig("gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn kernel(&self, lag: f64) -> f64 {
        self.sigma2 * (-lag.abs() / self.tau_c).exp()
    }

    /// F(t) = int_0^t D(t, s) ds.
    pub fn integrated_kernel(&self, t: f64) -> f64 {
        self.sigma2 * self.tau_c * (1.0 - (-t / self.tau_c).exp())
    }

    /// Independent generator for trajectory `index`.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// One stationary path per channel on `times`.
    pub fn sample_path(&self, index: u64, times: &[f64], channels: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng(index);
        let sigma = self.sigma2.sqrt();
        let mut out: Vec<Vec<f64>> = (0..channels).map(|_| Vec::with_capacity(times.len())).collect();
        for (k, &t) in times.iter().enumerate() {
            for path in out.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = if k == 0 {
                    sigma * z
                } else {
                    let rho = (-(t - times[k - 1]) / self.tau_c).exp();
                    path[k - 1] * rho + sigma * (1.0 - rho * rho).sqrt() * z
                };
                path.push(x);
            }
        }
        out
    }
}

/// Noise values on a grid: `paths[trajectory][channel][k]` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<Vec<f64>>>,
}

pub fn check_grid(spec: &NoiseProcessSpec, dt: f64) -> Result<()> {
    let limit = spec.tau_c / 10.0;
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CoarseNoiseGrid { dt, limit });
    }
    Ok(())
}

/// Exact OU sampling on the uniform grid 0, dt, .., T.
pub fn sample_noise_trajectories(
    spec: &NoiseProcessSpec,
    duration: f64,
    dt: f64,
    channels: usize,
    n_traj: usize,
) -> Result<TrajectorySet> {
    spec.validate()?;
    if !(dt > 0.0 && duration > 0.0) {
        return Err(Error::InvalidConfig(format!("need dt > 0 and T > 0, got {dt}, {duration}")));
    }
    check_grid(spec, dt)?;
    let n = (duration / dt).round().max(1.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
    let paths = (0..n_traj).map(|i| spec.sample_path(i as u64, &times, channels)).collect();
    Ok(TrajectorySet { times, paths })
}

/// A density matrix with its trace and purity.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    pub rho: CMat,
    pub trace: f64,
    pub purity: f64,
}

impl MixedState {
    pub fn new(rho: CMat) -> Self {
        let trace = linalg::trace(&rho).re;
        let purity = linalg::trace(&(&rho * &rho)).re;
        MixedState { rho, trace, purity }
    }

    pub fn pure(psi: &CVec) -> Self {
        Self::new(linalg::outer(psi, psi))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        linalg::hermitian_eigenvalues(&herm).first().copied().unwrap_or(0.0)
    }
}

/// Memory kernel used by the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MasterKernel {
    /// Short-correlation limit: K_a = F(t) X_a (Lindblad form).
    #[default]
    Lindblad,
    /// X_a rotated by the instantaneous H(t) over the memory window.
    Frozen,
    /// X_a rotated by the exact propagator, integrated alongside rho.
    Propagated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyComparison {
    pub rho_avg: MixedState,
    pub rho_master: MixedState,
    pub trace_distance: f64,
    /// Largest |tr rho - 1| seen while integrating the master equation.
    pub master_trace_error: f64,
    pub n_traj: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticOptions {
    pub n_traj: usize,
    /// Integrator and noise step.
    pub dt: f64,
    pub kernel: MasterKernel,
    pub arity: Arity,
}

/// Drive coupling operators X_a = |a><f| + h.c. (summed over both atoms for a pair).
pub fn coupling_operators(cfg: &ModelConfig, arity: Arity) -> Vec<CMat> {
    let n = cfg.levels();
    (0..cfg.d)
        .map(|a| {
            let mut x = CMat::zeros(n, n);
            x[(a, n - 1)] = C64::new(1.0, 0.0);
            x[(n - 1, a)] = C64::new(1.0, 0.0);
            match arity {
                Arity::One => x,
                Arity::Two => {
                    let id = linalg::identity(n);
                    linalg::kron(&x, &id) + linalg::kron(&id, &x)
                }
            }
        })
        .collect()
}

/// Equal superposition of the computational basis states.
pub fn initial_state(cfg: &ModelConfig, arity: Arity) -> CVec {
    let idx = arity.computational_indices(cfg.d);
    let mut psi = CVec::zeros(arity.full_dim(cfg.d));
    let amp = C64::new(1.0 / (idx.len() as f64).sqrt(), 0.0);
    for i in idx {
        psi[i] = amp;
    }
    psi
}

fn stochastic_segments(lp: &Loop, dt: f64) -> Vec<Segment> {
    integrate::segments_for_step(&lp.breakpoints(), dt)
}

fn grid_times(segments: &[Segment]) -> Vec<f64> {
    let mut times = alloc::vec![segments.first().map_or(0.0, |s| s.start)];
    for seg in segments {
        let h = seg.h();
        for k in 1..=seg.steps {
            times.push(if k == seg.steps { seg.end } else { seg.start + h * k as f64 });
        }
    }
    times
}

/// Final state of one stochastic trajectory.
pub fn evolve_trajectory(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    index: u64,
    opts: &StochasticOptions,
) -> Result<CVec> {
    check_grid(spec, opts.dt)?;
    let segments = stochastic_segments(lp, opts.dt);
    let times = grid_times(&segments);
    for w in times.windows(2) {
        check_grid(spec, w[1] - w[0])?;
    }
    let xi = spec.sample_path(index, &times, cfg.d);
    let ops = coupling_operators(cfg, opts.arity);
    let od = cfg.omega_d_abs();
    let psi0 = initial_state(cfg, opts.arity);
    let mut psi = CMat::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let mut k0 = 0;
    for seg in &segments {
        let h = seg.h();
        for k in 0..seg.steps {
            let step = k0 + k;
            let t = seg.start + h * k as f64;
            let ham = |node: f64| {
                let s = t + node * h;
                let amps = lp.amplitudes(s, Side::Right, od);
                let mut m = model::hamiltonian_matrix(cfg, &amps, opts.arity, cfg.gamma > 0.0);
                for (a, x) in ops.iter().enumerate() {
                    let v = xi[a][step] * (1.0 - node) + xi[a][step + 1] * node;
                    m += x * C64::new(spec.gamma * v, 0.0);
                }
                m
            };
            psi = integrate::magnus4_step(&ham, h) * psi;
        }
        k0 += seg.steps;
    }
    Ok(CVec::from_column_slice(psi.as_slice()))
}

/// Sum of |psi><psi| over trajectories [first, first + count).
pub fn trajectory_sum(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    first: u64,
    count: usize,
    opts: &StochasticOptions,
) -> Result<CMat> {
    let n = opts.arity.full_dim(cfg.d);
    let mut acc = CMat::zeros(n, n);
    for i in 0..count as u64 {
        let psi = evolve_trajectory(cfg, lp, spec, first + i, opts)?;
        acc += linalg::outer(&psi, &psi);
    }
    Ok(acc)
}

/// Integrates the master equation; returns the final state and the worst trace drift.
///
/// Each step moves to the frame of the step's Magnus propagator, so the
/// coherent part is treated exactly as in the trajectories and RK4 only sees
/// the noise terms.
pub fn master_equation(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    opts: &StochasticOptions,
) -> Result<(MixedState, f64)> {
    spec.validate()?;
    let segments = stochastic_segments(lp, opts.dt);
    let ops = coupling_operators(cfg, opts.arity);
    let od = cfg.omega_d_abs();
    let n = opts.arity.full_dim(cfg.d);
    let g2 = C64::new(spec.gamma * spec.gamma, 0.0);
    let psi0 = initial_state(cfg, opts.arity);
    let ham = |t: f64, side: Side| model::hamiltonian_matrix(cfg, &lp.amplitudes(t, side, od), opts.arity, cfg.gamma > 0.0);
    let dissipator = |rho: &CMat, kernels: &[CMat]| {
        let mut out = CMat::zeros(n, n);
        for (x, k) in ops.iter().zip(kernels) {
            out -= linalg::commutator(x, &linalg::commutator(k, rho)) * g2;
        }
        out
    };
    // blocks: [rho] or [rho, K_0, .., K_{d-1}] when the kernels are propagated
    let rhs = |t: f64, side: Side, y: &[CMat]| -> Vec<CMat> {
        match opts.kernel {
            MasterKernel::Lindblad => {
                let f = C64::new(spec.integrated_kernel(t), 0.0);
                let ks: Vec<CMat> = ops.iter().map(|x| x * f).collect();
                alloc::vec![dissipator(&y[0], &ks)]
            }
            MasterKernel::Frozen => {
                let ks = frozen_kernels(&ham(t, side), &ops, spec, t);
                alloc::vec![dissipator(&y[0], &ks)]
            }
            MasterKernel::Propagated => {
                let mut out = alloc::vec![dissipator(&y[0], &y[1..])];
                for (x, k) in ops.iter().zip(&y[1..]) {
                    out.push(x * C64::new(spec.sigma2, 0.0) - k * C64::new(1.0 / spec.tau_c, 0.0));
                }
                out
            }
        }
    };
    let mut y = alloc::vec![linalg::outer(&psi0, &psi0)];
    if opts.kernel == MasterKernel::Propagated {
        y.extend(ops.iter().map(|_| CMat::zeros(n, n)));
    }
    let mut worst: f64 = 0.0;
    for seg in &segments {
        let h = seg.h();
        for k in 0..seg.steps {
            let t = seg.start + h * k as f64;
            let last = k + 1 == seg.steps;
            let tend = if last { seg.end } else { t + h };
            let end_side = if last { Side::Left } else { Side::Right };
            let sample = |s: f64| ham(s, Side::Right);
            let half = integrate::magnus4_step(&|node: f64| sample(t + node * 0.5 * h), 0.5 * h);
            let full = integrate::magnus4_step(&|node: f64| sample(t + node * h), h);
            y = lawson_rk4_step(&rhs, t, tend, end_side, &half, &full, y);
            worst = worst.max((linalg::trace(&y[0]).re - 1.0).abs());
        }
    }
    Ok((MixedState::new(y.swap_remove(0)), worst))
}

fn conjugate(v: &CMat, blocks: &[CMat]) -> Vec<CMat> {
    blocks.iter().map(|b| v * b * v.adjoint()).collect()
}

fn to_frame(v: &CMat, blocks: &[CMat]) -> Vec<CMat> {
    blocks.iter().map(|b| v.adjoint() * b * v).collect()
}

fn axpy(y: &[CMat], k: &[CMat], h: f64) -> Vec<CMat> {
    y.iter().zip(k).map(|(a, b)| a + b * C64::new(h, 0.0)).collect()
}

/// RK4 in the frame rotating with `half` and `full`, the propagators over
/// the first half and the whole step.
fn lawson_rk4_step<F>(rhs: &F, t: f64, tend: f64, end_side: Side, half: &CMat, full: &CMat, y: Vec<CMat>) -> Vec<CMat>
where
    F: Fn(f64, Side, &[CMat]) -> Vec<CMat>,
{
    let h = tend - t;
    let mid = t + 0.5 * h;
    let k1 = rhs(t, Side::Right, &y);
    let k2 = to_frame(half, &rhs(mid, Side::Right, &conjugate(half, &axpy(&y, &k1, 0.5 * h))));
    let k3 = to_frame(half, &rhs(mid, Side::Right, &conjugate(half, &axpy(&y, &k2, 0.5 * h))));
    let k4 = to_frame(full, &rhs(tend, end_side, &conjugate(full, &axpy(&y, &k3, h))));
    let next: Vec<CMat> = (0..y.len())
        .map(|i| &y[i] + (&k1[i] + (&k2[i] + &k3[i]) * C64::new(2.0, 0.0) + &k4[i]) * C64::new(h / 6.0, 0.0))
        .collect();
    conjugate(full, &next)
}

/// K_a = int_0^t D(t, s) exp(iH(s - t)) X_a exp(-iH(s - t)) ds with H frozen at t.
fn frozen_kernels(h: &CMat, ops: &[CMat], spec: &NoiseProcessSpec, t: f64) -> Vec<CMat> {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = eig.eigenvectors;
    let e = eig.eigenvalues;
    let rate = 1.0 / spec.tau_c;
    ops.iter()
        .map(|x| {
            let xe = v.adjoint() * x * &v;
            let k = CMat::from_fn(xe.nrows(), xe.ncols(), |j, l| {
                let z = C64::new(rate, e[j] - e[l]);
                xe[(j, l)] * (C64::new(1.0, 0.0) - (-z * t).exp()) / z * spec.sigma2
            });
            &v * k * v.adjoint()
        })
        .collect()
}

/// Trajectory average against the master equation for the same loop and noise.
pub fn noisy_average_vs_master(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    opts: &StochasticOptions,
) -> Result<NoisyComparison> {
    spec.validate()?;
    if cfg.gamma != 0.0 {
        return Err(Error::DecayNotAllowed);
    }
    if opts.n_traj == 0 {
        return Err(Error::InvalidConfig("n_traj must be positive".into()));
    }
    let sum = trajectory_sum(cfg, lp, spec, 0, opts.n_traj, opts)?;
    compare_with_master(cfg, lp, spec, opts, sum)
}

/// Completes a comparison from a precomputed sum of trajectory projectors.
pub fn compare_with_master(
    cfg: &ModelConfig,
    lp: &Loop,
    spec: &NoiseProcessSpec,
    opts: &StochasticOptions,
    projector_sum: CMat,
) -> Result<NoisyComparison> {
    let avg = MixedState::new(projector_sum / C64::new(opts.n_traj as f64, 0.0));
    let (master, drift) = master_equation(cfg, lp, spec, opts)?;
    let trace_distance = linalg::trace_distance(&avg.rho, &master.rho);
    let steps = integrate::total_steps(&stochastic_segments(lp, opts.dt));
    Ok(NoisyComparison { rho_avg: avg, rho_master: master, trace_distance, master_trace_error: drift, n_traj: opts.n_traj, steps })
}
