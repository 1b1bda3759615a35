//! Loops, geometric phases and the closed-form gates they produce.

pub mod loops;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Arity, ModelConfig};
use crate::quadrature::GaussLegendre;
use crate::{CMat, CVec, C64};
use alloc::vec::Vec;
use core::f64::consts::PI;
pub use loops::{last_level_direction, pacman_loop, Loop, Pacman, Profile, Schedule, Side, Warp};
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

/// Integrand of alpha_1: C1(r) = 2/(1+r^2)^2.
pub fn c1(r: f64) -> f64 {
    let s = 1.0 + r * r;
    2.0 / (s * s)
}

/// Integrand of alpha_2: 4r^2(4 - r^2 - 2r^4 - 6r^6)/((1+r^2)^2 (1+2r^4)^2).
pub fn c2(r: f64) -> f64 {
    let r2 = r * r;
    let r4 = r2 * r2;
    let a = 1.0 + r2;
    let b = 1.0 + 2.0 * r4;
    4.0 * r2 * (4.0 - r2 - 2.0 * r4 - 6.0 * r4 * r2) / (a * a * b * b)
}

/// B1 = f conj(fdot) / (1 + |f|^2).
pub fn b1(f: C64, fdot: C64) -> C64 {
    f * fdot.conj() / (1.0 + f.norm_sqr())
}

/// B2 = (3 fdot conj(f) |f|^4 + f conj(fdot) |f|^2 (4 + |f|^2)) / ((1+|f|^2)(1+2|f|^4)).
pub fn b2(f: C64, fdot: C64) -> C64 {
    let a = f.norm_sqr();
    (fdot * f.conj() * (3.0 * a * a) + f * fdot.conj() * (a * (4.0 + a))) / ((1.0 + a) * (1.0 + 2.0 * a * a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Alpha1,
    Alpha2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMethod {
    Line,
    Surface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePair {
    pub alpha1: f64,
    pub alpha2: f64,
    pub method: PhaseMethod,
    /// Change under halving the panel count.
    pub error: f64,
}

/// Quadrature resolution for phase integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub order: usize,
    pub panels_per_segment: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { order: 16, panels_per_segment: 16 }
    }
}

/// I_i(R) = int_0^R r C_i(r) dr.
pub fn radial_integral(radius: f64, which: Which) -> f64 {
    radial_integral_with(&GaussLegendre::new(16), radius, which, 16)
}

fn radial_integral_with(gl: &GaussLegendre, radius: f64, which: Which, panels: usize) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    match which {
        Which::Alpha1 => gl.integrate_real(0.0, radius, panels, |r| r * c1(r)),
        Which::Alpha2 => gl.integrate_real(0.0, radius, panels, |r| r * c2(r)),
    }
}

pub fn phase_integrals(lp: &Loop, method: PhaseMethod) -> Result<PhasePair> {
    phase_integrals_with(lp, method, QuadratureOptions::default())
}

pub fn phase_integrals_with(lp: &Loop, method: PhaseMethod, opts: QuadratureOptions) -> Result<PhasePair> {
    lp.check_closed()?;
    let gl = GaussLegendre::new(opts.order);
    let panels = opts.panels_per_segment.max(2);
    let (fine, coarse) = match method {
        Method::Line => (line_phases(lp, &gl, panels), line_phases(lp, &gl, panels / 2)),
        Method::Surface => (surface_phases(&lp.profile, &gl, panels)?, surface_phases(&lp.profile, &gl, panels / 2)?),
    };
    let error = (fine.0 - coarse.0).abs().max((fine.1 - coarse.1).abs());
    Ok(PhasePair { alpha1: fine.0, alpha2: fine.1, method, error })
}

type Method = PhaseMethod;

fn line_phases(lp: &Loop, gl: &GaussLegendre, panels: usize) -> (f64, f64) {
    let bp = lp.breakpoints();
    let mut a1 = C64::zero();
    let mut a2 = C64::zero();
    for w in bp.windows(2) {
        a1 += gl.integrate(w[0], w[1], panels, |t| {
            let (f, df) = lp.eval(t, Side::Right);
            b1(f, df)
        });
        a2 += gl.integrate(w[0], w[1], panels, |t| {
            let (f, df) = lp.eval(t, Side::Right);
            b2(f, df)
        });
    }
    let i = C64::new(0.0, 1.0);
    ((i * a1).re, (i * a2).re)
}

fn surface_phases(profile: &Profile, gl: &GaussLegendre, panels: usize) -> Result<(f64, f64)> {
    match profile {
        Profile::Zero { .. } => Ok((0.0, 0.0)),
        Profile::Pacman(p) => {
            let radial = GaussLegendre::new(gl.order());
            let theta = p.total_angle();
            Ok((
                theta * radial_integral_with(&radial, p.radius, Which::Alpha1, panels),
                theta * radial_integral_with(&radial, p.radius, Which::Alpha2, panels),
            ))
        }
        Profile::Reversed(b) => surface_phases(b, gl, panels).map(|(x, y)| (-x, -y)),
        Profile::Reparametrized { base, .. } => surface_phases(base, gl, panels),
        Profile::Concat(parts) => {
            let mut acc = (0.0, 0.0);
            for p in parts {
                let (x, y) = surface_phases(p, gl, panels)?;
                acc.0 += x;
                acc.1 += y;
            }
            Ok(acc)
        }
        Profile::Samples { .. } | Profile::Perturbed { .. } => green_phases(profile, gl, panels),
    }
}

/// Green's theorem with the angular potential: alpha_i = oint I_i(|f|) d arg f.
fn green_phases(profile: &Profile, gl: &GaussLegendre, panels: usize) -> Result<(f64, f64)> {
    if self_intersects(profile) {
        return Err(Error::SelfIntersecting);
    }
    let radial = GaussLegendre::new(12);
    let bp = profile.breakpoints();
    let mut acc = (0.0, 0.0);
    for w in bp.windows(2) {
        let v = gl.integrate(w[0], w[1], panels, |t| {
            let (f, df) = profile.eval(t, Side::Right);
            let r2 = f.norm_sqr();
            if r2 < 1e-300 {
                return C64::zero();
            }
            let dtheta = (f.conj() * df).im / r2;
            let r = r2.sqrt();
            let rp = (4.0 * r).ceil().clamp(2.0, 64.0) as usize;
            C64::new(
                radial_integral_with(&radial, r, Which::Alpha1, rp) * dtheta,
                radial_integral_with(&radial, r, Which::Alpha2, rp) * dtheta,
            )
        });
        acc.0 += v.re;
        acc.1 += v.im;
    }
    Ok(acc)
}

fn self_intersects(profile: &Profile) -> bool {
    let bp = profile.breakpoints();
    let per = match profile {
        Profile::Samples { .. } => 1,
        _ => (4096 / bp.len().max(1)).clamp(1, 24),
    };
    let mut pts: Vec<C64> = Vec::new();
    for w in bp.windows(2) {
        for k in 0..per {
            let t = w[0] + (w[1] - w[0]) * k as f64 / per as f64;
            pts.push(profile.eval(t, Side::Right).0);
        }
    }
    pts.push(profile.eval(profile.duration(), Side::Left).0);
    let n = pts.len() - 1;
    let cross = |a: C64, b: C64, c: C64| (b - a).re * (c - a).im - (b - a).im * (c - a).re;
    let scale = pts.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1e-300);
    let eps = 1e-12 * scale * scale;
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (p1, p2, q1, q2) = (pts[i], pts[i + 1], pts[j], pts[j + 1]);
            let d1 = cross(q1, q2, p1);
            let d2 = cross(q1, q2, p2);
            let d3 = cross(p1, p2, q1);
            let d4 = cross(p1, p2, q2);
            let sign = |x: f64| if x > eps { 1 } else if x < -eps { -1 } else { 0 };
            let (s1, s2, s3, s4) = (sign(d1), sign(d2), sign(d3), sign(d4));
            if s1 * s2 < 0 && s3 * s4 < 0 {
                return true;
            }
            let within = |a: C64, b: C64, c: C64| {
                c.re >= a.re.min(b.re) - eps && c.re <= a.re.max(b.re) + eps && c.im >= a.im.min(b.im) - eps && c.im <= a.im.max(b.im) + eps
            };
            if (s1 == 0 && within(q1, q2, p1))
                || (s2 == 0 && within(q1, q2, p2))
                || (s3 == 0 && within(p1, p2, q1))
                || (s4 == 0 && within(p1, p2, q2))
            {
                return true;
            }
        }
    }
    false
}

/// Result of targeting a phase with a pacman arc angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSolution {
    /// Arc angle folded into (0, 2pi]; 0 for a no-op target.
    pub beta: f64,
    /// Full turns added to `beta`.
    pub wraps: u32,
    /// beta + 2 pi wraps.
    pub total: f64,
    /// Radial integral I_i(R).
    pub integral: f64,
    /// total * integral, equal to the target modulo 2 pi.
    pub phase: f64,
}

impl BetaSolution {
    pub fn pacman(&self, radius: f64, t1: f64, t2: f64, schedule: Schedule) -> Result<Pacman> {
        Pacman::new(radius, self.beta, self.wraps, t1, t2, schedule)
    }
}

const REACH_TOL: f64 = 1e-9;

/// Smallest positive total angle with total * I_i(R) = target (mod 2 pi).
pub fn solve_beta_for_phase(radius: f64, target: f64, which: Which) -> Result<BetaSolution> {
    if !(radius > 0.0) {
        return Err(Error::InvalidLoop(alloc::format!("radius {radius} must be positive")));
    }
    let integral = radial_integral(radius, which);
    if integral.abs() < REACH_TOL {
        return Err(Error::UnreachablePhase { radius, integral });
    }
    let two_pi = 2.0 * PI;
    let folded = target - two_pi * (target / two_pi).floor();
    if target == 0.0 || folded == 0.0 {
        return Ok(BetaSolution { beta: 0.0, wraps: 0, total: 0.0, integral, phase: 0.0 });
    }
    let signed = if integral > 0.0 { folded } else { folded - two_pi };
    let total = signed / integral;
    let mut wraps = (total / two_pi).ceil() as i64 - 1;
    if wraps < 0 {
        wraps = 0;
    }
    let beta = total - two_pi * wraps as f64;
    Ok(BetaSolution { beta, wraps: wraps as u32, total, integral, phase: total * integral })
}

/// |omega><omega|.
pub fn projector(direction: &[C64]) -> CMat {
    let v = CVec::from_column_slice(direction);
    linalg::outer(&v, &v)
}

/// exp(i a1 P) or exp(i a1 (1 x P + P x 1)) exp(i a2 P x P).
pub fn gate_from_phases(direction: &[C64], alpha1: f64, alpha2: f64, arity: Arity) -> CMat {
    let p = projector(direction);
    let u1 = linalg::phase_on_projector(&p, alpha1);
    match arity {
        Arity::One => u1,
        Arity::Two => linalg::kron(&u1, &u1) * linalg::phase_on_projector(&linalg::kron(&p, &p), alpha2),
    }
}

/// An operator on the computational subspace with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub u: CMat,
    pub target: Option<CMat>,
    pub fidelity: Option<f64>,
    pub leakage: f64,
    pub unitarity_defect: f64,
    pub phases: Option<PhasePair>,
}

impl GateReport {
    pub fn new(u: CMat, leakage: f64) -> Self {
        let unitarity_defect = linalg::unitarity_defect(&u);
        GateReport { u, target: None, fidelity: None, leakage, unitarity_defect, phases: None }
    }

    pub fn with_target(mut self, target: CMat) -> Result<Self> {
        self.fidelity = Some(gate_fidelity(&self.u, &target)?);
        self.target = Some(target);
        Ok(self)
    }
}

pub fn analytic_gate(cfg: &ModelConfig, lp: &Loop, arity: Arity) -> Result<GateReport> {
    if lp.d() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: lp.d() });
    }
    let phases = phase_integrals(lp, PhaseMethod::Line)?;
    let u = gate_from_phases(&lp.direction, phases.alpha1, phases.alpha2, arity);
    let mut report = GateReport::new(u, 0.0);
    report.phases = Some(phases);
    Ok(report)
}

/// F = (D + |tr(U_tilde U^dagger)|^2) / (D (D + 1)), applied as written.
pub fn gate_fidelity(u_tilde: &CMat, target: &CMat) -> Result<f64> {
    if u_tilde.shape() != target.shape() || u_tilde.nrows() != u_tilde.ncols() {
        return Err(Error::Shape(alloc::format!("{:?} vs {:?}", u_tilde.shape(), target.shape())));
    }
    let dim = u_tilde.nrows() as f64;
    let tr = linalg::trace(&(u_tilde * target.adjoint()));
    Ok((dim + tr.norm_sqr()) / (dim * (dim + 1.0)))
}
