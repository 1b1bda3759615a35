//! Closed drive profiles f: [0, T] -> C.

use crate::error::{Error, Result};
use crate::noise::LoopPerturbation;
use crate::C64;
use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

const CLOSURE_TOL: f64 = 1e-12;

/// Which one-sided limit to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Time warp of the radial segments: `t/t1` becomes `(t/t1)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Linear,
    Power(f64),
}

impl Schedule {
    pub fn exponent(self) -> f64 {
        match self {
            Schedule::Linear => 1.0,
            Schedule::Power(k) => k,
        }
    }

    pub fn label(self) -> alloc::string::String {
        match self {
            Schedule::Linear => "linear".into(),
            Schedule::Power(k) => format!("power({k})"),
        }
    }
}

/// Three-segment loop: radial out, arc of angle `beta + 2 pi wraps` at radius R, radial in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pacman {
    pub radius: f64,
    pub beta: f64,
    pub wraps: u32,
    pub t1: f64,
    pub t2: f64,
    pub schedule: Schedule,
}

impl Pacman {
    pub fn new(radius: f64, beta: f64, wraps: u32, t1: f64, t2: f64, schedule: Schedule) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidLoop(format!("radius {radius} must be positive")));
        }
        if !(beta > 0.0 && beta <= 2.0 * PI + 1e-12) {
            return Err(Error::InvalidLoop(format!("beta {beta} outside (0, 2pi]")));
        }
        if !(t1 > 0.0) || !(t2 > 0.0) || !t1.is_finite() || !t2.is_finite() {
            return Err(Error::InvalidLoop(format!("segment times must be positive, got t1 = {t1}, t2 = {t2}")));
        }
        if !(schedule.exponent() >= 1.0) || !schedule.exponent().is_finite() {
            return Err(Error::InvalidLoop(format!("schedule exponent {} must be >= 1", schedule.exponent())));
        }
        Ok(Pacman { radius, beta, wraps, t1, t2, schedule })
    }

    /// Total swept angle.
    pub fn total_angle(&self) -> f64 {
        self.beta + 2.0 * PI * self.wraps as f64
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t1 + self.t2
    }

    fn eval(&self, t: f64, side: Side) -> (C64, C64) {
        let (t1, t2, r) = (self.t1, self.t2, self.radius);
        let k = self.schedule.exponent();
        let theta = self.total_angle();
        let out = t < t1 || (t == t1 && side == Side::Left);
        let arc = !out && (t < t1 + t2 || (t == t1 + t2 && side == Side::Left));
        if out {
            let s = (t / t1).max(0.0);
            let g = s.powf(k);
            let dg = if k == 1.0 { 1.0 } else { k * s.powf(k - 1.0) };
            (C64::new(r * g, 0.0), C64::new(r * dg / t1, 0.0))
        } else if arc {
            let f = C64::from_polar(r, theta * (t - t1) / t2);
            (f, f * C64::new(0.0, theta / t2))
        } else {
            let s = ((self.duration() - t) / t1).max(0.0);
            let g = s.powf(k);
            let dg = if k == 1.0 { 1.0 } else { k * s.powf(k - 1.0) };
            let phase = C64::from_polar(1.0, theta);
            (phase * (r * g), phase * (-r * dg / t1))
        }
    }
}

/// Monotone time reparametrization s(t) of [0, T] onto itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warp {
    /// s = T (t/T)^k, k >= 1.
    Power(f64),
    /// s = t - a T/(2 pi) sin(2 pi t/T), |a| < 1.
    Sinusoidal(f64),
}

impl Warp {
    fn validate(self) -> Result<()> {
        match self {
            Warp::Power(k) if k >= 1.0 && k.is_finite() => Ok(()),
            Warp::Sinusoidal(a) if a.abs() < 1.0 => Ok(()),
            _ => Err(Error::InvalidLoop(format!("warp {self:?} is not strictly monotone and smooth"))),
        }
    }

    fn map(self, t: f64, total: f64) -> (f64, f64) {
        match self {
            Warp::Power(k) => {
                let u = (t / total).clamp(0.0, 1.0);
                (total * u.powf(k), k * u.powf(k - 1.0))
            }
            Warp::Sinusoidal(a) => {
                let w = 2.0 * PI / total;
                (t - a / w * (w * t).sin(), 1.0 - a * (w * t).cos())
            }
        }
    }

    fn inverse(self, s: f64, total: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, total);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.map(mid, total).0 < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * total {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Moves a mapped time that lands within rounding of a base breakpoint onto it,
/// so one-sided evaluation picks the intended piece.
fn snap(s: f64, base: &Profile) -> f64 {
    let tol = 64.0 * f64::EPSILON * base.duration().max(1.0);
    base.breakpoints().into_iter().find(|b| (b - s).abs() <= tol).unwrap_or(s)
}

/// Scalar profile shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// f = 0 for the given duration.
    Zero { duration: f64 },
    Pacman(Pacman),
    /// Piecewise-linear interpolation through samples; `times` starts at 0.
    Samples { times: Vec<f64>, values: Vec<C64> },
    /// f(T - t).
    Reversed(Box<Profile>),
    /// f(s(t)).
    Reparametrized { base: Box<Profile>, warp: Warp },
    /// (1 + eps(t)) f(t) exp(i phi(t)).
    Perturbed { base: Box<Profile>, perturbation: LoopPerturbation },
    /// Profiles traversed one after the other.
    Concat(Vec<Profile>),
}

impl Profile {
    pub fn samples(times: Vec<f64>, values: Vec<C64>) -> Result<Profile> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidLoop(format!(
                "samples need matching lengths >= 2, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidLoop("sample times must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidLoop("sample times must be finite and strictly increasing".into()));
        }
        Ok(Profile::Samples { times, values })
    }

    pub fn duration(&self) -> f64 {
        match self {
            Profile::Zero { duration } => *duration,
            Profile::Pacman(p) => p.duration(),
            Profile::Samples { times, .. } => *times.last().unwrap_or(&0.0),
            Profile::Reversed(b) | Profile::Reparametrized { base: b, .. } | Profile::Perturbed { base: b, .. } => b.duration(),
            Profile::Concat(parts) => parts.iter().map(Profile::duration).sum(),
        }
    }

    /// f(t) and its one-sided derivative.
    pub fn eval(&self, t: f64, side: Side) -> (C64, C64) {
        match self {
            Profile::Zero { .. } => (C64::zero(), C64::zero()),
            Profile::Pacman(p) => p.eval(t, side),
            Profile::Samples { times, values } => {
                let n = times.len();
                let mut i = match times.binary_search_by(|x| x.total_cmp(&t)) {
                    Ok(i) => match side {
                        Side::Left => i.saturating_sub(1),
                        Side::Right => i,
                    },
                    Err(i) => i.saturating_sub(1),
                };
                i = i.min(n - 2);
                let (t0, t1) = (times[i], times[i + 1]);
                let slope = (values[i + 1] - values[i]) / (t1 - t0);
                (values[i] + slope * (t - t0), slope)
            }
            Profile::Reversed(b) => {
                let (f, df) = b.eval(snap(b.duration() - t, b), side.flip());
                (f, -df)
            }
            Profile::Reparametrized { base, warp } => {
                let (s, ds) = warp.map(t, base.duration());
                let (f, df) = base.eval(snap(s, base), side);
                (f, df * ds)
            }
            Profile::Perturbed { base, perturbation } => {
                let (f, df) = base.eval(t, side);
                let (e, de) = perturbation.epsilon.eval(t, side);
                let (p, dp) = perturbation.phi.eval(t, side);
                let rot = C64::from_polar(1.0, p);
                let value = f * rot * (1.0 + e);
                let deriv = (f * de + df * (1.0 + e) + f * C64::new(0.0, dp) * (1.0 + e)) * rot;
                (value, deriv)
            }
            Profile::Concat(parts) => {
                let mut offset = 0.0;
                for (k, part) in parts.iter().enumerate() {
                    let end = offset + part.duration();
                    let last = k + 1 == parts.len();
                    if t < end || (t == end && side == Side::Left) || last {
                        return part.eval(snap(t - offset, part), side);
                    }
                    offset = end;
                }
                (C64::zero(), C64::zero())
            }
        }
    }

    /// Kink locations including 0 and T, ascending.
    pub fn breakpoints(&self) -> Vec<f64> {
        let total = self.duration();
        let mut pts = match self {
            Profile::Zero { .. } => alloc::vec![0.0, total],
            Profile::Pacman(p) => alloc::vec![0.0, p.t1, p.t1 + p.t2, total],
            Profile::Samples { times, .. } => times.clone(),
            Profile::Reversed(b) => b.breakpoints().into_iter().map(|x| total - x).collect(),
            Profile::Reparametrized { base, warp } => {
                base.breakpoints().into_iter().map(|s| warp.inverse(s, total)).collect()
            }
            Profile::Perturbed { base, perturbation } => {
                let mut v = base.breakpoints();
                v.extend(perturbation.epsilon.nodes());
                v.extend(perturbation.phi.nodes());
                v
            }
            Profile::Concat(parts) => {
                let mut v = Vec::new();
                let mut offset = 0.0;
                for p in parts {
                    v.extend(p.breakpoints().into_iter().map(|x| x + offset));
                    offset += p.duration();
                }
                v
            }
        };
        pts.retain(|x| *x >= 0.0 && *x <= total);
        pts.push(0.0);
        pts.push(total);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * total.max(1.0));
        if let Some(last) = pts.last_mut() {
            *last = total;
        }
        pts[0] = 0.0;
        pts
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::Zero { duration } => {
                if !(*duration > 0.0) || !duration.is_finite() {
                    return Err(Error::InvalidLoop(format!("duration {duration} must be positive")));
                }
            }
            Profile::Pacman(_) | Profile::Samples { .. } => {}
            Profile::Reversed(b) => b.validate()?,
            Profile::Reparametrized { base, warp } => {
                warp.validate()?;
                base.validate()?;
            }
            Profile::Perturbed { base, perturbation } => {
                perturbation.validate(base.duration())?;
                base.validate()?;
            }
            Profile::Concat(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidLoop("empty concatenation".into()));
                }
                for p in parts {
                    p.validate()?;
                    let (a, b) = (p.eval(0.0, Side::Right).0.norm(), p.eval(p.duration(), Side::Left).0.norm());
                    if a > CLOSURE_TOL || b > CLOSURE_TOL {
                        return Err(Error::OpenLoop { start: a, end: b });
                    }
                }
            }
        }
        Ok(())
    }
}

/// A closed drive path Omega_a(t) = |Omega_d| f(t) omega_a.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub profile: Profile,
    pub direction: Vec<C64>,
}

impl Loop {
    pub fn new(profile: Profile, direction: Vec<C64>) -> Result<Self> {
        let norm2: f64 = direction.iter().map(|z| z.norm_sqr()).sum();
        if direction.is_empty() || (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLoop(format!("direction must be a unit vector, |omega|^2 = {norm2}")));
        }
        profile.validate()?;
        let lp = Loop { profile, direction };
        lp.check_closed()?;
        Ok(lp)
    }

    /// Normalizes `direction` before building the loop.
    pub fn with_direction(profile: Profile, direction: &[C64]) -> Result<Self> {
        let n: f64 = direction.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::InvalidLoop("direction is zero".into()));
        }
        Loop::new(profile, direction.iter().map(|z| z / n).collect())
    }

    pub fn d(&self) -> usize {
        self.direction.len()
    }

    pub fn duration(&self) -> f64 {
        self.profile.duration()
    }

    pub fn eval(&self, t: f64, side: Side) -> (C64, C64) {
        self.profile.eval(t, side)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.profile.breakpoints()
    }

    pub fn check_closed(&self) -> Result<()> {
        let start = self.eval(0.0, Side::Right).0.norm();
        let end = self.eval(self.duration(), Side::Left).0.norm();
        if start > CLOSURE_TOL || end > CLOSURE_TOL {
            return Err(Error::OpenLoop { start, end });
        }
        Ok(())
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let duration = self.duration();
        if !(t >= 0.0 && t <= duration) {
            return Err(Error::TimeOutOfRange { t, duration });
        }
        Ok(())
    }

    /// Drive amplitudes Omega_a(t) for an energy unit |Omega_d|.
    pub fn amplitudes(&self, t: f64, side: Side, omega_d_abs: f64) -> Vec<C64> {
        let f = self.eval(t, side).0 * omega_d_abs;
        self.direction.iter().map(|w| f * w).collect()
    }

    pub fn pacman(&self) -> Option<&Pacman> {
        match &self.profile {
            Profile::Pacman(p) => Some(p),
            _ => None,
        }
    }

    pub fn reversed(&self) -> Loop {
        Loop { profile: Profile::Reversed(Box::new(self.profile.clone())), direction: self.direction.clone() }
    }

    pub fn reparametrized(&self, warp: Warp) -> Result<Loop> {
        warp.validate()?;
        Ok(Loop {
            profile: Profile::Reparametrized { base: Box::new(self.profile.clone()), warp },
            direction: self.direction.clone(),
        })
    }

    /// Traverses `self`, then `other` (same direction required).
    pub fn then(&self, other: &Loop) -> Result<Loop> {
        if self.direction != other.direction {
            return Err(Error::InvalidLoop("concatenated loops must share the direction".into()));
        }
        let mut parts = match &self.profile {
            Profile::Concat(p) => p.clone(),
            p => alloc::vec![p.clone()],
        };
        parts.push(other.profile.clone());
        Loop::new(Profile::Concat(parts), self.direction.clone())
    }
}

/// Pacman loop with the given direction; the arc angle is `beta` in (0, 2pi].
pub fn pacman_loop(radius: f64, beta: f64, t1: f64, t2: f64, schedule: Schedule, direction: &[C64]) -> Result<Loop> {
    let p = Pacman::new(radius, beta, 0, t1, t2, schedule)?;
    Loop::with_direction(Profile::Pacman(p), direction)
}

/// Unit vector along the last computational level, (0, ..., 0, 1).
pub fn last_level_direction(d: usize) -> Vec<C64> {
    let mut v = alloc::vec![C64::zero(); d];
    v[d - 1] = C64::new(1.0, 0.0);
    v
}
