//! Connection of the zero-energy bundle and parallel transport around loops.
//!
//! Frame coordinates are ordered as in [`crate::model::NullFrame`]: for the
//! pair, w0 first, then the antisymmetric pairs a<b, then the symmetric
//! pairs a<=b.

use crate::error::{Error, Result};
use crate::gates::{self, Loop, Side};
use crate::integrate;
use crate::linalg;
use crate::model::{self, minus_pairs, plus_pairs, Arity, ModelConfig, ParameterPoint};
use crate::{CMat, C64};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

/// Connection matrices for every real coordinate at one parameter point.
#[derive(Debug, Clone)]
pub struct ConnectionSample {
    pub lambda: ParameterPoint,
    /// A_{ab mu} = <v_a | d_mu v_b>, one matrix per coordinate.
    pub lowered: Vec<CMat>,
    /// A^a_{b mu} = g^{ac} A_{cb mu}.
    pub raised: Vec<CMat>,
}

impl ConnectionSample {
    /// lambda-dot contracted with the raised connection.
    pub fn contract(&self, lambda_dot: &[f64]) -> CMat {
        let n = self.raised[0].nrows();
        let mut m = CMat::zeros(n, n);
        for (a, x) in self.raised.iter().zip(lambda_dot) {
            if *x != 0.0 {
                m += a * C64::new(*x, 0.0);
            }
        }
        m
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Single-atom A_{abc}: Omega_a delta_{cb} (real parts), -i Omega_a delta_{c-d,b} (imaginary parts).
fn single_lowered(amps: &[C64]) -> Vec<CMat> {
    let d = amps.len();
    (0..2 * d)
        .map(|c| {
            let (col, factor) = if c < d { (c, C64::one()) } else { (c - d, C64::new(0.0, -1.0)) };
            let mut m = CMat::zeros(d, d);
            for a in 0..d {
                m[(a, col)] = amps[a] * factor;
            }
            m
        })
        .collect()
}

fn minus_lowered(single: &[CMat], g: &CMat, d: usize) -> Vec<CMat> {
    let pairs = minus_pairs(d);
    single
        .iter()
        .map(|a| {
            CMat::from_fn(pairs.len(), pairs.len(), |i, j| {
                let (k, l) = pairs[i];
                let (x, y) = pairs[j];
                (a[(k, x)] * g[(l, y)] + a[(l, y)] * g[(k, x)] - a[(k, y)] * g[(l, x)] - a[(l, x)] * g[(k, y)]) * 2.0
            })
        })
        .collect()
}

fn plus_lowered(cfg: &ModelConfig, amps: &[C64]) -> Vec<CMat> {
    let d = cfg.d;
    let pairs = plus_pairs(d);
    let od2 = cfg.omega_d.norm_sqr();
    let om2 = model::omega_squared(cfg, amps);
    let kappa = 1.0 + 2.0 * om2 * om2 / (od2 * od2);
    let o = amps;
    let i = C64::new(0.0, 1.0);
    (0..2 * d)
        .map(|mu| {
            let imag = mu >= d;
            let c = if imag { mu - d } else { mu };
            CMat::from_fn(pairs.len(), pairs.len(), |r, s| {
                let (k, l) = pairs[r];
                let (a, b) = pairs[s];
                let first = (o[l] * (delta(c, b) * delta(a, k) + delta(c, a) * delta(b, k))
                    + o[k] * (delta(c, a) * delta(b, l) + delta(c, b) * delta(a, l)))
                    * (2.0 * od2);
                let second = o[k] * o[l] * (o[b].conj() * delta(c, a) + o[a].conj() * delta(c, b)) * (4.0 * kappa);
                let tail = if imag { (o[c].conj() * 3.0 - o[c]) * i } else { o[c].conj() * 3.0 + o[c] };
                let third = o[k] * o[l] * o[a].conj() * o[b].conj() * tail * (4.0 * om2 / (od2 * od2));
                if imag {
                    -(first + second) * i + third
                } else {
                    first + second + third
                }
            })
        })
        .collect()
}

/// <w0 | d_mu w0> = 8 Omega^2 (Re Omega_c + conj Omega_c) or 8 Omega^2 (Im Omega_c + i conj Omega_c).
fn zero_lowered(cfg: &ModelConfig, amps: &[C64]) -> Vec<C64> {
    let d = amps.len();
    let om2 = model::omega_squared(cfg, amps);
    (0..2 * d)
        .map(|mu| {
            if mu < d {
                (amps[mu].conj() + amps[mu].re) * (8.0 * om2)
            } else {
                let z = amps[mu - d];
                (z.conj() * C64::new(0.0, 1.0) + z.im) * (8.0 * om2)
            }
        })
        .collect()
}

fn block_diag3(a: C64, b: &CMat, c: &CMat) -> CMat {
    let n = 1 + b.nrows() + c.nrows();
    let mut m = CMat::zeros(n, n);
    m[(0, 0)] = a;
    m.view_mut((1, 1), b.shape()).copy_from(b);
    m.view_mut((1 + b.nrows(), 1 + b.nrows()), c.shape()).copy_from(c);
    m
}

pub fn connection_at(cfg: &ModelConfig, p: &ParameterPoint, arity: Arity) -> Result<ConnectionSample> {
    match arity {
        Arity::One => {
            let frame = model::single_atom_null_frame(cfg, p)?;
            let lowered = single_lowered(&p.amplitudes());
            let raised = lowered.iter().map(|a| &frame.gram_inv * a).collect();
            Ok(ConnectionSample { lambda: p.clone(), lowered, raised })
        }
        Arity::Two => {
            let frame = model::two_atom_null_frame(cfg, p)?;
            let amps = p.amplitudes();
            let g = model::single_gram(cfg, &amps);
            let single = single_lowered(&amps);
            let minus = minus_lowered(&single, &g, cfg.d);
            let plus = plus_lowered(cfg, &amps);
            let zero = zero_lowered(cfg, &amps);
            let lowered: Vec<CMat> = (0..2 * cfg.d).map(|mu| block_diag3(zero[mu], &minus[mu], &plus[mu])).collect();
            let raised = lowered.iter().map(|a| &frame.gram_inv * a).collect();
            Ok(ConnectionSample { lambda: p.clone(), lowered, raised })
        }
    }
}

/// Raised connection contracted with the velocity, in frame coordinates.
pub fn frame_tangent(cfg: &ModelConfig, amps: &[C64], amps_dot: &[C64], arity: Arity) -> Result<CMat> {
    let sample = connection_at(cfg, &ParameterPoint::from_amplitudes(amps), arity)?;
    let mut lambda_dot: Vec<f64> = amps_dot.iter().map(|z| z.re).collect();
    lambda_dot.extend(amps_dot.iter().map(|z| z.im));
    Ok(sample.contract(&lambda_dot))
}

/// Columns: the antisymmetric then symmetric base-point frame vectors
/// (divided by conj(Omega_d)^2) in the product basis |a,b>.
pub fn pair_frame_basis(d: usize) -> CMat {
    let minus = minus_pairs(d);
    let plus = plus_pairs(d);
    let mut v = CMat::zeros(d * d, minus.len() + plus.len());
    for (j, (a, b)) in minus.iter().enumerate() {
        v[(a * d + b, j)] += C64::one();
        v[(b * d + a, j)] -= C64::one();
    }
    for (j, (a, b)) in plus.iter().enumerate() {
        let col = minus.len() + j;
        v[(a * d + b, col)] += C64::one();
        v[(b * d + a, col)] += C64::one();
    }
    v
}

/// Maps an operator on antisymmetric+symmetric frame coordinates to the product basis.
pub fn pair_coordinates_to_product(m: &CMat, d: usize) -> Result<CMat> {
    let v = pair_frame_basis(d);
    let v_inv = v.clone().try_inverse().ok_or_else(|| Error::Numerical("singular pair frame".into()))?;
    Ok(&v * m * v_inv)
}

/// lambda-dot A along a product-form loop, closed form.
#[derive(Debug, Clone)]
pub struct TangentConnection {
    pub t: f64,
    /// Generator on the computational basis (d or d^2 dimensional).
    pub m: CMat,
    /// Scalar w0 entry (pair only).
    pub zero: Option<C64>,
    pub arity: Arity,
}

impl TangentConnection {
    /// Antisymmetric block M (1 - S)/2.
    pub fn minus_block(&self) -> Option<CMat> {
        self.sym_block(-1.0)
    }

    /// Symmetric block M (1 + S)/2.
    pub fn plus_block(&self) -> Option<CMat> {
        self.sym_block(1.0)
    }

    fn sym_block(&self, sign: f64) -> Option<CMat> {
        match self.arity {
            Arity::One => None,
            Arity::Two => {
                let d = (self.m.nrows() as f64).sqrt().round() as usize;
                let proj = (linalg::identity(d * d) + linalg::swap(d) * C64::new(sign, 0.0)) * C64::new(0.5, 0.0);
                Some(&self.m * proj)
            }
        }
    }
}

/// Closed-form generators at (f, fdot) for direction `omega`.
pub fn tangent_from_profile(direction: &[C64], f: C64, fdot: C64, arity: Arity) -> (CMat, Option<C64>) {
    let p = gates::projector(direction);
    let beta1 = gates::b1(f, fdot);
    match arity {
        Arity::One => (p * beta1, None),
        Arity::Two => {
            let d = direction.len();
            let id = linalg::identity(d);
            let x = linalg::kron(&id, &p) + linalg::kron(&p, &id);
            let m = x * beta1 + linalg::kron(&p, &p) * gates::b2(f, fdot);
            let s = f.conj() * fdot;
            let zero = C64::new(2.0 * s.re, s.im) / (1.0 + f.norm_sqr());
            (m, Some(zero))
        }
    }
}

pub fn tangent_connection(cfg: &ModelConfig, lp: &Loop, t: f64, arity: Arity) -> Result<TangentConnection> {
    lp.check_time(t)?;
    if lp.d() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: lp.d() });
    }
    let side = if t >= lp.duration() { Side::Left } else { Side::Right };
    let (f, fdot) = lp.eval(t, side);
    let (m, zero) = tangent_from_profile(&lp.direction, f, fdot, arity);
    Ok(TangentConnection { t, m, zero, arity })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolonomyMethod {
    Ode,
    Analytic,
    Schrodinger,
}

/// Which generator the transport ODE integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportRoute {
    /// Closed-form B1/B2 generator on the computational basis.
    ClosedForm,
    /// Raised frame connection contracted with lambda-dot, mapped at the end.
    Frame,
}

#[derive(Debug, Clone)]
pub struct Holonomy {
    pub u: CMat,
    pub unitarity_defect: f64,
    pub steps: usize,
    pub method: HolonomyMethod,
    /// Largest entry coupling the w0, antisymmetric and symmetric blocks.
    pub off_block: f64,
    /// Phase factor acquired by w0 (pair only).
    pub zero_factor: Option<C64>,
}

pub const MIN_TRANSPORT_STEPS: usize = 16;

pub fn parallel_transport(cfg: &ModelConfig, lp: &Loop, steps: usize, arity: Arity) -> Result<Holonomy> {
    parallel_transport_via(cfg, lp, steps, arity, TransportRoute::ClosedForm)
}

pub fn parallel_transport_via(
    cfg: &ModelConfig,
    lp: &Loop,
    steps: usize,
    arity: Arity,
    route: TransportRoute,
) -> Result<Holonomy> {
    if steps < MIN_TRANSPORT_STEPS {
        return Err(Error::TooFewSteps { steps, min: MIN_TRANSPORT_STEPS });
    }
    if lp.d() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, got: lp.d() });
    }
    if cfg.gamma != 0.0 {
        return Err(Error::DecayNotAllowed);
    }
    if arity == Arity::Two && cfg.w <= 0.0 {
        return Err(Error::ZeroInteraction);
    }
    lp.check_closed()?;
    let segments = integrate::allocate_steps(&lp.breakpoints(), steps);
    let taken = integrate::total_steps(&segments);
    let d = cfg.d;
    let od = cfg.omega_d_abs();
    let (u, off_block, zero_factor) = match (route, arity) {
        (TransportRoute::ClosedForm, Arity::One) => {
            let gen = |t: f64, side: Side| {
                let (f, fd) = lp.eval(t, side);
                -tangent_from_profile(&lp.direction, f, fd, Arity::One).0
            };
            (integrate::rk4(gen, linalg::identity(d), &segments), 0.0, None)
        }
        (TransportRoute::ClosedForm, Arity::Two) => {
            let n = d * d + 1;
            let gen = |t: f64, side: Side| {
                let (f, fd) = lp.eval(t, side);
                let (m, zero) = tangent_from_profile(&lp.direction, f, fd, Arity::Two);
                let mut g = CMat::zeros(n, n);
                g[(0, 0)] = -zero.unwrap_or_else(C64::zero);
                g.view_mut((1, 1), (d * d, d * d)).copy_from(&(-m));
                g
            };
            let full = integrate::rk4(gen, linalg::identity(n), &segments);
            let off = off_block_magnitude(&full, &[1, n]);
            (full.view((1, 1), (d * d, d * d)).into_owned(), off, Some(full[(0, 0)]))
        }
        (TransportRoute::Frame, arity) => {
            let n = match arity {
                Arity::One => d,
                Arity::Two => d * d + 1,
            };
            let mut failure = None;
            let gen = |t: f64, side: Side| {
                let (f, fd) = lp.eval(t, side);
                let amps: Vec<C64> = lp.direction.iter().map(|w| f * od * w).collect();
                let dots: Vec<C64> = lp.direction.iter().map(|w| fd * od * w).collect();
                match frame_tangent(cfg, &amps, &dots, arity) {
                    Ok(m) => -m,
                    Err(e) => {
                        failure = Some(e);
                        CMat::zeros(n, n)
                    }
                }
            };
            let full = integrate::rk4(gen, linalg::identity(n), &segments);
            if let Some(e) = failure {
                return Err(e);
            }
            match arity {
                Arity::One => (full, 0.0, None),
                Arity::Two => {
                    let nm = d * (d - 1) / 2;
                    let off = off_block_magnitude(&full, &[1, 1 + nm, n]);
                    let inner = full.view((1, 1), (d * d, d * d)).into_owned();
                    (pair_coordinates_to_product(&inner, d)?, off, Some(full[(0, 0)]))
                }
            }
        }
    };
    let unitarity_defect = linalg::unitarity_defect(&u);
    Ok(Holonomy { u, unitarity_defect, steps: taken, method: HolonomyMethod::Ode, off_block, zero_factor })
}

/// Largest |entry| outside the diagonal blocks ending at `bounds`.
fn off_block_magnitude(m: &CMat, bounds: &[usize]) -> f64 {
    let block = |i: usize| bounds.iter().position(|b| i < *b).unwrap_or(bounds.len());
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if block(i) != block(j) {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}
