//! Hamiltonians of the driven (d+2)-level atom and atom pair, their
//! zero-energy frames and the two-atom spectral gap.
//!
//! Levels are ordered |0>,...,|d-1>,|d>,|f>; two-atom states are
//! |i,j> with index `i * (d + 2) + j`, atom 1 first.

use crate::error::{Error, Result};
use crate::linalg;
use crate::{CMat, CVec, C64};
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub d: usize,
    pub omega_d: C64,
    pub w: f64,
    pub gamma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { d: 2, omega_d: C64::one(), w: 10.0, gamma: 0.0 }
    }
}

impl ModelConfig {
    pub fn new(d: usize, w: f64, gamma: f64) -> Result<Self> {
        let cfg = ModelConfig { d, omega_d: C64::one(), w, gamma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_omega_d(mut self, omega_d: C64) -> Result<Self> {
        self.omega_d = omega_d;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidConfig(format!("d = {} < 2", self.d)));
        }
        if !(self.omega_d.norm() > 0.0) || !self.omega_d.is_finite() {
            return Err(Error::InvalidConfig(format!("|omega_d| must be positive, got {}", self.omega_d)));
        }
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(Error::InvalidConfig(format!("W = {} must be finite and >= 0", self.w)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma = {} must be finite and >= 0", self.gamma)));
        }
        Ok(())
    }

    /// Single-atom Hilbert space dimension d + 2.
    pub fn levels(&self) -> usize {
        self.d + 2
    }

    pub fn omega_d_abs(&self) -> f64 {
        self.omega_d.norm()
    }
}

/// One atom or an interacting pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arity {
    One,
    Two,
}

impl Arity {
    /// Dimension of the computational subspace.
    pub fn computational_dim(self, d: usize) -> usize {
        match self {
            Arity::One => d,
            Arity::Two => d * d,
        }
    }

    pub fn full_dim(self, d: usize) -> usize {
        match self {
            Arity::One => d + 2,
            Arity::Two => (d + 2) * (d + 2),
        }
    }

    /// Full-space indices of the computational basis states.
    pub fn computational_indices(self, d: usize) -> Vec<usize> {
        match self {
            Arity::One => (0..d).collect(),
            Arity::Two => {
                let n = d + 2;
                (0..d).flat_map(|a| (0..d).map(move |b| a * n + b)).collect()
            }
        }
    }
}

/// Real coordinates (Re Omega_0..Re Omega_{d-1}, Im Omega_0..Im Omega_{d-1}).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint {
    lambda: Vec<f64>,
}

impl ParameterPoint {
    pub fn from_lambda(lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() < 4 || !lambda.len().is_multiple_of(2) {
            return Err(Error::Shape(format!("lambda needs an even length >= 4, got {}", lambda.len())));
        }
        Ok(ParameterPoint { lambda })
    }

    pub fn from_amplitudes(amps: &[C64]) -> Self {
        let mut lambda: Vec<f64> = amps.iter().map(|z| z.re).collect();
        lambda.extend(amps.iter().map(|z| z.im));
        ParameterPoint { lambda }
    }

    /// The base point: all drive amplitudes zero.
    pub fn base(d: usize) -> Self {
        ParameterPoint { lambda: alloc::vec![0.0; 2 * d] }
    }

    pub fn d(&self) -> usize {
        self.lambda.len() / 2
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn omega(&self, a: usize) -> C64 {
        C64::new(self.lambda[a], self.lambda[a + self.d()])
    }

    pub fn amplitudes(&self) -> Vec<C64> {
        (0..self.d()).map(|a| self.omega(a)).collect()
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        if self.lambda.len() != 2 * cfg.d {
            return Err(Error::DimensionMismatch { expected: 2 * cfg.d, got: self.lambda.len() });
        }
        if self.lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("non-finite parameter coordinate".into()));
        }
        Ok(())
    }
}

/// Omega^2 = sum_{a=0}^{d} |Omega_a|^2.
pub fn omega_squared(cfg: &ModelConfig, amps: &[C64]) -> f64 {
    amps.iter().map(|z| z.norm_sqr()).sum::<f64>() + cfg.omega_d.norm_sqr()
}

/// Single-atom matrix for drive amplitudes `amps`; `decay` appends -(i gamma/2)|d><d|.
pub fn single_atom_matrix(cfg: &ModelConfig, amps: &[C64], decay: bool) -> CMat {
    let n = cfg.levels();
    let f = n - 1;
    let mut h = CMat::zeros(n, n);
    for (a, z) in amps.iter().enumerate() {
        h[(a, f)] = *z;
        h[(f, a)] = z.conj();
    }
    h[(cfg.d, f)] = cfg.omega_d;
    h[(f, cfg.d)] = cfg.omega_d.conj();
    if decay {
        h[(cfg.d, cfg.d)] -= C64::new(0.0, 0.5 * cfg.gamma);
    }
    h
}

/// Two-atom matrix 1 x H0 + H0 x 1 + W|d,d><d,d|.
pub fn two_atom_matrix(cfg: &ModelConfig, amps: &[C64], decay: bool) -> CMat {
    let h0 = single_atom_matrix(cfg, amps, decay);
    let n = cfg.levels();
    let mut h = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let z = h0[(i, j)];
            if z == C64::zero() {
                continue;
            }
            for k in 0..n {
                h[(k * n + i, k * n + j)] += z;
                h[(i * n + k, j * n + k)] += z;
            }
        }
    }
    let dd = cfg.d * n + cfg.d;
    h[(dd, dd)] += C64::new(cfg.w, 0.0);
    h
}

pub fn hamiltonian_matrix(cfg: &ModelConfig, amps: &[C64], arity: Arity, decay: bool) -> CMat {
    match arity {
        Arity::One => single_atom_matrix(cfg, amps, decay),
        Arity::Two => two_atom_matrix(cfg, amps, decay),
    }
}

/// Hermitian single-atom Hamiltonian.
pub fn single_atom_hamiltonian(cfg: &ModelConfig, p: &ParameterPoint) -> Result<CMat> {
    p.check(cfg)?;
    Ok(single_atom_matrix(cfg, &p.amplitudes(), false))
}

/// Single-atom Hamiltonian including the decay of level |d>.
pub fn single_atom_hamiltonian_with_decay(cfg: &ModelConfig, p: &ParameterPoint) -> Result<CMat> {
    p.check(cfg)?;
    Ok(single_atom_matrix(cfg, &p.amplitudes(), true))
}

pub fn two_atom_hamiltonian(cfg: &ModelConfig, p: &ParameterPoint) -> Result<CMat> {
    p.check(cfg)?;
    Ok(two_atom_matrix(cfg, &p.amplitudes(), false))
}

pub fn two_atom_hamiltonian_with_decay(cfg: &ModelConfig, p: &ParameterPoint) -> Result<CMat> {
    p.check(cfg)?;
    Ok(two_atom_matrix(cfg, &p.amplitudes(), true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameLabel {
    Single(usize),
    Zero,
    Minus(usize, usize),
    Plus(usize, usize),
}

/// Basis of the zero-energy subspace with its Gram matrix.
#[derive(Debug, Clone)]
pub struct NullFrame {
    pub basis: Vec<CVec>,
    pub gram: CMat,
    pub gram_inv: CMat,
    pub labels: Vec<FrameLabel>,
}

impl NullFrame {
    /// Gram matrix from direct inner products of the basis.
    pub fn brute_gram(&self) -> CMat {
        let n = self.basis.len();
        CMat::from_fn(n, n, |i, j| self.basis[i].dotc(&self.basis[j]))
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

pub(crate) fn minus_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|a| ((a + 1)..d).map(move |b| (a, b))).collect()
}

pub(crate) fn plus_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).collect()
}

/// Vectors e_a = conj(Omega_a)|d> - conj(Omega_d)|a>.
pub(crate) fn single_vectors(cfg: &ModelConfig, amps: &[C64]) -> Vec<CVec> {
    let n = cfg.levels();
    amps.iter()
        .enumerate()
        .map(|(a, z)| {
            let mut v = CVec::zeros(n);
            v[cfg.d] = z.conj();
            v[a] = -cfg.omega_d.conj();
            v
        })
        .collect()
}

/// g_ab = |Omega_d|^2 delta_ab + Omega_a conj(Omega_b).
pub(crate) fn single_gram(cfg: &ModelConfig, amps: &[C64]) -> CMat {
    let od2 = cfg.omega_d.norm_sqr();
    let d = amps.len();
    CMat::from_fn(d, d, |a, b| {
        let delta = if a == b { od2 } else { 0.0 };
        amps[a] * amps[b].conj() + delta
    })
}

/// g^{ab} = |Omega_d|^-2 (delta_ab - Omega_a conj(Omega_b) / Omega^2).
pub(crate) fn single_gram_inv(cfg: &ModelConfig, amps: &[C64]) -> CMat {
    let od2 = cfg.omega_d.norm_sqr();
    let om2 = omega_squared(cfg, amps);
    let d = amps.len();
    CMat::from_fn(d, d, |a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        (-amps[a] * amps[b].conj() / om2 + delta) / od2
    })
}

pub fn single_atom_null_frame(cfg: &ModelConfig, p: &ParameterPoint) -> Result<NullFrame> {
    p.check(cfg)?;
    if cfg.gamma != 0.0 {
        return Err(Error::DecayNotAllowed);
    }
    let amps = p.amplitudes();
    Ok(NullFrame {
        basis: single_vectors(cfg, &amps),
        gram: single_gram(cfg, &amps),
        gram_inv: single_gram_inv(cfg, &amps),
        labels: (0..cfg.d).map(FrameLabel::Single).collect(),
    })
}

/// |+> and |-> eigenvectors of H0 with eigenvalues +Omega and -Omega.
pub(crate) fn bright_states(cfg: &ModelConfig, amps: &[C64]) -> (CVec, CVec) {
    let n = cfg.levels();
    let om = omega_squared(cfg, amps).sqrt();
    let mut plus = CVec::zeros(n);
    let mut minus = CVec::zeros(n);
    plus[n - 1] = C64::new(om, 0.0);
    minus[n - 1] = C64::new(om, 0.0);
    for (a, z) in amps.iter().chain(core::iter::once(&cfg.omega_d)).enumerate() {
        plus[a] += z;
        minus[a] -= z;
    }
    (plus, minus)
}

fn mu(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        2.0
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Closed-form Gram block of the symmetric vectors on pairs a <= b.
pub(crate) fn plus_gram(cfg: &ModelConfig, amps: &[C64]) -> CMat {
    let pairs = plus_pairs(cfg.d);
    let od2 = cfg.omega_d.norm_sqr();
    let om2 = omega_squared(cfg, amps);
    let alpha = 1.0 + 2.0 * om2 * om2 / (od2 * od2);
    let o = amps;
    let term = |a: usize, b: usize, k: usize, l: usize| {
        let mut t = C64::new(delta(a, k) * delta(b, l), 0.0);
        t += (o[a] * o[k].conj() * delta(b, l) + o[b] * o[l].conj() * delta(a, k)) / od2;
        t += o[a] * o[b] * o[k].conj() * o[l].conj() * (alpha / (od2 * od2));
        t * (2.0 * od2 * od2)
    };
    let m = pairs.len();
    CMat::from_fn(m, m, |i, j| {
        let (a, b) = pairs[i];
        let (k, l) = pairs[j];
        term(a, b, k, l) + term(a, b, l, k)
    })
}

/// Inverse of [`plus_gram`] in the a <= b pair basis.
pub(crate) fn plus_gram_inv(cfg: &ModelConfig, amps: &[C64]) -> CMat {
    let pairs = plus_pairs(cfg.d);
    let od2 = cfg.omega_d.norm_sqr();
    let om2 = omega_squared(cfg, amps);
    let beta = (od2 * od2 - 4.0 * om2 * od2 + 2.0 * om2 * om2) / (3.0 * od2 * od2 - 4.0 * om2 * od2 + 2.0 * om2 * om2);
    let o = amps;
    let term = |a: usize, b: usize, k: usize, l: usize| {
        let mut t = C64::new(delta(a, k) * delta(b, l), 0.0);
        t -= (o[a] * o[k].conj() * delta(b, l) + o[b] * o[k].conj() * delta(a, l)) / om2;
        t += o[a] * o[b] * o[k].conj() * o[l].conj() * (beta / (om2 * om2));
        t / (8.0 * od2 * od2)
    };
    let m = pairs.len();
    CMat::from_fn(m, m, |i, j| {
        let (a, b) = pairs[i];
        let (k, l) = pairs[j];
        (term(a, b, k, l) + term(a, b, l, k)) * (mu(a, b) * mu(k, l))
    })
}

pub(crate) fn minus_gram(g: &CMat, d: usize) -> CMat {
    let pairs = minus_pairs(d);
    let m = pairs.len();
    CMat::from_fn(m, m, |i, j| {
        let (a, b) = pairs[i];
        let (k, l) = pairs[j];
        (g[(a, k)] * g[(b, l)] - g[(b, k)] * g[(a, l)]) * 2.0
    })
}

pub(crate) fn minus_gram_inv(gi: &CMat, d: usize) -> CMat {
    let pairs = minus_pairs(d);
    let m = pairs.len();
    CMat::from_fn(m, m, |i, j| {
        let (a, b) = pairs[i];
        let (k, l) = pairs[j];
        (gi[(a, k)] * gi[(b, l)] - gi[(b, k)] * gi[(a, l)]) * 0.5
    })
}

fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

pub(crate) fn two_atom_vectors(cfg: &ModelConfig, amps: &[C64]) -> Vec<CVec> {
    let e = single_vectors(cfg, amps);
    let (p, m) = bright_states(cfg, amps);
    let pm = linalg::kron_vec(&p, &m);
    let mp = linalg::kron_vec(&m, &p);
    let sym = &pm + &mp;
    let od_sq = cfg.omega_d * cfg.omega_d;
    let mut basis = Vec::with_capacity(cfg.d * cfg.d + 1);
    basis.push(&pm - &mp);
    for (a, b) in minus_pairs(cfg.d) {
        basis.push(linalg::kron_vec(&e[a], &e[b]) - linalg::kron_vec(&e[b], &e[a]));
    }
    for (a, b) in plus_pairs(cfg.d) {
        let coeff = amps[a].conj() * amps[b].conj() / od_sq;
        basis.push(linalg::kron_vec(&e[a], &e[b]) + linalg::kron_vec(&e[b], &e[a]) + &sym * coeff);
    }
    basis
}

pub fn two_atom_null_frame(cfg: &ModelConfig, p: &ParameterPoint) -> Result<NullFrame> {
    p.check(cfg)?;
    if cfg.gamma != 0.0 {
        return Err(Error::DecayNotAllowed);
    }
    if cfg.w <= 0.0 {
        return Err(Error::ZeroInteraction);
    }
    let amps = p.amplitudes();
    let om2 = omega_squared(cfg, &amps);
    let g = single_gram(cfg, &amps);
    let gi = single_gram_inv(cfg, &amps);
    let zero = CMat::from_element(1, 1, C64::new(8.0 * om2 * om2, 0.0));
    let zero_inv = CMat::from_element(1, 1, C64::new(1.0 / (8.0 * om2 * om2), 0.0));
    let gram = block_diag(&[zero, minus_gram(&g, cfg.d), plus_gram(cfg, &amps)]);
    let gram_inv = block_diag(&[zero_inv, minus_gram_inv(&gi, cfg.d), plus_gram_inv(cfg, &amps)]);
    let mut labels = alloc::vec![FrameLabel::Zero];
    labels.extend(minus_pairs(cfg.d).into_iter().map(|(a, b)| FrameLabel::Minus(a, b)));
    labels.extend(plus_pairs(cfg.d).into_iter().map(|(a, b)| FrameLabel::Plus(a, b)));
    Ok(NullFrame { basis: two_atom_vectors(cfg, &amps), gram, gram_inv, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub nonzero_eigs: Vec<f64>,
    pub gap: f64,
    pub quintic_roots: [f64; 5],
    pub asymptotic_gap: f64,
    pub d2: f64,
    /// Largest distance between a quintic root and its paired eigenvalue.
    pub root_mismatch: f64,
    /// Eigenvalue closest to W (meaningful at large W).
    pub near_w: Option<f64>,
}

const ROOT_MATCH_TOL: f64 = 1e-6;
const ROOT_IMAG_TOL: f64 = 1e-8;

/// Real roots, ascending, of
/// x^5 - W x^4 - 5 O^2 x^3 + W (5 O^2 - 2 |Od|^2) x^2 + 4 O^4 x - W (2 |Od|^4 + 4 D^4).
pub fn quintic_roots(w: f64, omega2: f64, omega_d_abs2: f64) -> Result<[f64; 5]> {
    let d2 = omega2 - omega_d_abs2;
    let c = [
        -w * (2.0 * omega_d_abs2 * omega_d_abs2 + 4.0 * d2 * d2),
        4.0 * omega2 * omega2,
        w * (5.0 * omega2 - 2.0 * omega_d_abs2),
        -5.0 * omega2,
        -w,
    ];
    let mut companion = nalgebra::DMatrix::<f64>::zeros(5, 5);
    for i in 1..5 {
        companion[(i, i - 1)] = 1.0;
    }
    for (i, ci) in c.iter().enumerate() {
        companion[(i, 4)] = -ci;
    }
    let eig = companion.complex_eigenvalues();
    let scale = omega2.sqrt().max(w).max(1.0);
    let poly = |x: f64| (((((x + c[4]) * x + c[3]) * x + c[2]) * x + c[1]) * x) + c[0];
    let dpoly = |x: f64| (((5.0 * x + 4.0 * c[4]) * x + 3.0 * c[3]) * x + 2.0 * c[2]) * x + c[1];
    let mut roots = [0.0; 5];
    for (i, z) in eig.iter().enumerate() {
        if z.im.abs() > ROOT_IMAG_TOL * scale {
            return Err(Error::ComplexRoot { w, d2, re: z.re, im: z.im });
        }
        let mut x = z.re;
        for _ in 0..3 {
            let dp = dpoly(x);
            if dp.abs() < 1e-300 {
                break;
            }
            let step = poly(x) / dp;
            if step.abs() > 1e-6 * scale {
                break;
            }
            x -= step;
        }
        roots[i] = x;
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// (1/sqrt 2)(3|Od|^2 + 5D^2 - sqrt(|Od|^4 + 30 D^2 |Od|^2 + 9 D^4))^(1/2).
pub fn asymptotic_gap(d2: f64, omega_d_abs2: f64) -> f64 {
    let o = omega_d_abs2;
    let inner = o * o + 30.0 * d2 * o + 9.0 * d2 * d2;
    ((3.0 * o + 5.0 * d2 - inner.sqrt()).max(0.0) / 2.0).sqrt()
}

pub fn spectral_gap(cfg: &ModelConfig, p: &ParameterPoint) -> Result<SpectrumReport> {
    p.check(cfg)?;
    if cfg.gamma != 0.0 {
        return Err(Error::DecayNotAllowed);
    }
    let amps = p.amplitudes();
    let h = two_atom_matrix(cfg, &amps, false);
    let eigs = linalg::hermitian_eigenvalues(&h);
    let null_dim = cfg.d * cfg.d + if cfg.w > 0.0 { 1 } else { 2 };
    let mut by_mag = eigs.clone();
    by_mag.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let mut nonzero: Vec<f64> = by_mag[null_dim..].to_vec();
    nonzero.sort_by(|a, b| a.total_cmp(b));
    let gap = nonzero.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);

    let om2 = omega_squared(cfg, &amps);
    let od2 = cfg.omega_d.norm_sqr();
    let roots = quintic_roots(cfg.w, om2, od2)?;
    let mut pool: Vec<f64> = eigs.clone();
    let mut worst: f64 = 0.0;
    for r in roots {
        let (idx, dist) = pool
            .iter()
            .enumerate()
            .map(|(i, e)| (i, (e - r).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
        if dist > ROOT_MATCH_TOL * om2.sqrt().max(cfg.w).max(1.0) {
            return Err(Error::RootMismatch { root: r, distance: dist, tolerance: ROOT_MATCH_TOL });
        }
        worst = worst.max(dist);
        pool.remove(idx);
    }
    let near_w = if cfg.w > 0.0 {
        nonzero.iter().cloned().min_by(|a, b| (a - cfg.w).abs().total_cmp(&(b - cfg.w).abs()))
    } else {
        None
    };
    let d2 = om2 - od2;
    Ok(SpectrumReport {
        nonzero_eigs: nonzero,
        gap,
        quintic_roots: roots,
        asymptotic_gap: asymptotic_gap(d2, od2),
        d2,
        root_mismatch: worst,
        near_w,
    })
}
