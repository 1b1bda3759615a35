//! Small dense helpers on complex matrices.

use crate::{CMat, CVec, C64};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Zero};

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// SWAP on two factors of dimension `n`: |i,j> -> |j,i>.
pub fn swap(n: usize) -> CMat {
    let mut s = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(j * n + i, i * n + j)] = C64::one();
        }
    }
    s
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `||U^dagger U - 1||` in spectral norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    op_norm(&(u.adjoint() * u - identity(u.ncols())))
}

/// Half the trace norm of `a - b` for Hermitian arguments.
pub fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).fold(C64::zero(), |s, z| s + z)
}

/// Matrix exponential: diagonal [6/6] Pade approximant after scaling the
/// 1-norm below 1/2, then repeated squaring.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm1 = (0..n).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0i32;
    if norm1 > 0.5 {
        squarings = Float::ceil(Float::log2(norm1 / 0.5)) as i32;
    }
    let a = m * C64::new(Float::powi(2.0, -squarings), 0.0);
    const Q: usize = 6;
    let mut c = 0.5;
    let mut x = a.clone();
    let id = identity(n);
    let mut num = &id + &a * C64::new(c, 0.0);
    let mut den = &id - &a * C64::new(c, 0.0);
    for k in 2..=Q {
        c *= (Q - k + 1) as f64 / (k * (2 * Q - k + 1)) as f64;
        x = &a * &x;
        let cx = &x * C64::new(c, 0.0);
        num += &cx;
        if k % 2 == 0 {
            den += &cx;
        } else {
            den -= &cx;
        }
    }
    let mut e = den.lu().solve(&num).unwrap_or_else(|| CMat::from_element(n, n, C64::new(f64::NAN, 0.0)));
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

/// `exp(i * phase * P)` for an orthogonal projector `P`.
pub fn phase_on_projector(p: &CMat, phase: f64) -> CMat {
    let n = p.nrows();
    identity(n) + p * (C64::from_polar(1.0, phase) - C64::one())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_exchanges_factors() {
        let a = CVec::from_vec(alloc::vec![C64::new(1.0, 0.0), C64::new(2.0, 1.0)]);
        let b = CVec::from_vec(alloc::vec![C64::new(0.0, 3.0), C64::new(-1.0, 0.0)]);
        let s = swap(2);
        let lhs = &s * kron_vec(&a, &b);
        assert!((lhs - kron_vec(&b, &a)).norm() < 1e-15);
    }

    #[test]
    fn projector_phase_matches_expm() {
        let v = CVec::from_vec(alloc::vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let p = outer(&v, &v);
        let direct = expm(&(&p * C64::new(0.0, 1.3)));
        assert!(max_abs(&(direct - phase_on_projector(&p, 1.3))) < 1e-13);
    }

    #[test]
    fn expm_matches_reference_implementation() {
        for scale in [0.01, 0.7, 3.0, 40.0] {
            let m = CMat::from_fn(6, 6, |i, j| {
                C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 - 1.0) * scale
            });
            let a = &m - m.adjoint() + CMat::identity(6, 6) * C64::new(-0.1 * scale, 0.0);
            let ours = expm(&a);
            let reference = a.clone().exp();
            let rel = max_abs(&(&ours - &reference)) / max_abs(&reference).max(1.0);
            assert!(rel < 1e-12, "scale {scale}: {rel:e}");
        }
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = C64::one();
        let mut b = CMat::zeros(2, 2);
        b[(1, 1)] = C64::one();
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-14);
    }
}
