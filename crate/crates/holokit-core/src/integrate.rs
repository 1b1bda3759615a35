//! Fixed-step fourth-order integrators for linear matrix ODEs on
//! piecewise-smooth time grids.

use crate::gates::loops::Side;
use crate::linalg;
use crate::{CMat, C64};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// A smooth interval integrated with `steps` uniform steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Segment {
    pub fn h(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }
}

/// Splits `steps` over the intervals between breakpoints, proportionally
/// to their length, with at least one step each.
pub fn allocate_steps(breakpoints: &[f64], steps: usize) -> Vec<Segment> {
    let spans: Vec<(f64, f64)> = breakpoints.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect();
    if spans.is_empty() {
        return Vec::new();
    }
    let total: f64 = spans.iter().map(|(a, b)| b - a).sum();
    let mut counts: Vec<usize> =
        spans.iter().map(|(a, b)| (((b - a) / total * steps as f64).round() as usize).max(1)).collect();
    let mut sum: usize = counts.iter().sum();
    while sum > steps {
        let Some((i, _)) = counts.iter().enumerate().filter(|(_, c)| **c > 1).max_by_key(|(_, c)| **c) else {
            break;
        };
        counts[i] -= 1;
        sum -= 1;
    }
    while sum < steps {
        let i = (0..spans.len())
            .max_by(|&x, &y| {
                let hx = (spans[x].1 - spans[x].0) / counts[x] as f64;
                let hy = (spans[y].1 - spans[y].0) / counts[y] as f64;
                hx.total_cmp(&hy)
            })
            .unwrap_or(0);
        counts[i] += 1;
        sum += 1;
    }
    spans.iter().zip(counts).map(|(&(start, end), steps)| Segment { start, end, steps }).collect()
}

/// Segments of roughly uniform step `dt`.
pub fn segments_for_step(breakpoints: &[f64], dt: f64) -> Vec<Segment> {
    let total = breakpoints.last().copied().unwrap_or(0.0) - breakpoints.first().copied().unwrap_or(0.0);
    allocate_steps(breakpoints, ((total / dt).ceil() as usize).max(1))
}

pub fn total_steps(segments: &[Segment]) -> usize {
    segments.iter().map(|s| s.steps).sum()
}

fn sample_side(k: usize, steps: usize, stage_end: bool) -> Side {
    if stage_end && k + 1 == steps {
        Side::Left
    } else {
        Side::Right
    }
}

/// Classical RK4 for dY/dt = G(t) Y; `gen` receives the one-sided limit to use.
pub fn rk4<G>(mut gen: G, y0: CMat, segments: &[Segment]) -> CMat
where
    G: FnMut(f64, Side) -> CMat,
{
    let mut y = y0;
    for seg in segments {
        let h = seg.h();
        for k in 0..seg.steps {
            let t = seg.start + h * k as f64;
            let g1 = gen(t, Side::Right);
            let gm = gen(t + 0.5 * h, Side::Right);
            let g4 = gen(if k + 1 == seg.steps { seg.end } else { t + h }, sample_side(k, seg.steps, true));
            let k1 = &g1 * &y;
            let k2 = &gm * (&y + &k1 * C64::new(0.5 * h, 0.0));
            let k3 = &gm * (&y + &k2 * C64::new(0.5 * h, 0.0));
            let k4 = &g4 * (&y + &k3 * C64::new(h, 0.0));
            y += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        }
    }
    y
}

/// RK4 for a general right-hand side dY/dt = F(t, Y).
pub fn rk4_general<F>(mut rhs: F, y0: CMat, segments: &[Segment]) -> CMat
where
    F: FnMut(f64, Side, &CMat) -> CMat,
{
    let mut y = y0;
    for seg in segments {
        let h = seg.h();
        for k in 0..seg.steps {
            let t = seg.start + h * k as f64;
            let tend = if k + 1 == seg.steps { seg.end } else { t + h };
            let k1 = rhs(t, Side::Right, &y);
            let k2 = rhs(t + 0.5 * h, Side::Right, &(&y + &k1 * C64::new(0.5 * h, 0.0)));
            let k3 = rhs(t + 0.5 * h, Side::Right, &(&y + &k2 * C64::new(0.5 * h, 0.0)));
            let k4 = rhs(tend, sample_side(k, seg.steps, true), &(&y + &k3 * C64::new(h, 0.0)));
            y += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        }
    }
    y
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6

/// Fourth-order Magnus step for i dY/dt = H(t) Y with H sampled at the two
/// Gauss points of each step.
pub fn magnus4<H>(mut ham: H, y0: CMat, segments: &[Segment]) -> CMat
where
    H: FnMut(f64) -> CMat,
{
    let mut y = y0;
    let c = 3.0f64.sqrt() / 12.0;
    for seg in segments {
        let h = seg.h();
        for k in 0..seg.steps {
            let t = seg.start + h * k as f64;
            let h1 = ham(t + (0.5 - GAUSS_OFFSET) * h);
            let h2 = ham(t + (0.5 + GAUSS_OFFSET) * h);
            let comm = linalg::commutator(&h2, &h1);
            let omega = (&h1 + &h2) * C64::new(0.0, -0.5 * h) - comm * C64::new(c * h * h, 0.0);
            y = linalg::expm(&omega) * y;
        }
    }
    y
}

/// One Magnus step of length h; `ham(node)` samples H at t + node h.
pub fn magnus4_step<H>(ham: &H, h: f64) -> CMat
where
    H: Fn(f64) -> CMat,
{
    let c = 3.0f64.sqrt() / 12.0;
    let h1 = ham(0.5 - GAUSS_OFFSET);
    let h2 = ham(0.5 + GAUSS_OFFSET);
    let comm = linalg::commutator(&h2, &h1);
    linalg::expm(&((&h1 + &h2) * C64::new(0.0, -0.5 * h) - comm * C64::new(c * h * h, 0.0)))
}

/// Magnus step with an explicit per-step Hamiltonian sampler `ham(step_start, h, node)`
/// where `node` is the fractional Gauss position in the step.
pub fn magnus4_stepwise<H>(mut ham: H, y0: CMat, segments: &[Segment]) -> CMat
where
    H: FnMut(usize, f64, f64) -> CMat,
{
    let mut y = y0;
    let c = 3.0f64.sqrt() / 12.0;
    let mut index = 0;
    for seg in segments {
        let h = seg.h();
        for _ in 0..seg.steps {
            let h1 = ham(index, h, 0.5 - GAUSS_OFFSET);
            let h2 = ham(index, h, 0.5 + GAUSS_OFFSET);
            let comm = linalg::commutator(&h2, &h1);
            let omega = (&h1 + &h2) * C64::new(0.0, -0.5 * h) - comm * C64::new(c * h * h, 0.0);
            y = linalg::expm(&omega) * y;
            index += 1;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_respects_total_and_segments() {
        let segs = allocate_steps(&[0.0, 1.0, 1.5, 11.5], 100);
        assert_eq!(total_steps(&segs), 100);
        assert!(segs.iter().all(|s| s.steps >= 1));
        assert_eq!(segs[1].start, 1.0);
    }

    #[test]
    fn rk4_scalar_exponential_is_fourth_order() {
        let err = |n: usize| {
            let segs = allocate_steps(&[0.0, 2.0], n);
            let y = rk4(|t, _| CMat::from_element(1, 1, C64::new(0.0, t)), CMat::identity(1, 1), &segs);
            (y[(0, 0)] - C64::from_polar(1.0, 2.0)).norm()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn magnus_time_dependent_two_level_converges() {
        let ham = |t: f64| {
            let mut m = CMat::zeros(2, 2);
            m[(0, 1)] = C64::new(t.cos(), 0.3 * t);
            m[(1, 0)] = m[(0, 1)].conj();
            m[(0, 0)] = C64::new(0.5, 0.0);
            m
        };
        let run = |n: usize| magnus4(ham, CMat::identity(2, 2), &allocate_steps(&[0.0, 3.0], n));
        let reference = run(4000);
        let e1 = linalg::max_abs(&(run(50) - &reference));
        let e2 = linalg::max_abs(&(run(100) - &reference));
        assert!(e1 / e2 > 13.0, "{}", e1 / e2);
    }
}
