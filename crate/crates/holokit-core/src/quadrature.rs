//! Composite Gauss-Legendre quadrature.

use crate::C64;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::{Float, Zero};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = Float::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[a, b]` split into `panels` equal panels.
    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> C64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut total = C64::zero();
        for k in 0..panels {
            let lo = a + h * k as f64;
            let mid = lo + 0.5 * h;
            let mut s = C64::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += f(mid + 0.5 * h * x) * *w;
            }
            total += s * (0.5 * h);
        }
        total
    }

    pub fn integrate_real<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        self.integrate(a, b, panels, |x| C64::new(f(x), 0.0)).re
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let g = GaussLegendre::new(5);
        let v = g.integrate_real(0.0, 2.0, 1, |x| x.powi(9) - 3.0 * x.powi(4));
        assert!((v - (1024.0 / 10.0 - 3.0 * 32.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 7, 16, 33] {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
        }
    }
}
