//! Quadrature rules: Gauss–Legendre for space, composite trapezoid for the delay window.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `(a, b)`.
///
/// Nodes are returned in increasing order. Roots of `P_n` are found by Newton
/// iteration from the Chebyshev-like initial guess; this is accurate to machine
/// precision for the orders used here (up to a few thousand).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // z runs from near +1 downwards
        nodes[i] = mid - half * z;
        nodes[n - 1 - i] = mid + half * z;
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite trapezoid rule on `[-r, 0]` with both endpoints as nodes.
///
/// Constants are integrated exactly, and for smooth compactly supported
/// integrands inside the window the rule converges faster than any power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaQuadrature {
    r: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ThetaQuadrature {
    pub fn new(r: f64, n_nodes: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::config(format!("delay r must be positive, got {r}")));
        }
        if n_nodes < 2 {
            return Err(Error::config("theta quadrature needs at least 2 nodes"));
        }
        let h = r / (n_nodes - 1) as f64;
        let nodes: Vec<f64> = (0..n_nodes)
            .map(|j| if j == n_nodes - 1 { 0.0 } else { -r + j as f64 * h })
            .collect();
        let mut weights = vec![h; n_nodes];
        weights[0] = 0.5 * h;
        weights[n_nodes - 1] = 0.5 * h;
        Ok(Self { r, nodes, weights })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Uniform grid with `n` points on `[-r, 0]`, endpoints included.
    pub fn dense_grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|j| -self.r + self.r * j as f64 / (n - 1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5, 0.0, 2.0);
        // degree 9 is the limit for 5 nodes
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((got - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn gauss_legendre_high_order_weights_sum_to_length() {
        let (x, w) = gauss_legendre(512, 0.0, 3.0);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(x[0] > 0.0 && x[511] < 3.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (x * PI / 3.0).sin()).sum();
        assert!((s - 6.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn theta_rule_has_endpoints_and_integrates_constants() {
        let q = ThetaQuadrature::new(1.5, 32).unwrap();
        assert_eq!(q.nodes()[0], -1.5);
        assert_eq!(*q.nodes().last().unwrap(), 0.0);
        assert!((q.integrate(|_| 2.0) - 3.0).abs() < 1e-14);
        assert!(ThetaQuadrature::new(0.0, 32).is_err());
        assert!(ThetaQuadrature::new(1.0, 1).is_err());
    }
}
