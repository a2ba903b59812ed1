//! Dirichlet-Laplacian eigenbasis on `(0, L)` and fields expanded in it.
//!
//! `A = -d²/dx²` with homogeneous Dirichlet conditions has eigenpairs
//! `λ_k = (kπ/L)²`, `e_k(x) = √(2/L)·sin(kπx/L)`. Everything downstream works
//! with coefficient vectors in this basis; spatial integrals use one shared
//! Gauss–Legendre rule whose weights sum to `L`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Coefficients of a field in the eigenbasis, mode `k` stored at index `k - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralField(Vec<f64>);

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    /// Single mode `k` (1-based) with the given amplitude.
    pub fn mode(m: usize, k: usize, amplitude: f64) -> Self {
        let mut c = vec![0.0; m];
        c[k - 1] = amplitude;
        Self(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// L² norm (Parseval).
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum()
    }

    pub fn dot(&self, other: &SpectralField) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        Self(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &SpectralField) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    /// `(1 - w)·a + w·b`
    pub fn lerp(a: &SpectralField, b: &SpectralField, w: f64) -> SpectralField {
        Self(a.0.iter().zip(&b.0).map(|(x, y)| x + w * (y - x)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Copy truncated or zero-padded to `m` modes.
    pub fn resized(&self, m: usize) -> SpectralField {
        let mut c = self.0.clone();
        c.resize(m, 0.0);
        Self(c)
    }
}

/// Eigenbasis of the Dirichlet Laplacian on `(0, L)` with `m` modes plus the
/// spatial quadrature rule shared by all integrals.
#[derive(Clone, Debug)]
pub struct Basis {
    length: f64,
    lambda: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // e_k(x_q), row-major with stride = nodes.len()
    modes_at_nodes: Vec<f64>,
}

impl Basis {
    /// Builds the basis; requires `L > 0`, `m ≥ 1`, and `quad_order ≥ 4m`.
    pub fn new(length: f64, m: usize, quad_order: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::config(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if m == 0 {
            return Err(Error::config("mode count must be at least 1"));
        }
        if quad_order < 4 * m {
            return Err(Error::config(format!(
                "quadrature order {quad_order} is below 4 x modes = {}",
                4 * m
            )));
        }
        let lambda = (1..=m).map(|k| (k as f64 * PI / length).powi(2)).collect();
        let (nodes, weights) = gauss_legendre(quad_order, 0.0, length);
        let q = nodes.len();
        let scale = (2.0 / length).sqrt();
        let mut modes_at_nodes = vec![0.0; m * q];
        for k in 0..m {
            let kk = (k + 1) as f64 * PI / length;
            for (j, &x) in nodes.iter().enumerate() {
                modes_at_nodes[k * q + j] = scale * (kk * x).sin();
            }
        }
        Ok(Self {
            length,
            lambda,
            nodes,
            weights,
            modes_at_nodes,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda[0]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `e_k(x)` for 1-based `k`.
    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * (k as f64 * PI * x / self.length).sin()
    }

    /// `e_k` at the quadrature nodes, 1-based `k`.
    pub fn mode_at_nodes(&self, k: usize) -> &[f64] {
        let q = self.nodes.len();
        &self.modes_at_nodes[(k - 1) * q..k * q]
    }

    /// Values of `u` at the quadrature nodes.
    pub fn values_at_nodes(&self, u: &SpectralField) -> Vec<f64> {
        let q = self.nodes.len();
        let mut out = vec![0.0; q];
        for (k, &c) in u.coeffs().iter().enumerate().take(self.modes()) {
            if c == 0.0 {
                continue;
            }
            let row = &self.modes_at_nodes[k * q..(k + 1) * q];
            for (o, e) in out.iter_mut().zip(row) {
                *o += c * e;
            }
        }
        out
    }

    /// Quadrature projection of nodal samples onto `e_1..e_m`.
    pub fn project(&self, samples: &[f64]) -> Result<SpectralField> {
        if samples.len() != self.nodes.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples on the quadrature nodes, got {}",
                self.nodes.len(),
                samples.len()
            )));
        }
        Ok(self.project_nodes(samples))
    }

    pub(crate) fn project_nodes(&self, samples: &[f64]) -> SpectralField {
        let q = self.nodes.len();
        let weighted: Vec<f64> = samples.iter().zip(&self.weights).map(|(s, w)| s * w).collect();
        let coeffs = (0..self.modes())
            .map(|k| {
                self.modes_at_nodes[k * q..(k + 1) * q]
                    .iter()
                    .zip(&weighted)
                    .map(|(e, s)| e * s)
                    .sum()
            })
            .collect();
        SpectralField(coeffs)
    }

    /// Projects a function sampled at the quadrature nodes.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> SpectralField {
        let samples: Vec<f64> = self.nodes.iter().map(|&x| f(x)).collect();
        self.project_nodes(&samples)
    }

    /// `‖A^s u‖ = (Σ λ_k^{2s} c_k²)^{1/2}`. Intended for `s ∈ [-1, 1]`; `s = 0` is the L² norm.
    pub fn fractional_norm(&self, u: &SpectralField, s: f64) -> f64 {
        if s == 0.0 {
            return u.norm();
        }
        u.coeffs()
            .iter()
            .zip(&self.lambda)
            .map(|(c, l)| l.powf(2.0 * s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// `c_k ↦ λ_k·c_k`
    pub fn apply_a(&self, u: &SpectralField) -> SpectralField {
        SpectralField(u.coeffs().iter().zip(&self.lambda).map(|(c, l)| c * l).collect())
    }

    /// Point evaluation; points must lie in `[0, L]`.
    pub fn evaluate(&self, u: &SpectralField, points: &[f64]) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|&x| {
                if !(0.0..=self.length).contains(&x) {
                    return Err(Error::Domain(format!(
                        "point {x} lies outside [0, {}]",
                        self.length
                    )));
                }
                if x == 0.0 || x == self.length {
                    return Ok(0.0);
                }
                Ok(u.coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * self.eigenfunction(k + 1, x))
                    .sum())
            })
            .collect()
    }

    /// `max_{k,j} |⟨e_k, e_j⟩_Q - δ_kj|` under the quadrature rule.
    pub fn orthonormality_residual(&self) -> f64 {
        let m = self.modes();
        let mut worst: f64 = 0.0;
        for k in 1..=m {
            for j in k..=m {
                let ip: f64 = self
                    .mode_at_nodes(k)
                    .iter()
                    .zip(self.mode_at_nodes(j))
                    .zip(&self.weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                let target = if k == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    /// Quadrature integral of nodal samples over `(0, L)`.
    pub fn integrate_nodes(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(s, w)| s * w).sum()
    }
}
