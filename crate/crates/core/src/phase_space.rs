//! Phase space `H = L²(Ω) × L²(-r, 0; L²(Ω))`: history segments and states.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::quadrature::ThetaQuadrature;
use crate::spectral::SpectralField;

// Relative slack when checking that a history covers the full delay window.
const COVERAGE_TOL: f64 = 1e-9;

/// Time-stamped fields covering at least `[t_now - r, t_now]`, interpolated
/// piecewise linearly in time.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySegment {
    r: f64,
    entries: VecDeque<(f64, SpectralField)>,
    capacity: Option<usize>,
}

impl HistorySegment {
    /// Unbounded segment.
    pub fn new(r: f64) -> Self {
        Self {
            r,
            entries: VecDeque::new(),
            capacity: None,
        }
    }

    /// Ring buffer holding at most `capacity` entries; the oldest are evicted.
    pub fn with_capacity(r: f64, capacity: usize) -> Self {
        Self {
            r,
            entries: VecDeque::with_capacity(capacity),
            capacity: Some(capacity),
        }
    }

    /// Builds a segment from `(time, field)` pairs, which must be strictly increasing in time.
    pub fn from_entries(r: f64, entries: Vec<(f64, SpectralField)>) -> Result<Self> {
        let mut h = Self::new(r);
        for (t, u) in entries {
            h.push(t, u)?;
        }
        Ok(h)
    }

    /// History `θ ↦ f(θ)` sampled at the given offsets (relative to `t_now = 0`).
    pub fn sampled(r: f64, thetas: &[f64], f: impl Fn(f64) -> SpectralField) -> Result<Self> {
        Self::from_entries(r, thetas.iter().map(|&t| (t, f(t))).collect())
    }

    /// Constant history `ψ(θ) ≡ u` on the given offsets.
    pub fn constant(r: f64, thetas: &[f64], u: &SpectralField) -> Result<Self> {
        Self::sampled(r, thetas, |_| u.clone())
    }

    pub fn push(&mut self, t: f64, u: SpectralField) -> Result<()> {
        if let Some((last, _)) = self.entries.back() {
            if !(t > *last) {
                return Err(Error::InvalidState(format!(
                    "history times must increase: {t} after {last}"
                )));
            }
        }
        if let Some(cap) = self.capacity {
            while self.entries.len() >= cap {
                self.entries.pop_front();
            }
        }
        self.entries.push_back((t, u));
        Ok(())
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn t_now(&self) -> Option<f64> {
        self.entries.back().map(|(t, _)| *t)
    }

    pub fn head(&self) -> Option<&SpectralField> {
        self.entries.back().map(|(_, u)| u)
    }

    pub fn entries(&self) -> impl Iterator<Item = &(f64, SpectralField)> {
        self.entries.iter()
    }

    /// True when the stored entries span `[t_now - r, t_now]`.
    pub fn covers_window(&self) -> bool {
        match (self.entries.front(), self.entries.back()) {
            (Some((t0, _)), Some((t1, _))) => t1 - t0 >= self.r * (1.0 - COVERAGE_TOL),
            _ => false,
        }
    }

    /// `u(t_now + θ)` for `θ ∈ [-r, 0]`, linear between stored nodes.
    pub fn sample(&self, theta: f64) -> Result<SpectralField> {
        if !(theta >= -self.r * (1.0 + COVERAGE_TOL) && theta <= 0.0) {
            return Err(Error::Domain(format!("theta = {theta} outside [-{}, 0]", self.r)));
        }
        let (t_first, t_now) = match (self.entries.front(), self.entries.back()) {
            (Some((a, _)), Some((b, _))) => (*a, *b),
            _ => return Err(Error::InvalidState("empty history".into())),
        };
        let t = t_now + theta;
        let slack = COVERAGE_TOL * self.r.max(t_now.abs());
        if t < t_first - slack {
            return Err(Error::InvalidState(format!(
                "history starts at {t_first}, cannot sample t = {t}"
            )));
        }
        if theta == 0.0 {
            return Ok(self.entries.back().unwrap().1.clone());
        }
        let t = t.max(t_first);
        // first index with time > t
        let idx = self.entries.partition_point(|(ti, _)| *ti <= t);
        if idx == 0 {
            return Ok(self.entries[0].1.clone());
        }
        let (ta, ua) = &self.entries[idx - 1];
        if *ta == t || idx == self.entries.len() {
            return Ok(ua.clone());
        }
        let (tb, ub) = &self.entries[idx];
        let w = (t - ta) / (tb - ta);
        Ok(SpectralField::lerp(ua, ub, w))
    }

    /// Samples at every node of `quad`.
    pub fn sample_nodes(&self, quad: &ThetaQuadrature) -> Result<Vec<SpectralField>> {
        quad.nodes().iter().map(|&th| self.sample(th)).collect()
    }
}

/// A point `(v, ψ)` of the phase space.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub v: SpectralField,
    pub psi: HistorySegment,
}

impl PhaseState {
    /// Requires a history that covers the whole delay window.
    pub fn new(v: SpectralField, psi: HistorySegment) -> Result<Self> {
        if !psi.covers_window() {
            return Err(Error::InvalidState(format!(
                "history does not cover a window of length {}",
                psi.r()
            )));
        }
        Ok(Self { v, psi })
    }

    /// The stationary state `(u, ū)` with constant history, sampled on `quad`'s nodes.
    pub fn stationary(u: &SpectralField, quad: &ThetaQuadrature) -> Self {
        let psi =
            HistorySegment::constant(quad.r(), quad.nodes(), u).expect("quadrature nodes are increasing");
        Self { v: u.clone(), psi }
    }

    pub fn zero(m: usize, quad: &ThetaQuadrature) -> Self {
        Self::stationary(&SpectralField::zeros(m), quad)
    }

    pub fn r(&self) -> f64 {
        self.psi.r()
    }

    /// `ψ(θ_j)` at the quadrature nodes.
    pub fn history_at(&self, quad: &ThetaQuadrature) -> Vec<SpectralField> {
        self.psi
            .sample_nodes(quad)
            .expect("phase states always cover the delay window")
    }

    /// `(‖v‖² + Σ_j w_j ‖ψ(θ_j)‖²)^{1/2}`
    pub fn h_norm(&self, quad: &ThetaQuadrature) -> f64 {
        let hist: f64 = self
            .history_at(quad)
            .iter()
            .zip(quad.weights())
            .map(|(u, w)| w * u.norm_sq())
            .sum();
        (self.v.norm_sq() + hist).sqrt()
    }

    /// Distance in the discrete H-norm.
    pub fn h_distance(&self, other: &PhaseState, quad: &ThetaQuadrature) -> f64 {
        h_distance_sampled(
            &self.v,
            &self.history_at(quad),
            &other.v,
            &other.history_at(quad),
            quad,
        )
    }

    /// Distance to the stationary state `(u, ū)`.
    pub fn h_distance_to_stationary(&self, u: &SpectralField, quad: &ThetaQuadrature) -> f64 {
        let hist: f64 = self
            .history_at(quad)
            .iter()
            .zip(quad.weights())
            .map(|(p, w)| w * p.sub(u).norm_sq())
            .sum();
        (self.v.sub(u).norm_sq() + hist).sqrt()
    }
}

pub(crate) fn h_distance_sampled(
    v1: &SpectralField,
    h1: &[SpectralField],
    v2: &SpectralField,
    h2: &[SpectralField],
    quad: &ThetaQuadrature,
) -> f64 {
    let hist: f64 = h1
        .iter()
        .zip(h2)
        .zip(quad.weights())
        .map(|((a, b), w)| w * a.sub(b).norm_sq())
        .sum();
    (v1.sub(v2).norm_sq() + hist).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_history(dt: f64, r: f64) -> HistorySegment {
        let n = (r / dt).round() as usize;
        let mut h = HistorySegment::new(r);
        for i in 0..=n {
            let t = i as f64 * dt;
            h.push(t, SpectralField::new(vec![t, 0.0])).unwrap();
        }
        h
    }

    #[test]
    fn constant_history_returns_constant() {
        let q = ThetaQuadrature::new(1.0, 9).unwrap();
        let c = SpectralField::new(vec![0.5, -1.0]);
        let h = HistorySegment::constant(1.0, q.nodes(), &c).unwrap();
        for th in [-1.0, -0.77, -0.5, -0.01, 0.0] {
            assert_eq!(h.sample(th).unwrap(), c);
        }
    }

    #[test]
    fn theta_zero_is_head() {
        let h = linear_history(0.1, 1.0);
        assert_eq!(h.sample(0.0).unwrap(), *h.head().unwrap());
    }

    #[test]
    fn linear_profile_reproduced_between_nodes() {
        let h = linear_history(0.1, 1.0);
        let t_now = h.t_now().unwrap();
        for th in [-0.95, -0.333, -0.05, -0.5] {
            let got = h.sample(th).unwrap().coeffs()[0];
            assert!((got - (t_now + th)).abs() < 1e-14);
        }
    }

    #[test]
    fn sampling_errors() {
        let h = linear_history(0.1, 1.0);
        assert!(matches!(h.sample(0.1), Err(Error::Domain(_))));
        assert!(matches!(h.sample(-1.5), Err(Error::Domain(_))));
        let mut short = HistorySegment::new(1.0);
        short.push(0.0, SpectralField::zeros(1)).unwrap();
        short.push(0.5, SpectralField::zeros(1)).unwrap();
        assert!(matches!(short.sample(-0.9), Err(Error::InvalidState(_))));
        assert!(PhaseState::new(SpectralField::zeros(1), short).is_err());
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut h = HistorySegment::with_capacity(1.0, 3);
        for i in 0..6 {
            h.push(i as f64, SpectralField::zeros(1)).unwrap();
        }
        assert_eq!(h.len(), 3);
        assert_eq!(h.entries().next().unwrap().0, 3.0);
        assert!(h.push(5.0, SpectralField::zeros(1)).is_err());
    }

    #[test]
    fn h_norm_examples() {
        let q = ThetaQuadrature::new(1.0, 32).unwrap();
        assert_eq!(PhaseState::zero(3, &q).h_norm(&q), 0.0);
        let e1 = SpectralField::mode(3, 1, 1.0);
        let zero_hist = HistorySegment::constant(1.0, q.nodes(), &SpectralField::zeros(3)).unwrap();
        let s = PhaseState::new(e1.clone(), zero_hist).unwrap();
        assert!((s.h_norm(&q) - 1.0).abs() < 1e-15);
        let hist = HistorySegment::constant(1.0, q.nodes(), &e1).unwrap();
        let s = PhaseState::new(SpectralField::zeros(3), hist).unwrap();
        assert!((s.h_norm(&q) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_error_is_at_least_first_order() {
        // smooth synthetic history u(t) = sin(3t)·e1
        let r = 1.0;
        let err = |dt: f64| {
            let n = (r / dt).round() as usize;
            let mut h = HistorySegment::new(r);
            for i in 0..=n {
                let t = i as f64 * dt;
                h.push(t, SpectralField::new(vec![(3.0 * t).sin()])).unwrap();
            }
            let t_now = n as f64 * dt;
            (0..200)
                .map(|j| -r * (j as f64 + 0.37) / 200.0)
                .map(|th| (h.sample(th).unwrap().coeffs()[0] - (3.0 * (t_now + th)).sin()).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(0.05);
        let e2 = err(0.025);
        assert!(e2 <= 0.5 * e1 * 1.05, "{e1} -> {e2}");
    }
}
