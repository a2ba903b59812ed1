//! Galerkin scheme: delay term assembly and time stepping on `m` modes.
//!
//! Each mode obeys `g_k' = -(λ_k + d) g_k + F_k(u_t)`. The delay term is frozen
//! at the start of a step and the linear part is integrated exactly, so
//! stiffness from high modes never limits `dt`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DelayKernel, KernelSpec};
use crate::model::{Nonlinearity, SpatialKernel};
use crate::phase_space::{HistorySegment, PhaseState};
use crate::quadrature::ThetaQuadrature;
use crate::spectral::{Basis, SpectralField};

/// Operator, domain and discretization parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub length: f64,
    pub modes: usize,
    pub quad_order: usize,
    /// Damping `d > 0`.
    pub d: f64,
    /// Maximal delay `r > 0`.
    pub r: f64,
    pub dt: f64,
    pub theta_nodes: usize,
    pub nonlinearity: Nonlinearity,
    pub spatial: SpatialKernel,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::config(format!("d must be positive (got {})", self.d)));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::config(format!("r must be positive (got {})", self.r)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive (got {})", self.dt)));
        }
        if self.dt > self.r / 4.0 * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "dt = {} exceeds r/4 = {}",
                self.dt,
                self.r / 4.0
            )));
        }
        if self.theta_nodes < 2 {
            return Err(Error::config("theta_nodes must be at least 2"));
        }
        let ratio = self.nonlinearity.sampled_bound_ratio();
        if ratio > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "nonlinearity exceeds its bound C_b by a factor {ratio}"
            )));
        }
        let fmax = self.spatial.sampled_max(self.length);
        if fmax > self.spatial.bound() * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "spatial kernel reaches {fmax}, above its bound M_f = {}",
                self.spatial.bound()
            )));
        }
        if let SpatialKernel::Gaussian { alpha } = self.spatial {
            if !(alpha > 0.0) {
                return Err(Error::config("gaussian alpha must be positive"));
            }
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<Basis> {
        let b = Basis::new(self.length, self.modes, self.quad_order)?;
        let total: f64 = b.weights().iter().sum();
        if (total - self.length).abs() > 1e-10 * self.length {
            return Err(Error::config(format!(
                "spatial quadrature weights sum to {total}, expected {}",
                self.length
            )));
        }
        Ok(b)
    }

    pub fn theta_quadrature(&self) -> Result<ThetaQuadrature> {
        ThetaQuadrature::new(self.r, self.theta_nodes)
    }

    /// Number of stored steps spanning one delay window.
    pub fn history_steps(&self) -> usize {
        ((self.r / self.dt) - 1e-9).ceil() as usize
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn with_modes(&self, m: usize) -> Self {
        Self {
            modes: m,
            quad_order: self.quad_order.max(4 * m),
            ..self.clone()
        }
    }
}

/// A validated configuration with its basis, delay quadrature, kernel and
/// precomputed convolution weights.
#[derive(Clone, Debug)]
pub struct Model {
    cfg: ModelConfig,
    basis: Basis,
    quad: ThetaQuadrature,
    kernel: Arc<dyn DelayKernel>,
    // w_y·f(x_q - y), row-major by x; None for constant f
    conv: Option<Vec<f64>>,
}

impl Model {
    pub fn new(cfg: ModelConfig, kernel: Arc<dyn DelayKernel>) -> Result<Self> {
        cfg.validate()?;
        let basis = cfg.basis()?;
        let quad = cfg.theta_quadrature()?;
        if kernel.modes() != cfg.modes {
            return Err(Error::config(format!(
                "kernel has {} modes, model has {}",
                kernel.modes(),
                cfg.modes
            )));
        }
        if (kernel.r() - cfg.r).abs() > 1e-12 * cfg.r {
            return Err(Error::config(format!(
                "kernel delay horizon {} differs from r = {}",
                kernel.r(),
                cfg.r
            )));
        }
        let conv = if cfg.spatial.is_constant() {
            None
        } else {
            let xs = basis.nodes();
            let ws = basis.weights();
            let mut c = Vec::with_capacity(xs.len() * xs.len());
            for &x in xs {
                for (&y, &w) in xs.iter().zip(ws) {
                    c.push(w * cfg.spatial.eval(x - y));
                }
            }
            Some(c)
        };
        Ok(Self {
            cfg,
            basis,
            quad,
            kernel,
            conv,
        })
    }

    pub fn from_spec(cfg: ModelConfig, spec: &KernelSpec) -> Result<Self> {
        cfg.validate()?;
        let basis = cfg.basis()?;
        let quad = cfg.theta_quadrature()?;
        let kernel = spec.build(&basis, &quad)?;
        Self::new(cfg, kernel)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn theta_quadrature(&self) -> &ThetaQuadrature {
        &self.quad
    }

    pub fn kernel(&self) -> &Arc<dyn DelayKernel> {
        &self.kernel
    }

    /// Same model with a different kernel.
    pub fn with_kernel(&self, kernel: Arc<dyn DelayKernel>) -> Result<Self> {
        Self::new(self.cfg.clone(), kernel)
    }

    /// `p(x_q) = Σ_y w_y b_y f(x_q - y)` for nodal values `b_y`.
    pub(crate) fn convolve(&self, b_vals: &[f64]) -> Vec<f64> {
        let q = b_vals.len();
        match &self.conv {
            None => {
                let SpatialKernel::Constant { value } = self.cfg.spatial else {
                    unreachable!("non-constant kernels carry a convolution matrix")
                };
                let s = value * self.basis.integrate_nodes(b_vals);
                vec![s; q]
            }
            Some(c) => (0..q)
                .map(|i| c[i * q..(i + 1) * q].iter().zip(b_vals).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// `∫_Ω b(u(y)) f(x - y) dy` at the spatial nodes.
    pub fn nonlocal_birth(&self, u: &SpectralField) -> Vec<f64> {
        let b = &self.cfg.nonlinearity;
        let vals: Vec<f64> = self.basis.values_at_nodes(u).iter().map(|&w| b.eval(w)).collect();
        self.convolve(&vals)
    }
}

/// The delay term `F(u_t)` projected onto the basis.
///
/// For every delay node `θ_j` the inner convolution
/// `g(θ_j, x) = ∫ b(u(t+θ_j, y)) f(x-y) dy` is multiplied by the kernel profile
/// and accumulated with the delay weights, all on the spatial nodes.
pub fn eval_f(state: &PhaseState, model: &Model) -> Result<SpectralField> {
    if !state.psi.covers_window() {
        return Err(Error::InvalidState(format!(
            "history does not cover [t - {}, t]",
            model.cfg.r
        )));
    }
    let basis = &model.basis;
    let quad = &model.quad;
    let m = basis.modes();
    let xis = model.kernel.eval_nodes(quad, state)?;
    if xis.iter().all(SpectralField::is_zero) {
        return Ok(SpectralField::zeros(m));
    }
    let mut acc = vec![0.0; basis.n_nodes()];
    for ((&theta, &w), xi) in quad.nodes().iter().zip(quad.weights()).zip(&xis) {
        if xi.is_zero() {
            continue;
        }
        let past = state.psi.sample(theta)?;
        let g = model.nonlocal_birth(&past);
        let profile = basis.values_at_nodes(xi);
        for ((a, gq), xq) in acc.iter_mut().zip(&g).zip(&profile) {
            *a += w * gq * xq;
        }
    }
    Ok(basis.project_nodes(&acc))
}

/// Output of one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// `⟨F(u_t), u(t)⟩` at the start of the step.
    pub pairing: f64,
    /// `∫ (‖A^{1/2}u‖² + 2d‖u‖²) ds` over the step, exact for the piecewise-exponential solution.
    pub dissipation: f64,
}

/// Advances one trajectory; owns the history buffer.
#[derive(Debug)]
pub struct Simulator<'m> {
    model: &'m Model,
    state: PhaseState,
    steps: usize,
}

impl<'m> Simulator<'m> {
    /// History stores `φ` on `[-r, 0)` and `u⁰` at `0`, so a jump between
    /// `φ(0-)` and `u⁰` is kept.
    pub fn new(model: &'m Model, u0: &SpectralField, phi: &dyn Fn(f64) -> SpectralField) -> Result<Self> {
        let m = model.cfg.modes;
        if u0.len() != m {
            return Err(Error::InvalidInput(format!(
                "initial field has {} modes, model has {m}",
                u0.len()
            )));
        }
        let dt = model.cfg.dt;
        let r = model.cfg.r;
        let n = model.cfg.history_steps();
        let mut psi = HistorySegment::with_capacity(r, n + 2);
        for i in (1..=n).rev() {
            let t = -(i as f64) * dt;
            let f = phi(t.max(-r));
            if f.len() != m {
                return Err(Error::InvalidInput(format!(
                    "history field has {} modes, model has {m}",
                    f.len()
                )));
            }
            psi.push(t, f)?;
        }
        psi.push(0.0, u0.clone())?;
        Ok(Self {
            model,
            state: PhaseState { v: u0.clone(), psi },
            steps: 0,
        })
    }

    /// Starts from an arbitrary phase state, resampled at the step resolution.
    pub fn from_state(model: &'m Model, state: &PhaseState) -> Result<Self> {
        let r = state.r();
        let phi = |t: f64| {
            state
                .psi
                .sample(t.clamp(-r, 0.0))
                .expect("phase state covers its window")
        };
        Self::new(model, &state.v, &phi)
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.model.cfg.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn current(&self) -> &SpectralField {
        &self.state.v
    }

    /// Snapshot of `(u(t), u_t)`.
    pub fn state(&self) -> PhaseState {
        self.state.clone()
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.time();
        let cfg = &self.model.cfg;
        let f = eval_f(&self.state, self.model)?;
        if !f.is_finite() {
            return Err(Error::Blowup {
                time: t,
                detail: "delay term is not finite".into(),
            });
        }
        let pairing = f.dot(&self.state.v);
        let dt = cfg.dt;
        let d = cfg.d;
        let mut next = Vec::with_capacity(cfg.modes);
        let mut dissipation = 0.0;
        for ((&a, &fk), &lam) in self
            .state
            .v
            .coeffs()
            .iter()
            .zip(f.coeffs())
            .zip(self.model.basis.lambda())
        {
            let mu = lam + d;
            let decay = (-mu * dt).exp();
            let one_minus = -(-mu * dt).exp_m1();
            let c = fk / mu;
            let g = a * decay + one_minus * c;
            next.push(g);
            // ∫₀^dt (c + (a - c) e^{-μs})² ds
            let amc = a - c;
            let sq = c * c * dt
                + 2.0 * c * amc * one_minus / mu
                + amc * amc * (-(-2.0 * mu * dt).exp_m1()) / (2.0 * mu);
            dissipation += (lam + 2.0 * d) * sq;
        }
        let next = SpectralField::new(next);
        let t_next = (self.steps + 1) as f64 * dt;
        if !next.is_finite() {
            return Err(Error::Blowup {
                time: t_next,
                detail: "solution coefficients are not finite".into(),
            });
        }
        self.state.psi.push(t_next, next.clone())?;
        self.state.v = next;
        self.steps += 1;
        Ok(StepRecord {
            t: t_next,
            pairing,
            dissipation,
        })
    }

    /// Steps until `time() ≥ t_end` (within a relative `1e-9` of `dt`).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.time() < t_end - 1e-9 * self.model.cfg.dt {
            self.step()?;
        }
        Ok(())
    }
}

/// Trajectory on a uniform time grid plus per-step diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub fields: Vec<SpectralField>,
    pub norm_l2: Vec<f64>,
    /// `‖A^{1/2}u(t)‖`
    pub norm_h1: Vec<f64>,
    /// Cumulative `∫₀^t (‖A^{1/2}u‖² + 2d‖u‖²)`, one entry per time.
    pub dissipation: Vec<f64>,
    /// `⟨F(u_t), u(t)⟩` at each step start; one fewer entry than `times`.
    pub pairing: Vec<f64>,
}

impl Trajectory {
    fn start(dt: f64, u0: &SpectralField, basis: &Basis) -> Self {
        Self {
            dt,
            times: vec![0.0],
            fields: vec![u0.clone()],
            norm_l2: vec![u0.norm()],
            norm_h1: vec![basis.fractional_norm(u0, 0.5)],
            dissipation: vec![0.0],
            pairing: Vec::new(),
        }
    }

    fn record(&mut self, rec: &StepRecord, u: &SpectralField, basis: &Basis) {
        let total = self.dissipation.last().copied().unwrap_or(0.0) + rec.dissipation;
        self.times.push(rec.t);
        self.fields.push(u.clone());
        self.norm_l2.push(u.norm());
        self.norm_h1.push(basis.fractional_norm(u, 0.5));
        self.dissipation.push(total);
        self.pairing.push(rec.pairing);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SpectralField {
        self.fields.last().expect("trajectories start with u0")
    }

    /// `‖u(t)‖² + ∫₀^t (‖A^{1/2}u‖² + 2d‖u‖²)` at every time.
    pub fn energy_functional(&self) -> Vec<f64> {
        self.norm_l2
            .iter()
            .zip(&self.dissipation)
            .map(|(n, d)| n * n + d)
            .collect()
    }

    /// `sup_t ‖u(t) - other(t)‖` over the common times.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.sub(b).norm())
            .fold(0.0, f64::max)
    }
}

fn steps_for(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) - 1e-9).ceil().max(0.0) as usize
}

/// Runs the scheme on `[0, T]` from `u(0) = u⁰`, `u|_{(-r,0)} = φ`.
pub fn simulate(
    model: &Model,
    u0: &SpectralField,
    phi: &dyn Fn(f64) -> SpectralField,
    t_end: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::config(format!("horizon must be positive (got {t_end})")));
    }
    let sim = Simulator::new(model, u0, phi)?;
    run_simulator(sim, t_end)
}

/// Runs the scheme from a full phase state.
pub fn simulate_from_state(model: &Model, state: &PhaseState, t_end: f64) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::config(format!("horizon must be positive (got {t_end})")));
    }
    run_simulator(Simulator::from_state(model, state)?, t_end)
}

fn run_simulator(sim: Simulator<'_>, t_end: f64) -> Result<Trajectory> {
    Ok(run_with_snapshots(sim, t_end, &[])?.0)
}

fn run_with_snapshots(
    mut sim: Simulator<'_>,
    t_end: f64,
    at: &[f64],
) -> Result<(Trajectory, Vec<PhaseState>)> {
    let model = sim.model;
    let dt = model.cfg.dt;
    let mut traj = Trajectory::start(dt, sim.current(), &model.basis);
    let wanted: Vec<usize> = at.iter().map(|&t| steps_for(t, dt)).collect();
    let mut snaps: Vec<Option<PhaseState>> = vec![None; at.len()];
    let take = |snaps: &mut Vec<Option<PhaseState>>, sim: &Simulator<'_>| {
        for (slot, &w) in snaps.iter_mut().zip(&wanted) {
            if w == sim.steps() {
                *slot = Some(sim.state());
            }
        }
    };
    take(&mut snaps, &sim);
    for _ in 0..steps_for(t_end, dt) {
        let rec = sim.step()?;
        traj.record(&rec, sim.current(), &model.basis);
        take(&mut snaps, &sim);
    }
    let snaps = snaps
        .into_iter()
        .zip(at)
        .map(|(s, t)| s.ok_or_else(|| Error::config(format!("snapshot time {t} is beyond the horizon"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((traj, snaps))
}

/// Like [`simulate_from_state`], also returning the phase states at the requested times.
pub fn simulate_with_snapshots(
    model: &Model,
    state: &PhaseState,
    t_end: f64,
    at: &[f64],
) -> Result<(Trajectory, Vec<PhaseState>)> {
    if !(t_end > 0.0) {
        return Err(Error::config(format!("horizon must be positive (got {t_end})")));
    }
    run_with_snapshots(Simulator::from_state(model, state)?, t_end, at)
}
