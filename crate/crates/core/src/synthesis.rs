//! Kernels with prescribed stationary solutions.
//!
//! For a target `u_st ≠ 0` the kernel is separable at the target state,
//! `ξ(θ, x, u_st, ū_st) = χ(θ)·v̂(x)`, with `v̂` chosen so that
//! `p(x)·v̂(x)·∫χ = (A + d) u_st(x)` where `p = ∫ b(u_st(y)) f(x - y) dy`.
//! Several targets are combined with compactly supported weights in the
//! phase-space distance, so each target sees only its own `χ·v̂`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    certify_on_samples, CertificateReport, CertifySettings, ChiFamily, DeclaredBounds, DelayKernel,
    StateSampler, TimeProfile,
};
use crate::model::{Nonlinearity, SpatialKernel};
use crate::phase_space::{h_distance_sampled, HistorySegment, PhaseState};
use crate::quadrature::ThetaQuadrature;
use crate::solver::{eval_f, Model, ModelConfig, Simulator};
use crate::spectral::{Basis, SpectralField};

/// Below this `p_min` synthesis is refused.
pub const P_MIN_THRESHOLD: f64 = 1e-12;

/// Target equilibrium and its time profile.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumSpec {
    pub u_st: SpectralField,
    pub chi: TimeProfile,
}

/// `p(x)` on the spatial nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PProfile {
    pub values: Vec<f64>,
    pub p_min: f64,
    /// Largest finite-difference slope between neighbouring nodes.
    pub p_prime_max: f64,
}

/// `p(x_q) = Σ_y w_y b(u_st(y)) f(x_q - y)` on the spatial nodes.
pub fn compute_p(
    u_st: &SpectralField,
    b: &Nonlinearity,
    f: &SpatialKernel,
    basis: &Basis,
) -> Result<PProfile> {
    let xs = basis.nodes();
    let ws = basis.weights();
    let bvals: Vec<f64> = basis.values_at_nodes(u_st).iter().map(|&w| b.eval(w)).collect();
    let values: Vec<f64> = xs
        .iter()
        .map(|&x| {
            xs.iter()
                .zip(ws)
                .zip(&bvals)
                .map(|((&y, &w), &bv)| w * bv * f.eval(x - y))
                .sum()
        })
        .collect();
    let p_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let p_prime_max = values
        .windows(2)
        .zip(xs.windows(2))
        .map(|(p, x)| ((p[1] - p[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    if !(p_min > P_MIN_THRESHOLD) {
        return Err(Error::DegenerateEquilibrium(format!(
            "p_min = {p_min:e} is not positive; the target cannot be made stationary"
        )));
    }
    Ok(PProfile {
        values,
        p_min,
        p_prime_max,
    })
}

/// `v̂` together with its norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VHat {
    pub field: SpectralField,
    pub norm_minus_half: f64,
    pub norm_zero: f64,
    /// `sup_θ |χ(θ)|·‖v̂‖_{-1/2}`
    pub ess_sup: f64,
}

fn vhat_with_norms(field: SpectralField, chi: &TimeProfile, basis: &Basis) -> VHat {
    let nm = basis.fractional_norm(&field, -0.5);
    VHat {
        norm_zero: field.norm(),
        ess_sup: chi.max_abs() * nm,
        norm_minus_half: nm,
        field,
    }
}

fn check_chi(chi: &TimeProfile) -> Result<()> {
    if chi.integral().abs() < crate::kernels::MIN_CHI_INTEGRAL {
        return Err(Error::config("time profile integral vanishes"));
    }
    Ok(())
}

fn check_p(p: &PProfile, basis: &Basis) -> Result<()> {
    if p.values.len() != basis.n_nodes() {
        return Err(Error::InvalidInput(
            "p must be sampled on the spatial nodes".into(),
        ));
    }
    if !(p.p_min > P_MIN_THRESHOLD) {
        return Err(Error::DegenerateEquilibrium(format!("p_min = {:e}", p.p_min)));
    }
    Ok(())
}

/// Solves for `v̂` in the `m`-mode span so that the projection of
/// `p·v̂·∫χ` equals `(A + d) u_st` exactly under the spatial quadrature.
///
/// With the `p`-weighted mass matrix `M_kl = Σ_q w_q p(x_q) e_k(x_q) e_l(x_q)`
/// this is `M c = (λ_k + d) u_k / ∫χ`. When `p` is constant it coincides with
/// dividing pointwise and projecting ([`synthesize_vhat_pointwise`]).
pub fn synthesize_vhat(
    u_st: &SpectralField,
    d: f64,
    p: &PProfile,
    chi: &TimeProfile,
    basis: &Basis,
) -> Result<VHat> {
    check_chi(chi)?;
    check_p(p, basis)?;
    let m = basis.modes();
    let q = basis.n_nodes();
    let weighted: Vec<f64> = p.values.iter().zip(basis.weights()).map(|(a, w)| a * w).collect();
    let mut mass = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let ek = basis.mode_at_nodes(k + 1);
        for l in k..m {
            let el = basis.mode_at_nodes(l + 1);
            let s: f64 = (0..q).map(|i| weighted[i] * ek[i] * el[i]).sum();
            mass[(k, l)] = s;
            mass[(l, k)] = s;
        }
    }
    let rhs = DVector::from_iterator(
        m,
        u_st.coeffs()
            .iter()
            .zip(basis.lambda())
            .map(|(u, l)| (l + d) * u / chi.integral()),
    );
    let chol = mass.cholesky().ok_or_else(|| {
        Error::DegenerateEquilibrium("weighted mass matrix is not positive definite".into())
    })?;
    let c = chol.solve(&rhs);
    let field = SpectralField::new(c.iter().copied().collect());
    if !field.is_finite() {
        return Err(Error::DegenerateEquilibrium("v-hat is not finite".into()));
    }
    Ok(vhat_with_norms(field, chi, basis))
}

/// `v̂(x_q) = (A u_st + d u_st)(x_q) / (p(x_q)·∫χ)` on the nodes, then projected.
pub fn synthesize_vhat_pointwise(
    u_st: &SpectralField,
    d: f64,
    p: &PProfile,
    chi: &TimeProfile,
    basis: &Basis,
) -> Result<VHat> {
    check_chi(chi)?;
    check_p(p, basis)?;
    let mut numer = basis.apply_a(u_st);
    numer.axpy(d, u_st);
    let vals = basis.values_at_nodes(&numer);
    let samples: Vec<f64> = vals
        .iter()
        .zip(&p.values)
        .map(|(n, pv)| n / (pv * chi.integral()))
        .collect();
    let field = basis.project(&samples)?;
    Ok(vhat_with_norms(field, chi, basis))
}

/// One synthesized target.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryTarget {
    pub u_st: SpectralField,
    pub chi: TimeProfile,
    pub vhat: VHat,
    pub p_min: f64,
}

/// Synthesizes `v̂` for one target under the model's `b`, `f`, `d`.
pub fn synthesize_target(
    spec: &EquilibriumSpec,
    cfg: &ModelConfig,
    basis: &Basis,
) -> Result<StationaryTarget> {
    if spec.u_st.len() != basis.modes() {
        return Err(Error::InvalidInput(format!(
            "target has {} modes, basis has {}",
            spec.u_st.len(),
            basis.modes()
        )));
    }
    if spec.u_st.is_zero() {
        // the zero state is kept stationary by ξ(·,·,0,0) = 0
        let zero = SpectralField::zeros(basis.modes());
        return Ok(StationaryTarget {
            u_st: zero.clone(),
            chi: spec.chi.clone(),
            vhat: vhat_with_norms(zero, &spec.chi, basis),
            p_min: 0.0,
        });
    }
    let p = compute_p(&spec.u_st, &cfg.nonlinearity, &cfg.spatial, basis)?;
    let vhat = synthesize_vhat(&spec.u_st, cfg.d, &p, &spec.chi, basis)?;
    Ok(StationaryTarget {
        u_st: spec.u_st.clone(),
        chi: spec.chi.clone(),
        vhat,
        p_min: p.p_min,
    })
}

/// `clamp(2(1 - dist/ρ), 0, 1)`: one on the inner half of the ball, zero outside it.
fn blend_weight(dist: f64, rho: f64) -> f64 {
    (2.0 * (1.0 - dist / rho)).clamp(0.0, 1.0)
}

/// Lipschitz constant of [`blend_weight`] in the distance.
fn blend_slope(rho: f64) -> f64 {
    2.0 / rho
}

/// Blended kernel `ξ = Σ_k w_k(state)·χ_k(θ)·v̂_k(x)` over disjoint balls of radius `ρ`.
#[derive(Clone, Debug)]
pub struct StationaryKernel {
    targets: Vec<StationaryTarget>,
    rho: f64,
    quad: ThetaQuadrature,
    declared: DeclaredBounds,
}

/// Pairwise H-distance between stationary states `(u, ū)`.
pub fn stationary_distance(a: &SpectralField, b: &SpectralField, quad: &ThetaQuadrature) -> f64 {
    (1.0 + quad.weights().iter().sum::<f64>()).sqrt() * a.sub(b).norm()
}

/// Combines synthesized targets; their `ρ`-balls must be disjoint.
pub fn build_stationary_kernel(
    targets: Vec<StationaryTarget>,
    rho: f64,
    quad: &ThetaQuadrature,
) -> Result<StationaryKernel> {
    if targets.is_empty() {
        return Err(Error::config("at least one target is required"));
    }
    if !(rho > 0.0) {
        return Err(Error::config(format!("blend radius must be positive, got {rho}")));
    }
    let m = targets[0].u_st.len();
    if targets.iter().any(|t| t.u_st.len() != m) {
        return Err(Error::InvalidInput("targets have different mode counts".into()));
    }
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            let sep = stationary_distance(&targets[i].u_st, &targets[j].u_st, quad);
            if sep <= 2.0 * rho {
                return Err(Error::config(format!(
                    "targets {i} and {j} are {sep:.6} apart; blend radius {rho} must stay below half of that"
                )));
            }
        }
    }
    let mh: Vec<f64> = targets
        .iter()
        .map(|t| t.chi.abs_integral() * t.vhat.norm_minus_half)
        .collect();
    let mut sorted = mh.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let two_largest = sorted.iter().take(2).sum::<f64>();
    let declared = DeclaredBounds {
        c_minus_half: Some(sorted[0]),
        c_zero: Some(
            targets
                .iter()
                .map(|t| t.chi.abs_integral() * t.vhat.norm_zero)
                .fold(0.0, f64::max),
        ),
        ess_sup: Some(targets.iter().map(|t| t.vhat.ess_sup).fold(0.0, f64::max)),
        lipschitz: Some(blend_slope(rho) * two_largest),
    };
    Ok(StationaryKernel {
        targets,
        rho,
        quad: quad.clone(),
        declared,
    })
}

impl StationaryKernel {
    pub fn targets(&self) -> &[StationaryTarget] {
        &self.targets
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_declared(mut self, overrides: &DeclaredBounds) -> Self {
        self.declared = self.declared.overridden_by(overrides);
        self
    }

    /// Blend weight of each target at `state`.
    pub fn weights(&self, state: &PhaseState) -> Vec<f64> {
        let hist = state.history_at(&self.quad);
        self.targets
            .iter()
            .map(|t| {
                if t.u_st.is_zero() && t.vhat.field.is_zero() {
                    return 0.0;
                }
                let bar: Vec<SpectralField> = vec![t.u_st.clone(); hist.len()];
                let dist = h_distance_sampled(&state.v, &hist, &t.u_st, &bar, &self.quad);
                blend_weight(dist, self.rho)
            })
            .collect()
    }

    fn blend(&self, weights: &[f64], chi: impl Fn(&StationaryTarget) -> f64) -> SpectralField {
        let mut out = SpectralField::zeros(self.modes());
        for (t, wk) in self.targets.iter().zip(weights) {
            if *wk != 0.0 {
                out.axpy(wk * chi(t), &t.vhat.field);
            }
        }
        out
    }

    /// Random states within `1.2ρ` of each target, concentrated near the ball boundary.
    pub fn near_target_states(&self, n_per_target: usize, seed: u64) -> Vec<PhaseState> {
        let m = self.targets[0].u_st.len();
        let sampler = StateSampler::new(m, &self.quad);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for t in &self.targets {
            for _ in 0..n_per_target {
                let dir = sampler.random_unit_state(&mut rng);
                let dist = self.rho * rng.random_range(0.0..1.2);
                out.push(offset_state(&t.u_st, &dir, dist));
            }
        }
        out
    }

    /// Pairs straddling the inner and outer edges of every ball.
    pub fn near_target_pairs(&self, n_per_target: usize, seed: u64) -> Vec<(PhaseState, PhaseState)> {
        let m = self.targets[0].u_st.len();
        let sampler = StateSampler::new(m, &self.quad);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for t in &self.targets {
            for _ in 0..n_per_target {
                let dir = sampler.random_unit_state(&mut rng);
                let a = self.rho * rng.random_range(0.3..1.1);
                let b = a + self.rho * rng.random_range(-0.2..0.2);
                out.push((
                    offset_state(&t.u_st, &dir, a),
                    offset_state(&t.u_st, &dir, b.max(0.0)),
                ));
            }
        }
        out
    }
}

fn offset_state(center: &SpectralField, dir: &PhaseState, dist: f64) -> PhaseState {
    let mut v = center.clone();
    v.axpy(dist, &dir.v);
    let entries = dir
        .psi
        .entries()
        .map(|(t, u)| {
            let mut x = center.clone();
            x.axpy(dist, u);
            (*t, x)
        })
        .collect();
    PhaseState {
        v,
        psi: HistorySegment::from_entries(dir.r(), entries).expect("same times"),
    }
}

impl DelayKernel for StationaryKernel {
    fn family(&self) -> &'static str {
        "synthesized"
    }
    fn r(&self) -> f64 {
        self.quad.r()
    }
    fn modes(&self) -> usize {
        self.targets[0].u_st.len()
    }
    fn eval(&self, theta: f64, state: &PhaseState) -> Result<SpectralField> {
        let w = self.weights(state);
        Ok(self.blend(&w, |t| t.chi.eval(theta)))
    }
    fn eval_at(&self, thetas: &[f64], state: &PhaseState) -> Result<Vec<SpectralField>> {
        let w = self.weights(state);
        Ok(thetas
            .iter()
            .map(|&th| self.blend(&w, |t| t.chi.eval(th)))
            .collect())
    }
    fn eval_nodes(&self, quad: &ThetaQuadrature, state: &PhaseState) -> Result<Vec<SpectralField>> {
        if quad != &self.quad {
            return self.eval_at(quad.nodes(), state);
        }
        let w = self.weights(state);
        Ok((0..quad.len())
            .map(|j| self.blend(&w, |t| t.chi.values()[j]))
            .collect())
    }
    fn declared_bounds(&self) -> DeclaredBounds {
        self.declared.clone()
    }
}

/// Certification of a blended kernel: random states plus states near every target.
pub fn certify_stationary_kernel(
    k: &StationaryKernel,
    basis: &Basis,
    quad: &ThetaQuadrature,
    settings: &CertifySettings,
) -> Result<CertificateReport> {
    let sampler = StateSampler::new(k.modes(), quad);
    let mut states = sampler.sample_states(settings.n_states, settings.radius, settings.seed);
    let per = (settings.n_states / k.targets.len()).max(10);
    states.extend(k.near_target_states(per, settings.seed.wrapping_add(7)));
    for t in &k.targets {
        states.push(PhaseState::stationary(&t.u_st, quad));
    }
    let mut pairs = sampler.sample_pairs(settings.n_pairs, settings.radius, settings.seed.wrapping_add(1));
    let per = (settings.n_pairs / k.targets.len()).max(10);
    pairs.extend(k.near_target_pairs(per, settings.seed.wrapping_add(2)));
    let mut rep = certify_on_samples(k, basis, quad, &states, &pairs, settings)?;
    rep.p_min = k
        .targets
        .iter()
        .filter(|t| !t.u_st.is_zero())
        .map(|t| t.p_min)
        .reduce(f64::min);
    Ok(rep)
}

/// Result of [`verify_stationary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    /// `‖(A + d) u_st - F(u_st, ū_st)‖_{-1/2}`
    pub residual: f64,
    pub relative_residual: f64,
    /// `sup_{t ≤ T} ‖u(t) - u_st‖` starting from `(u_st, ū_st)`.
    pub max_drift: f64,
    pub drift_times: Vec<f64>,
    pub drift: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Checks that `u_st` is a stationary solution of the model (with its kernel).
pub fn verify_stationary(
    model: &Model,
    u_st: &SpectralField,
    t_end: f64,
    tol: f64,
) -> Result<StationaryReport> {
    let basis = model.basis();
    let quad = model.theta_quadrature();
    let state = PhaseState::stationary(u_st, quad);
    let f = eval_f(&state, model)?;
    let mut lhs = basis.apply_a(u_st);
    lhs.axpy(model.config().d, u_st);
    let residual = basis.fractional_norm(&lhs.sub(&f), -0.5);
    let scale = basis.fractional_norm(&lhs, -0.5);
    let relative_residual = if scale > 0.0 { residual / scale } else { residual };

    let mut sim = Simulator::new(model, u_st, &|_| u_st.clone())?;
    let mut drift_times = vec![0.0];
    let mut drift = vec![0.0];
    let mut max_drift: f64 = 0.0;
    while sim.time() < t_end - 1e-9 * model.config().dt {
        sim.step()?;
        let dv = sim.current().sub(u_st).norm();
        max_drift = max_drift.max(dv);
        drift_times.push(sim.time());
        drift.push(dv);
    }
    Ok(StationaryReport {
        residual,
        relative_residual,
        max_drift,
        drift_times,
        drift,
        tol,
        pass: relative_residual < 1e-8 && max_drift < tol,
    })
}

/// Serialized blended kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelArtifact {
    pub length: f64,
    pub modes: usize,
    pub r: f64,
    pub d: f64,
    pub theta_nodes: usize,
    pub rho: f64,
    pub targets: Vec<TargetArtifact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetArtifact {
    pub u_st: Vec<f64>,
    pub vhat: Vec<f64>,
    pub chi: ChiFamily,
    pub chi_integral: f64,
    pub p_min: f64,
    pub vhat_norm_minus_half: f64,
    pub vhat_norm_zero: f64,
    pub vhat_ess_sup: f64,
}

impl KernelArtifact {
    pub fn from_kernel(k: &StationaryKernel, cfg: &ModelConfig) -> Self {
        Self {
            length: cfg.length,
            modes: cfg.modes,
            r: cfg.r,
            d: cfg.d,
            theta_nodes: cfg.theta_nodes,
            rho: k.rho,
            targets: k
                .targets
                .iter()
                .map(|t| TargetArtifact {
                    u_st: t.u_st.coeffs().to_vec(),
                    vhat: t.vhat.field.coeffs().to_vec(),
                    chi: t.chi.family().clone(),
                    chi_integral: t.chi.integral(),
                    p_min: t.p_min,
                    vhat_norm_minus_half: t.vhat.norm_minus_half,
                    vhat_norm_zero: t.vhat.norm_zero,
                    vhat_ess_sup: t.vhat.ess_sup,
                })
                .collect(),
            certificate: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Rebuilds the kernel on a basis/quadrature matching the artifact.
    pub fn build_kernel(&self, basis: &Basis, quad: &ThetaQuadrature) -> Result<StationaryKernel> {
        if basis.modes() != self.modes || (quad.r() - self.r).abs() > 1e-12 * self.r {
            return Err(Error::config(format!(
                "kernel artifact is for m = {}, r = {}; model has m = {}, r = {}",
                self.modes,
                self.r,
                basis.modes(),
                quad.r()
            )));
        }
        let targets = self
            .targets
            .iter()
            .map(|t| {
                let chi = TimeProfile::new(t.chi.clone(), quad)?;
                let field = SpectralField::new(t.vhat.clone());
                Ok(StationaryTarget {
                    u_st: SpectralField::new(t.u_st.clone()),
                    vhat: vhat_with_norms(field, &chi, basis),
                    chi,
                    p_min: t.p_min,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        build_stationary_kernel(targets, self.rho, quad)
    }
}

/// Synthesizes every target and blends them into one kernel and model.
pub fn synthesize_model(
    cfg: &ModelConfig,
    targets: &[SpectralField],
    chi: &ChiFamily,
    rho: f64,
) -> Result<(Model, StationaryKernel)> {
    cfg.validate()?;
    let basis = cfg.basis()?;
    let quad = cfg.theta_quadrature()?;
    let chi = TimeProfile::new(chi.clone(), &quad)?;
    let synthesized = targets
        .iter()
        .map(|u| {
            synthesize_target(
                &EquilibriumSpec {
                    u_st: u.clone(),
                    chi: chi.clone(),
                },
                cfg,
                &basis,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let kernel = build_stationary_kernel(synthesized, rho, &quad)?;
    let model = Model::new(cfg.clone(), Arc::new(kernel.clone()))?;
    Ok((model, kernel))
}
