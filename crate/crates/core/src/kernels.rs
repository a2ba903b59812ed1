//! State-dependent delay kernels `ξ(θ, x, v, ψ)` and their numeric certification.
//!
//! A kernel maps a delay offset `θ ∈ [-r, 0]` and a phase state to the
//! x-profile of `ξ`, expressed in the eigenbasis. Certification samples states
//! and reports measured constants; for sup-type quantities these are lower
//! bounds of the true constants, and the contract checked is
//! `measured ≤ declared`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{HistorySegment, PhaseState};
use crate::quadrature::ThetaQuadrature;
use crate::spectral::{Basis, SpectralField};

/// Relative slack for `measured ≤ declared`, covering floating-point roundoff only.
pub const CERT_RTOL: f64 = 1e-9;

/// Smallest admissible `|∫χ|`.
pub const MIN_CHI_INTEGRAL: f64 = 1e-12;

// ∫_{-1}^{1} exp(-1/(1-s²)) ds
const UNIT_BUMP_MASS: f64 = 0.443_993_816_168_079_4;

/// `exp(-1/(1-s²))` on `|s| < 1`, zero outside.
pub fn unit_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

fn unit_bump_derivative(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - s * s;
        -2.0 * s / (q * q) * (-1.0 / q).exp()
    }
}

/// Shape of the time profile `χ(θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChiFamily {
    Constant {
        value: f64,
    },
    /// Smooth compactly supported bump with peak `height` at `center`.
    Bump {
        center: f64,
        half_width: f64,
        height: f64,
    },
    Gaussian {
        center: f64,
        sigma: f64,
        height: f64,
    },
    /// `intercept + slope·θ`; may change sign.
    Linear {
        intercept: f64,
        slope: f64,
    },
}

impl ChiFamily {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            ChiFamily::Constant { value } => value,
            ChiFamily::Bump {
                center,
                half_width,
                height,
            } => height * 1f64.exp() * unit_bump((theta - center) / half_width),
            ChiFamily::Gaussian {
                center,
                sigma,
                height,
            } => {
                let z = (theta - center) / sigma;
                height * (-0.5 * z * z).exp()
            }
            ChiFamily::Linear { intercept, slope } => intercept + slope * theta,
        }
    }

    /// `sup_{θ∈[-r,0]} |χ(θ)|`
    pub fn max_abs(&self, r: f64) -> f64 {
        match *self {
            ChiFamily::Constant { value } => value.abs(),
            ChiFamily::Bump { height, .. } | ChiFamily::Gaussian { height, .. } => height.abs(),
            ChiFamily::Linear { intercept, slope } => intercept.abs().max((intercept - slope * r).abs()),
        }
    }
}

/// `χ` discretized on the delay quadrature, with `∫χ` and `∫|χ|`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeProfile {
    family: ChiFamily,
    r: f64,
    values: Vec<f64>,
    integral: f64,
    abs_integral: f64,
}

impl TimeProfile {
    /// Rejects profiles whose integral vanishes.
    pub fn new(family: ChiFamily, quad: &ThetaQuadrature) -> Result<Self> {
        let values: Vec<f64> = quad.nodes().iter().map(|&t| family.eval(t)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("time profile is not finite on the delay window"));
        }
        let integral: f64 = values.iter().zip(quad.weights()).map(|(v, w)| v * w).sum();
        let abs_integral: f64 = values.iter().zip(quad.weights()).map(|(v, w)| v.abs() * w).sum();
        if integral.abs() < MIN_CHI_INTEGRAL {
            return Err(Error::config(format!(
                "time profile must have a nonzero integral over [-r, 0] (got {integral:e})"
            )));
        }
        Ok(Self {
            family,
            r: quad.r(),
            values,
            integral,
            abs_integral,
        })
    }

    pub fn family(&self) -> &ChiFamily {
        &self.family
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.family.eval(theta)
    }

    /// Values at the quadrature nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫χ` under the delay quadrature.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn abs_integral(&self) -> f64 {
        self.abs_integral
    }

    pub fn max_abs(&self) -> f64 {
        self.family.max_abs(self.r)
    }

    /// Same profile multiplied by `s`.
    pub fn scaled(&self, s: f64, quad: &ThetaQuadrature) -> Result<Self> {
        let family = match self.family.clone() {
            ChiFamily::Constant { value } => ChiFamily::Constant { value: value * s },
            ChiFamily::Bump {
                center,
                half_width,
                height,
            } => ChiFamily::Bump {
                center,
                half_width,
                height: height * s,
            },
            ChiFamily::Gaussian {
                center,
                sigma,
                height,
            } => ChiFamily::Gaussian {
                center,
                sigma,
                height: height * s,
            },
            ChiFamily::Linear { intercept, slope } => ChiFamily::Linear {
                intercept: intercept * s,
                slope: slope * s,
            },
        };
        TimeProfile::new(family, quad)
    }
}

/// Spatial profile of a kernel, before projection onto the basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// The constant function `value` on `(0, L)`; in `D(A^{-1/2})` but with
    /// infinitely many modes.
    Constant { value: f64 },
    /// Explicit sine coefficients.
    Modes { coeffs: Vec<f64> },
}

impl ProfileSpec {
    pub fn resolve(&self, basis: &Basis) -> SpectralField {
        match self {
            ProfileSpec::Constant { value } => {
                let l = basis.length();
                let coeffs = (1..=basis.modes())
                    .map(|k| {
                        if k % 2 == 1 {
                            value * 2.0 * (2.0 * l).sqrt() / (k as f64 * PI)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                SpectralField::new(coeffs)
            }
            ProfileSpec::Modes { coeffs } => SpectralField::new(coeffs.clone()).resized(basis.modes()),
        }
    }

    /// Norm of the untruncated profile; an upper bound for every truncation.
    pub fn full_norm(&self, s: f64, length: f64) -> f64 {
        match self {
            ProfileSpec::Constant { value } => {
                if s == 0.0 {
                    value.abs() * length.sqrt()
                } else if s == -0.5 {
                    value.abs() * (length.powi(3) / 12.0).sqrt()
                } else {
                    // generic s: sum the series far enough out
                    let m = 200_000;
                    (1..=m)
                        .step_by(2)
                        .map(|k| {
                            let c = value * 2.0 * (2.0 * length).sqrt() / (k as f64 * PI);
                            let lam = (k as f64 * PI / length).powi(2);
                            lam.powf(2.0 * s) * c * c
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
            ProfileSpec::Modes { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| ((k + 1) as f64 * PI / length).powi(2).powf(2.0 * s) * c * c)
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Constants a kernel author asserts; certification checks measured values against them.
/// `lipschitz` is a global constant, valid for every ball radius `M`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredBounds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_minus_half: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess_sup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl DeclaredBounds {
    /// Fields set in `overrides` replace those in `self`.
    pub fn overridden_by(&self, overrides: &DeclaredBounds) -> DeclaredBounds {
        DeclaredBounds {
            c_minus_half: overrides.c_minus_half.or(self.c_minus_half),
            c_zero: overrides.c_zero.or(self.c_zero),
            ess_sup: overrides.ess_sup.or(self.ess_sup),
            lipschitz: overrides.lipschitz.or(self.lipschitz),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.c_minus_half.is_none()
            && self.c_zero.is_none()
            && self.ess_sup.is_none()
            && self.lipschitz.is_none()
    }
}

/// The delay kernel `ξ`. Evaluation must be deterministic.
pub trait DelayKernel: Send + Sync + fmt::Debug {
    fn family(&self) -> &'static str;

    /// Delay horizon `r`.
    fn r(&self) -> f64;

    /// Number of modes of the returned fields.
    fn modes(&self) -> usize;

    /// x-profile of `ξ(θ, ·, v, ψ)`.
    fn eval(&self, theta: f64, state: &PhaseState) -> Result<SpectralField>;

    /// Profiles at several delays. Kernels whose state dependence is
    /// expensive override this to compute it once.
    fn eval_at(&self, thetas: &[f64], state: &PhaseState) -> Result<Vec<SpectralField>> {
        thetas.iter().map(|&t| self.eval(t, state)).collect()
    }

    /// Profiles at every node of `quad`.
    fn eval_nodes(&self, quad: &ThetaQuadrature, state: &PhaseState) -> Result<Vec<SpectralField>> {
        self.eval_at(quad.nodes(), state)
    }

    fn declared_bounds(&self) -> DeclaredBounds {
        DeclaredBounds::default()
    }

    fn is_state_independent(&self) -> bool {
        false
    }
}

/// `ξ ≡ 0`.
#[derive(Clone, Debug)]
pub struct ZeroKernel {
    r: f64,
    m: usize,
}

impl ZeroKernel {
    pub fn new(r: f64, m: usize) -> Self {
        Self { r, m }
    }
}

impl DelayKernel for ZeroKernel {
    fn family(&self) -> &'static str {
        "zero"
    }
    fn r(&self) -> f64 {
        self.r
    }
    fn modes(&self) -> usize {
        self.m
    }
    fn eval(&self, _theta: f64, _state: &PhaseState) -> Result<SpectralField> {
        Ok(SpectralField::zeros(self.m))
    }
    fn declared_bounds(&self) -> DeclaredBounds {
        DeclaredBounds {
            c_minus_half: Some(0.0),
            c_zero: Some(0.0),
            ess_sup: Some(0.0),
            lipschitz: Some(0.0),
        }
    }
    fn is_state_independent(&self) -> bool {
        true
    }
}

/// Separable, state-independent kernel `ξ(θ, x) = χ(θ)·w(x)`.
#[derive(Clone, Debug)]
pub struct ConstantInState {
    profile: SpectralField,
    chi: TimeProfile,
    declared: DeclaredBounds,
}

impl ConstantInState {
    /// Declared bounds use the truncated profile's own norms.
    pub fn new(profile: SpectralField, chi: TimeProfile, basis: &Basis) -> Self {
        let mh = basis.fractional_norm(&profile, -0.5);
        let l2 = profile.norm();
        Self::with_profile_norms(profile, chi, mh, l2)
    }

    /// Builds from a profile description; declared bounds use the untruncated profile.
    pub fn from_spec(profile: &ProfileSpec, chi: TimeProfile, basis: &Basis) -> Self {
        let field = profile.resolve(basis);
        let mh = profile.full_norm(-0.5, basis.length());
        let l2 = profile.full_norm(0.0, basis.length());
        Self::with_profile_norms(field, chi, mh, l2)
    }

    fn with_profile_norms(profile: SpectralField, chi: TimeProfile, mh: f64, l2: f64) -> Self {
        let declared = DeclaredBounds {
            c_minus_half: Some(chi.abs_integral() * mh),
            c_zero: Some(chi.abs_integral() * l2),
            ess_sup: Some(chi.max_abs() * mh),
            lipschitz: Some(0.0),
        };
        Self {
            profile,
            chi,
            declared,
        }
    }

    pub fn with_declared(mut self, overrides: &DeclaredBounds) -> Self {
        self.declared = self.declared.overridden_by(overrides);
        self
    }

    pub fn profile(&self) -> &SpectralField {
        &self.profile
    }

    pub fn chi(&self) -> &TimeProfile {
        &self.chi
    }
}

impl DelayKernel for ConstantInState {
    fn family(&self) -> &'static str {
        "constant_in_state"
    }
    fn r(&self) -> f64 {
        self.chi.r
    }
    fn modes(&self) -> usize {
        self.profile.len()
    }
    fn eval(&self, theta: f64, _state: &PhaseState) -> Result<SpectralField> {
        Ok(self.profile.scaled(self.chi.eval(theta)))
    }
    fn eval_nodes(&self, quad: &ThetaQuadrature, _state: &PhaseState) -> Result<Vec<SpectralField>> {
        if quad.len() == self.chi.values.len() && quad.r() == self.chi.r {
            Ok(self.chi.values.iter().map(|&c| self.profile.scaled(c)).collect())
        } else {
            quad.nodes()
                .iter()
                .map(|&t| Ok(self.profile.scaled(self.chi.eval(t))))
                .collect()
        }
    }
    fn declared_bounds(&self) -> DeclaredBounds {
        self.declared.clone()
    }
    fn is_state_independent(&self) -> bool {
        true
    }
}

/// Delay selected by the state: `τ(‖v‖)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tau", rename_all = "snake_case")]
pub enum TauMap {
    Constant {
        value: f64,
    },
    /// `lo + (hi - lo)·(1 - e^{-s/scale})`
    Saturating {
        lo: f64,
        hi: f64,
        scale: f64,
    },
}

impl TauMap {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            TauMap::Constant { value } => value,
            TauMap::Saturating { lo, hi, scale } => lo + (hi - lo) * (-(s / scale)).exp_m1().abs(),
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match *self {
            TauMap::Constant { value } => (value, value),
            TauMap::Saturating { lo, hi, .. } => (lo.min(hi), lo.max(hi)),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            TauMap::Constant { .. } => 0.0,
            TauMap::Saturating { lo, hi, scale } => (hi - lo).abs() / scale,
        }
    }
}

/// `ξ(θ, x, v, ψ) = bump_σ(θ + τ(‖v‖))·w(x)`: a unit-mass smooth bump
/// centred at the state-selected delay `-τ(‖v‖)`.
#[derive(Clone, Debug)]
pub struct DelaySelective {
    r: f64,
    tau: TauMap,
    sigma: f64,
    profile: SpectralField,
    declared: DeclaredBounds,
}

impl DelaySelective {
    /// The bump support `[-τ-σ, -τ+σ]` must stay inside `[-r, 0]` for every
    /// reachable `τ`.
    pub fn new(
        tau: TauMap,
        sigma: f64,
        profile: &ProfileSpec,
        basis: &Basis,
        quad: &ThetaQuadrature,
    ) -> Result<Self> {
        let r = quad.r();
        if !(sigma > 0.0) {
            return Err(Error::config(format!("bump width must be positive, got {sigma}")));
        }
        if let TauMap::Saturating { scale, .. } = tau {
            if !(scale > 0.0) {
                return Err(Error::config("tau scale must be positive"));
            }
        }
        let (lo, hi) = tau.range();
        if lo < 0.0 || hi > r {
            return Err(Error::config(format!(
                "delay map range [{lo}, {hi}] leaves [0, {r}]"
            )));
        }
        if lo - sigma < -1e-12 * r || hi + sigma > r * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "bump of width {sigma} around delays [{lo}, {hi}] does not fit in [0, {r}]"
            )));
        }
        let field = profile.resolve(basis);
        let mh = profile.full_norm(-0.5, basis.length());
        let l2 = profile.full_norm(0.0, basis.length());

        let mut k = Self {
            r,
            tau,
            sigma,
            profile: field,
            declared: DeclaredBounds::default(),
        };
        let mass = k.max_discrete_mass(quad);
        let peak = k.bump(0.0);
        let slope = k.max_bump_slope();
        k.declared = DeclaredBounds {
            c_minus_half: Some(mass * mh),
            c_zero: Some(mass * l2),
            ess_sup: Some(peak * mh),
            lipschitz: Some(r * slope * k.tau.lipschitz() * mh),
        };
        Ok(k)
    }

    pub fn with_declared(mut self, overrides: &DeclaredBounds) -> Self {
        self.declared = self.declared.overridden_by(overrides);
        self
    }

    /// Unit-mass bump of half-width `σ`.
    pub fn bump(&self, s: f64) -> f64 {
        unit_bump(s / self.sigma) / (self.sigma * UNIT_BUMP_MASS)
    }

    pub fn delay(&self, state: &PhaseState) -> f64 {
        self.tau.eval(state.v.norm())
    }

    fn max_bump_slope(&self) -> f64 {
        let n = 100_000;
        let m = (0..=n)
            .map(|i| -1.0 + 2.0 * i as f64 / n as f64)
            .map(|s| unit_bump_derivative(s).abs())
            .fold(0.0, f64::max);
        // grid maximum plus a margin for the gap between grid points
        1.001 * m / (self.sigma * self.sigma * UNIT_BUMP_MASS)
    }

    /// Upper bound of `Σ_j w_j·bump(θ_j + τ)` over every reachable `τ`.
    fn max_discrete_mass(&self, quad: &ThetaQuadrature) -> f64 {
        let sum = |tau: f64| quad.integrate(|th| self.bump(th + tau));
        let (lo, hi) = self.tau.range();
        if hi == lo {
            return sum(lo);
        }
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let best = (0..=n).map(|i| sum(lo + step * i as f64)).fold(0.0, f64::max);
        best + 0.5 * step * self.r * self.max_bump_slope()
    }
}

impl DelayKernel for DelaySelective {
    fn family(&self) -> &'static str {
        "delay_selective"
    }
    fn r(&self) -> f64 {
        self.r
    }
    fn modes(&self) -> usize {
        self.profile.len()
    }
    fn eval(&self, theta: f64, state: &PhaseState) -> Result<SpectralField> {
        let tau = self.delay(state);
        Ok(self.profile.scaled(self.bump(theta + tau)))
    }
    fn eval_nodes(&self, quad: &ThetaQuadrature, state: &PhaseState) -> Result<Vec<SpectralField>> {
        let tau = self.delay(state);
        Ok(quad
            .nodes()
            .iter()
            .map(|&t| self.profile.scaled(self.bump(t + tau)))
            .collect())
    }
    fn declared_bounds(&self) -> DeclaredBounds {
        self.declared.clone()
    }
    fn is_state_independent(&self) -> bool {
        matches!(self.tau, TauMap::Constant { .. })
    }
}

/// Serializable description of a built-in kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Zero,
    ConstantInState {
        profile: ProfileSpec,
        chi: ChiFamily,
        #[serde(default)]
        declared: DeclaredBounds,
    },
    DelaySelective {
        tau: TauMap,
        sigma: f64,
        profile: ProfileSpec,
        #[serde(default)]
        declared: DeclaredBounds,
    },
    /// Kernel synthesized from target equilibria, stored as a JSON artifact.
    Synthesized {
        artifact: String,
        #[serde(default)]
        declared: DeclaredBounds,
    },
}

impl KernelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Zero => "zero",
            KernelSpec::ConstantInState { .. } => "constant_in_state",
            KernelSpec::DelaySelective { .. } => "delay_selective",
            KernelSpec::Synthesized { .. } => "synthesized",
        }
    }

    pub fn build(&self, basis: &Basis, quad: &ThetaQuadrature) -> Result<Arc<dyn DelayKernel>> {
        Ok(match self {
            KernelSpec::Zero => Arc::new(ZeroKernel::new(quad.r(), basis.modes())),
            KernelSpec::ConstantInState {
                profile,
                chi,
                declared,
            } => {
                let chi = TimeProfile::new(chi.clone(), quad)?;
                Arc::new(ConstantInState::from_spec(profile, chi, basis).with_declared(declared))
            }
            KernelSpec::DelaySelective {
                tau,
                sigma,
                profile,
                declared,
            } => Arc::new(
                DelaySelective::new(tau.clone(), *sigma, profile, basis, quad)?.with_declared(declared),
            ),
            KernelSpec::Synthesized { artifact, declared } => {
                let art = crate::synthesis::KernelArtifact::load(artifact)?;
                Arc::new(art.build_kernel(basis, quad)?.with_declared(declared))
            }
        })
    }
}

/// Draws random phase states with histories sampled on the delay quadrature nodes.
#[derive(Clone, Debug)]
pub struct StateSampler {
    m: usize,
    quad: ThetaQuadrature,
}

impl StateSampler {
    pub fn new(m: usize, quad: &ThetaQuadrature) -> Self {
        Self {
            m,
            quad: quad.clone(),
        }
    }

    /// Random field with coefficients `N(0,1)/k`.
    pub fn random_field<R: Rng>(&self, rng: &mut R) -> SpectralField {
        SpectralField::new(
            (1..=self.m)
                .map(|k| rng.sample::<f64, _>(StandardNormal) / k as f64)
                .collect(),
        )
    }

    /// Random direction with unit H-norm.
    pub fn random_unit_state<R: Rng>(&self, rng: &mut R) -> PhaseState {
        let v = self.random_field(rng);
        let z1 = self.random_field(rng);
        let z2 = self.random_field(rng);
        let a1: f64 = rng.random_range(-1.0..1.0);
        let a2: f64 = rng.random_range(-1.0..1.0);
        let freq: f64 = rng.random_range(0.5..3.0);
        let r = self.quad.r();
        let psi = HistorySegment::sampled(r, self.quad.nodes(), |th| {
            if th == 0.0 {
                return v.clone();
            }
            let mut u = v.clone();
            u.axpy(a1 * th / r, &z1);
            u.axpy(a2 * (2.0 * PI * freq * th / r).sin(), &z2);
            u
        })
        .expect("quadrature nodes are increasing");
        let s = PhaseState { v, psi };
        let n = s.h_norm(&self.quad);
        scale_state(&s, 1.0 / n)
    }

    /// Random state with H-norm uniform in `[0, radius]`.
    pub fn random_state<R: Rng>(&self, rng: &mut R, radius: f64) -> PhaseState {
        let unit = self.random_unit_state(rng);
        let rho: f64 = rng.random_range(0.0..=1.0);
        scale_state(&unit, rho * radius)
    }

    pub fn sample_states(&self, n: usize, radius: f64, seed: u64) -> Vec<PhaseState> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.random_state(&mut rng, radius)).collect()
    }

    /// Pairs inside the ball of radius `radius`: independent draws, pairs
    /// differing only by a radial change of `v`, and small perturbations.
    pub fn sample_pairs(&self, n: usize, radius: f64, seed: u64) -> Vec<(PhaseState, PhaseState)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let s1 = self.random_state(&mut rng, radius);
                let s2 = match i % 3 {
                    0 => self.random_state(&mut rng, radius),
                    1 => {
                        let f: f64 = rng.random_range(0.5..1.5);
                        let mut s = s1.clone();
                        s.v = s.v.scaled(f);
                        rescale_into_ball(s, radius, &self.quad)
                    }
                    _ => {
                        let eps: f64 = 10f64.powf(rng.random_range(-4.0..-1.0)) * radius;
                        let d = self.random_unit_state(&mut rng);
                        rescale_into_ball(add_states(&s1, &d, eps), radius, &self.quad)
                    }
                };
                (s1, s2)
            })
            .collect()
    }
}

fn scale_state(s: &PhaseState, a: f64) -> PhaseState {
    let entries = s.psi.entries().map(|(t, u)| (*t, u.scaled(a))).collect();
    PhaseState {
        v: s.v.scaled(a),
        psi: HistorySegment::from_entries(s.r(), entries).expect("same times"),
    }
}

fn add_states(a: &PhaseState, b: &PhaseState, eps: f64) -> PhaseState {
    let entries = a
        .psi
        .entries()
        .zip(b.psi.entries())
        .map(|((t, u), (_, w))| {
            let mut x = u.clone();
            x.axpy(eps, w);
            (*t, x)
        })
        .collect();
    let mut v = a.v.clone();
    v.axpy(eps, &b.v);
    PhaseState {
        v,
        psi: HistorySegment::from_entries(a.r(), entries).expect("same times"),
    }
}

fn rescale_into_ball(s: PhaseState, radius: f64, quad: &ThetaQuadrature) -> PhaseState {
    let n = s.h_norm(quad);
    if n > radius {
        scale_state(&s, radius / n)
    } else {
        s
    }
}

fn integrated_norm(
    k: &dyn DelayKernel,
    basis: &Basis,
    state: &PhaseState,
    quad: &ThetaQuadrature,
    s: f64,
) -> Result<f64> {
    Ok(k.eval_nodes(quad, state)?
        .iter()
        .zip(quad.weights())
        .map(|(xi, w)| w * basis.fractional_norm(xi, s))
        .sum())
}

/// `max_states Σ_j w_j ‖ξ(θ_j, ·, state)‖_{-1/2}`
pub fn certify_bound_minus_half(
    k: &dyn DelayKernel,
    basis: &Basis,
    states: &[PhaseState],
    quad: &ThetaQuadrature,
) -> Result<f64> {
    certify_integrated(k, basis, states, quad, -0.5)
}

/// `max_states Σ_j w_j ‖ξ(θ_j, ·, state)‖`
pub fn certify_bound_zero(
    k: &dyn DelayKernel,
    basis: &Basis,
    states: &[PhaseState],
    quad: &ThetaQuadrature,
) -> Result<f64> {
    certify_integrated(k, basis, states, quad, 0.0)
}

fn certify_integrated(
    k: &dyn DelayKernel,
    basis: &Basis,
    states: &[PhaseState],
    quad: &ThetaQuadrature,
    s: f64,
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidInput(
            "certification needs at least one state".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for st in states {
        best = best.max(integrated_norm(k, basis, st, quad, s)?);
    }
    Ok(best)
}

/// `max_{states, θ ∈ grid} ‖ξ(θ, ·, state)‖_{-1/2}`
pub fn certify_ess_sup(
    k: &dyn DelayKernel,
    basis: &Basis,
    states: &[PhaseState],
    theta_grid: &[f64],
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidInput(
            "certification needs at least one state".into(),
        ));
    }
    let mut best: f64 = 0.0;
    for st in states {
        for xi in k.eval_at(theta_grid, st)? {
            best = best.max(basis.fractional_norm(&xi, -0.5));
        }
    }
    Ok(best)
}

/// Largest sampled ratio
/// `Σ_j w_j ‖ξ(θ_j,·,s¹) - ξ(θ_j,·,s²)‖_{-1/2} / dist_H(s¹, s²)` over pairs in the
/// ball of radius `radius`. Pairs closer than `1e-12` are skipped.
pub fn estimate_lipschitz(
    k: &dyn DelayKernel,
    basis: &Basis,
    quad: &ThetaQuadrature,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::config(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    let sampler = StateSampler::new(k.modes(), quad);
    let pairs = sampler.sample_pairs(n_pairs, radius, seed);
    lipschitz_over_pairs(k, basis, quad, &pairs)
}

pub fn lipschitz_over_pairs(
    k: &dyn DelayKernel,
    basis: &Basis,
    quad: &ThetaQuadrature,
    pairs: &[(PhaseState, PhaseState)],
) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (a, b) in pairs {
        let dist = a.h_distance(b, quad);
        if dist < 1e-12 {
            continue;
        }
        let xa = k.eval_nodes(quad, a)?;
        let xb = k.eval_nodes(quad, b)?;
        let num: f64 = xa
            .iter()
            .zip(&xb)
            .zip(quad.weights())
            .map(|((p, q), w)| w * basis.fractional_norm(&p.sub(q), -0.5))
            .sum();
        best = best.max(num / dist);
    }
    Ok(best)
}

/// Sampling parameters for [`certify_kernel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifySettings {
    pub n_states: usize,
    pub radius: f64,
    pub n_pairs: usize,
    pub ess_grid: usize,
    pub seed: u64,
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self {
            n_states: 200,
            radius: 10.0,
            n_pairs: 300,
            ess_grid: 257,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConstants {
    pub c_minus_half: f64,
    pub c_zero: f64,
    pub ess_sup: f64,
    pub lipschitz: f64,
    pub lipschitz_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub declared: Option<f64>,
    pub pass: bool,
}

/// Measured constants and pass/fail per declared bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub family: String,
    pub measured: MeasuredConstants,
    pub declared: DeclaredBounds,
    pub checks: Vec<BoundCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: &str, measured: f64, declared: Option<f64>) -> BoundCheck {
    let pass = measured.is_finite()
        && declared.is_none_or(|d| measured <= d * (1.0 + CERT_RTOL) + f64::MIN_POSITIVE);
    BoundCheck {
        name: name.to_string(),
        measured,
        declared,
        pass,
    }
}

/// Runs all four kernel certifications.
pub fn certify_kernel(
    k: &dyn DelayKernel,
    basis: &Basis,
    quad: &ThetaQuadrature,
    settings: &CertifySettings,
) -> Result<CertificateReport> {
    if !(settings.radius > 0.0) {
        return Err(Error::config(format!(
            "ball radius must be positive, got {}",
            settings.radius
        )));
    }
    let sampler = StateSampler::new(k.modes(), quad);
    let states = sampler.sample_states(settings.n_states, settings.radius, settings.seed);
    let pairs = sampler.sample_pairs(settings.n_pairs, settings.radius, settings.seed.wrapping_add(1));
    certify_on_samples(k, basis, quad, &states, &pairs, settings)
}

/// Certification over caller-supplied states and pairs.
pub fn certify_on_samples(
    k: &dyn DelayKernel,
    basis: &Basis,
    quad: &ThetaQuadrature,
    states: &[PhaseState],
    pairs: &[(PhaseState, PhaseState)],
    settings: &CertifySettings,
) -> Result<CertificateReport> {
    let grid = quad.dense_grid(settings.ess_grid);
    let measured = MeasuredConstants {
        c_minus_half: certify_bound_minus_half(k, basis, states, quad)?,
        c_zero: certify_bound_zero(k, basis, states, quad)?,
        ess_sup: certify_ess_sup(k, basis, states, &grid)?,
        lipschitz: lipschitz_over_pairs(k, basis, quad, pairs)?,
        lipschitz_radius: settings.radius,
    };
    let declared = k.declared_bounds();
    let checks = vec![
        check("c_minus_half", measured.c_minus_half, declared.c_minus_half),
        check("c_zero", measured.c_zero, declared.c_zero),
        check("ess_sup", measured.ess_sup, declared.ess_sup),
        check("lipschitz", measured.lipschitz, declared.lipschitz),
    ];
    Ok(CertificateReport {
        family: k.family().to_string(),
        measured,
        declared,
        checks,
        c_b: None,
        l_b: None,
        m_f: None,
        p_min: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    fn setup(m: usize) -> (Basis, ThetaQuadrature) {
        (
            Basis::new(1.0, m, 4 * m.max(8)).unwrap(),
            ThetaQuadrature::new(1.0, 32).unwrap(),
        )
    }

    #[test]
    fn unit_bump_mass_constant() {
        // high-order composite Gauss–Legendre as an independent check
        let mut total = 0.0;
        let panels = 200;
        for p in 0..panels {
            let a = -1.0 + 2.0 * p as f64 / panels as f64;
            let (x, w) = gauss_legendre(20, a, a + 2.0 / panels as f64);
            total += x.iter().zip(&w).map(|(x, w)| w * unit_bump(*x)).sum::<f64>();
        }
        assert!((total - UNIT_BUMP_MASS).abs() < 1e-14);
    }

    #[test]
    fn time_profile_rejects_vanishing_integral() {
        let q = ThetaQuadrature::new(1.0, 33).unwrap();
        // ∫_{-1}^0 (1 + 2θ) dθ = 0, and the trapezoid rule is exact for linear χ
        let bad = ChiFamily::Linear {
            intercept: 1.0,
            slope: 2.0,
        };
        assert!(matches!(TimeProfile::new(bad, &q), Err(Error::InvalidConfig(_))));
        let sign_changing = ChiFamily::Linear {
            intercept: 1.0,
            slope: 1.5,
        };
        let p = TimeProfile::new(sign_changing, &q).unwrap();
        assert!((p.integral() - 0.25).abs() < 1e-14);
        assert!(p.abs_integral() > p.integral());
    }

    #[test]
    fn zero_kernel_certifies_to_zero() {
        let (b, q) = setup(4);
        let k = ZeroKernel::new(1.0, 4);
        let states = StateSampler::new(4, &q).sample_states(5, 1.0, 1);
        assert_eq!(certify_bound_minus_half(&k, &b, &states, &q).unwrap(), 0.0);
        assert_eq!(certify_bound_zero(&k, &b, &states, &q).unwrap(), 0.0);
        assert_eq!(certify_ess_sup(&k, &b, &states, &q.dense_grid(17)).unwrap(), 0.0);
        assert_eq!(estimate_lipschitz(&k, &b, &q, 1.0, 10, 2).unwrap(), 0.0);
    }

    #[test]
    fn certification_requires_states() {
        let (b, q) = setup(2);
        let k = ZeroKernel::new(1.0, 2);
        assert!(certify_bound_minus_half(&k, &b, &[], &q).is_err());
        assert!(estimate_lipschitz(&k, &b, &q, 0.0, 10, 2).is_err());
    }

    #[test]
    fn constant_function_kernel_matches_sine_series() {
        let m = 256;
        let b = Basis::new(1.0, m, 4 * m).unwrap();
        let q = ThetaQuadrature::new(1.0, 32).unwrap();
        let chi = TimeProfile::new(ChiFamily::Constant { value: 1.0 }, &q).unwrap();
        let k = ConstantInState::from_spec(&ProfileSpec::Constant { value: 1.0 }, chi, &b);
        let states = StateSampler::new(m, &q).sample_states(3, 1.0, 4);
        let c = certify_bound_minus_half(&k, &b, &states, &q).unwrap();
        assert!((c - 1.0 / 12f64.sqrt()).abs() < 1e-8, "{c}");
        let c0 = certify_bound_zero(&k, &b, &states, &q).unwrap();
        assert!((c0 - 1.0).abs() < 2e-3, "{c0}");
        let ess = certify_ess_sup(&k, &b, &states, &q.dense_grid(33)).unwrap();
        assert!((ess - 1.0 / 12f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn e1_profile_with_unit_chi_has_unit_l2_bound() {
        let (b, q) = setup(4);
        let chi = TimeProfile::new(ChiFamily::Constant { value: 1.0 }, &q).unwrap();
        let k = ConstantInState::new(SpectralField::mode(4, 1, 1.0), chi, &b);
        let states = StateSampler::new(4, &q).sample_states(3, 1.0, 4);
        assert!((certify_bound_zero(&k, &b, &states, &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn separable_kernel_factorizes() {
        let (b, q) = setup(6);
        let chi = TimeProfile::new(
            ChiFamily::Linear {
                intercept: 0.5,
                slope: 3.0,
            },
            &q,
        )
        .unwrap();
        let w = SpectralField::new(vec![0.3, -1.0, 0.2, 0.0, 0.7, -0.1]);
        let k = ConstantInState::new(w.clone(), chi, &b);
        let states = StateSampler::new(6, &q).sample_states(4, 2.0, 9);
        // independent factors: ∫|χ| by the trapezoid rule, and the sequence-space norm
        let abs_chi: f64 = q
            .nodes()
            .iter()
            .zip(q.weights())
            .map(|(t, wt)| wt * (0.5 + 3.0 * t).abs())
            .sum();
        let w_norm: f64 = w
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * c / ((i + 1) as f64 * PI).powi(2))
            .sum::<f64>()
            .sqrt();
        let c = certify_bound_minus_half(&k, &b, &states, &q).unwrap();
        assert!((c - abs_chi * w_norm).abs() < 1e-8);
        let grid = q.dense_grid(301);
        let ess = certify_ess_sup(&k, &b, &states, &grid).unwrap();
        // max |χ| on [-1, 0] is |0.5 - 3| at θ = -1
        assert!((ess - 2.5 * w_norm).abs() < 1e-12);
        assert_eq!(estimate_lipschitz(&k, &b, &q, 3.0, 30, 1).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_in_theta_l2_bound() {
        let (b, q) = setup(4);
        let fine = ThetaQuadrature::new(1.0, 4001).unwrap();
        let family = ChiFamily::Gaussian {
            center: -0.5,
            sigma: 0.1,
            height: 2.0,
        };
        let chi = TimeProfile::new(family.clone(), &fine).unwrap();
        let k = ConstantInState::new(SpectralField::mode(4, 2, 1.0), chi, &b);
        let states = StateSampler::new(4, &q).sample_states(2, 1.0, 3);
        let got = certify_bound_zero(&k, &b, &states, &fine).unwrap();
        // closed form: 2·σ√(2π)·erf(5/√2) ≈ 2·0.1·√(2π) minus a tail below 1e-6
        let closed = 2.0 * 0.1 * (2.0 * PI).sqrt();
        assert!((got - closed).abs() < 1e-5, "{got} vs {closed}");
    }

    #[test]
    fn delay_selective_has_unit_mass() {
        let (b, _) = setup(4);
        let fine = ThetaQuadrature::new(1.0, 8001).unwrap();
        let k = DelaySelective::new(
            TauMap::Constant { value: 0.5 },
            0.125,
            &ProfileSpec::Modes {
                coeffs: vec![0.0, 1.0],
            },
            &b,
            &fine,
        )
        .unwrap();
        let state = PhaseState::zero(4, &fine);
        let xs = k.eval_nodes(&fine, &state).unwrap();
        let mut integral = SpectralField::zeros(4);
        for (x, w) in xs.iter().zip(fine.weights()) {
            integral.axpy(*w, x);
        }
        assert!((integral.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn delay_selective_rejects_bad_delay_range() {
        let (b, q) = setup(4);
        let p = ProfileSpec::Constant { value: 1.0 };
        let err = DelaySelective::new(TauMap::Constant { value: 1.2 }, 0.1, &p, &b, &q);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
        let err = DelaySelective::new(TauMap::Constant { value: 0.05 }, 0.1, &p, &b, &q);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn builtin_kernels_stay_within_declared_bounds() {
        let (b, q) = setup(16);
        let chi = TimeProfile::new(
            ChiFamily::Bump {
                center: -0.6,
                half_width: 0.3,
                height: 1.5,
            },
            &q,
        )
        .unwrap();
        let kernels: Vec<Box<dyn DelayKernel>> = vec![
            Box::new(ConstantInState::from_spec(
                &ProfileSpec::Constant { value: 1.0 },
                chi,
                &b,
            )),
            Box::new(
                DelaySelective::new(
                    TauMap::Saturating {
                        lo: 0.25,
                        hi: 0.75,
                        scale: 1.0,
                    },
                    0.125,
                    &ProfileSpec::Constant { value: 1.0 },
                    &b,
                    &q,
                )
                .unwrap(),
            ),
        ];
        let settings = CertifySettings {
            n_states: 200,
            ..CertifySettings::default()
        };
        for k in &kernels {
            let rep = certify_kernel(k.as_ref(), &b, &q, &settings).unwrap();
            assert!(rep.passed(), "{rep:#?}");
            assert!(rep.measured.lipschitz.is_finite());
        }
    }

    #[test]
    fn inverted_declared_bound_fails() {
        let (b, q) = setup(8);
        let k = DelaySelective::new(
            TauMap::Saturating {
                lo: 0.25,
                hi: 0.75,
                scale: 1.0,
            },
            0.125,
            &ProfileSpec::Constant { value: 1.0 },
            &b,
            &q,
        )
        .unwrap();
        let honest = k.declared_bounds();
        let k = k.with_declared(&DeclaredBounds {
            c_minus_half: honest.c_minus_half.map(|c| c / 10.0),
            ..DeclaredBounds::default()
        });
        let rep = certify_kernel(&k, &b, &q, &CertifySettings::default()).unwrap();
        assert!(!rep.passed());
        assert!(!rep.checks[0].pass);
        assert!(rep.checks[1..].iter().all(|c| c.pass));
    }

    #[test]
    fn kernel_eval_is_deterministic() {
        let (b, q) = setup(8);
        let k = DelaySelective::new(
            TauMap::Saturating {
                lo: 0.25,
                hi: 0.75,
                scale: 0.5,
            },
            0.125,
            &ProfileSpec::Constant { value: 1.0 },
            &b,
            &q,
        )
        .unwrap();
        let s = StateSampler::new(8, &q).sample_states(1, 2.0, 11).remove(0);
        assert_eq!(k.eval(-0.4, &s).unwrap(), k.eval(-0.4, &s).unwrap());
    }
}
