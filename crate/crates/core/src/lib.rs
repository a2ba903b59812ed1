//! Spectral-Galerkin simulation of the reaction-diffusion equation
//! `u_t + A u + d u = F(u_t)` on `(0, L)` with Dirichlet conditions, where `F`
//! is a nonlocal birth term averaged over a state-dependent distributed delay.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod kernels;
pub mod model;
pub mod phase_space;
pub mod presets;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod synthesis;

pub use error::{Error, Result};
pub use kernels::{
    certify_kernel, CertificateReport, CertifySettings, ChiFamily, DeclaredBounds, DelayKernel, KernelSpec,
    ProfileSpec, TauMap, TimeProfile,
};
pub use model::{Nonlinearity, SpatialKernel};
pub use phase_space::{HistorySegment, PhaseState};
pub use quadrature::ThetaQuadrature;
pub use solver::{eval_f, simulate, Model, ModelConfig, Simulator, Trajectory};
pub use spectral::{Basis, SpectralField};
