//! Named model setups with Nicholson-type birth rate.

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, ProfileSpec, TauMap};
use crate::model::{Nonlinearity, SpatialKernel};
use crate::solver::{Model, ModelConfig};

pub const PRESET_NAMES: [&str; 2] = ["nicholson_constant_f", "nicholson_gaussian_f"];

pub const DEFAULT_MODES: usize = 16;
pub const DEFAULT_THETA_NODES: usize = 32;
/// Default time step as a fraction of `r`.
pub const DEFAULT_STEPS_PER_DELAY: f64 = 256.0;

/// `b(w) = 40|w|e^{-|w|}`, `f ≡ 1`, `L = d = r = 1`.
pub fn nicholson_constant_f() -> (ModelConfig, KernelSpec) {
    preset_with(SpatialKernel::Constant { value: 1.0 })
}

/// As [`nicholson_constant_f`] with the heat kernel `f`, `α = 0.05`.
pub fn nicholson_gaussian_f() -> (ModelConfig, KernelSpec) {
    preset_with(SpatialKernel::Gaussian { alpha: 0.05 })
}

fn preset_with(spatial: SpatialKernel) -> (ModelConfig, KernelSpec) {
    let r = 1.0;
    let cfg = ModelConfig {
        length: 1.0,
        modes: DEFAULT_MODES,
        quad_order: 4 * DEFAULT_MODES,
        d: 1.0,
        r,
        dt: r / DEFAULT_STEPS_PER_DELAY,
        theta_nodes: DEFAULT_THETA_NODES,
        nonlinearity: Nonlinearity::NicholsonAbs { p: 40.0 },
        spatial,
    };
    let kernel = KernelSpec::DelaySelective {
        tau: TauMap::Saturating {
            lo: r / 4.0,
            hi: 3.0 * r / 4.0,
            scale: 1.0,
        },
        sigma: r / 8.0,
        profile: ProfileSpec::Constant { value: 1.0 },
        declared: Default::default(),
    };
    (cfg, kernel)
}

pub fn preset(name: &str) -> Result<(ModelConfig, KernelSpec)> {
    match name {
        "nicholson_constant_f" => Ok(nicholson_constant_f()),
        "nicholson_gaussian_f" => Ok(nicholson_gaussian_f()),
        other => Err(Error::config(format!(
            "unknown preset {other:?} (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Builds a preset model, optionally at a different mode count and step.
pub fn preset_model(name: &str, modes: Option<usize>, dt: Option<f64>) -> Result<Model> {
    let (mut cfg, kernel) = preset(name)?;
    if let Some(m) = modes {
        cfg = cfg.with_modes(m);
    }
    if let Some(dt) = dt {
        cfg = cfg.with_dt(dt);
    }
    cfg.validate()?;
    Model::from_spec(cfg, &kernel)
}
