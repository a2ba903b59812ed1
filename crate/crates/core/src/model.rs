//! Birth-rate nonlinearity `b` and spatial interaction kernel `f`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

/// Nonlinearity `b: R → R` inside the delay term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `b(w) = p·|w|·e^{-|w|}`: bounded by `p/e`, positive off zero.
    NicholsonAbs {
        p: f64,
    },
    /// `b(w) = p·w·e^{-w}`, the classic birth function. Only bounded for
    /// `w ≥ 0`, so it is meant for non-negative data.
    Nicholson {
        p: f64,
    },
    /// `b(w) = gain·tanh(w)`
    Tanh {
        gain: f64,
    },
    Zero,
}

impl Nonlinearity {
    pub fn eval(&self, w: f64) -> f64 {
        match *self {
            Nonlinearity::NicholsonAbs { p } => {
                let a = w.abs();
                p * a * (-a).exp()
            }
            Nonlinearity::Nicholson { p } => p * w * (-w).exp(),
            Nonlinearity::Tanh { gain } => gain * w.tanh(),
            Nonlinearity::Zero => 0.0,
        }
    }

    /// `C_b ≥ sup |b|` (over `w ≥ 0` for the classic Nicholson form).
    pub fn bound(&self) -> f64 {
        match *self {
            Nonlinearity::NicholsonAbs { p } | Nonlinearity::Nicholson { p } => p.abs() / E,
            Nonlinearity::Tanh { gain } => gain.abs(),
            Nonlinearity::Zero => 0.0,
        }
    }

    /// Global Lipschitz constant `L_b` on the range where `bound` holds.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::NicholsonAbs { p } | Nonlinearity::Nicholson { p } => p.abs(),
            Nonlinearity::Tanh { gain } => gain.abs(),
            Nonlinearity::Zero => 0.0,
        }
    }

    /// Whether the stated bound holds on all of R (false for the classic Nicholson form).
    pub fn globally_bounded(&self) -> bool {
        !matches!(self, Nonlinearity::Nicholson { .. })
    }

    /// `b(w) > 0` for every `w ≠ 0`.
    pub fn positive_off_zero(&self) -> bool {
        matches!(self, Nonlinearity::NicholsonAbs { p } if *p > 0.0)
    }

    /// Largest `|b(w)| / C_b` over a sample grid; used to check the declared bound.
    pub fn sampled_bound_ratio(&self) -> f64 {
        let cb = self.bound();
        let lo = if self.globally_bounded() { -50.0 } else { 0.0 };
        let mut worst: f64 = 0.0;
        for i in 0..=20_000 {
            let w = lo + (50.0 - lo) * i as f64 / 20_000.0;
            let v = self.eval(w).abs();
            worst = worst.max(if cb > 0.0 {
                v / cb
            } else if v > 0.0 {
                f64::INFINITY
            } else {
                0.0
            });
        }
        worst
    }
}

/// Spatial kernel `f` on `Ω - Ω = (-L, L)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialKernel {
    Constant {
        value: f64,
    },
    /// Heat kernel `(4πα)^{-1/2} e^{-s²/(4α)}`.
    Gaussian {
        alpha: f64,
    },
}

impl SpatialKernel {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            SpatialKernel::Constant { value } => value,
            SpatialKernel::Gaussian { alpha } => {
                (4.0 * PI * alpha).powf(-0.5) * (-s * s / (4.0 * alpha)).exp()
            }
        }
    }

    /// `M_f ≥ sup |f|`
    pub fn bound(&self) -> f64 {
        match *self {
            SpatialKernel::Constant { value } => value.abs(),
            SpatialKernel::Gaussian { alpha } => (4.0 * PI * alpha).powf(-0.5),
        }
    }

    /// `sup |f'|`
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SpatialKernel::Constant { .. } => 0.0,
            SpatialKernel::Gaussian { alpha } => self.bound() * (-0.5f64).exp() / (2.0 * alpha).sqrt(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SpatialKernel::Constant { .. })
    }

    pub fn strictly_positive(&self) -> bool {
        match *self {
            SpatialKernel::Constant { value } => value > 0.0,
            SpatialKernel::Gaussian { alpha } => alpha > 0.0,
        }
    }

    /// Largest `|f(s)|` on a uniform grid over `[-L, L]`.
    pub fn sampled_max(&self, length: f64) -> f64 {
        (0..=4000)
            .map(|i| -length + 2.0 * length * i as f64 / 4000.0)
            .map(|s| self.eval(s).abs())
            .fold(0.0, f64::max)
    }
}
