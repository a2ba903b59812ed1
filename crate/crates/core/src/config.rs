//! Flat `key = value` run configuration with `[section]` headers and `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::{
    CertifySettings, ChiFamily, DeclaredBounds, KernelSpec, ProfileSpec, TauMap, TimeProfile,
};
use crate::model::{Nonlinearity, SpatialKernel};
use crate::presets::{self, DEFAULT_MODES, DEFAULT_STEPS_PER_DELAY, DEFAULT_THETA_NODES};
use crate::solver::ModelConfig;
use crate::spectral::SpectralField;

const SECTIONS: [&str; 11] = [
    "",
    "model",
    "nonlinearity",
    "spatial",
    "kernel",
    "initial",
    "simulate",
    "synthesize",
    "certify",
    "probe",
    "io",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Synthesize,
    Certify,
    Probe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Synthesize => "synthesize",
            Command::Certify => "certify",
            Command::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Command::Simulate,
            "synthesize" => Command::Synthesize,
            "certify" => Command::Certify,
            "probe" => Command::Probe,
            _ => return None,
        })
    }

    fn needs_seed(self) -> bool {
        matches!(self, Command::Certify | Command::Probe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryKind {
    /// `φ ≡ u⁰`
    Constant,
    Zero,
}

/// Initial data for `simulate`.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Zero,
    /// Sine coefficients (padded with zeros to `m`).
    Modes {
        coeffs: Vec<f64>,
        history: HistoryKind,
    },
    /// Seeded random state in the H-ball of this radius.
    Random {
        radius: f64,
    },
}

/// A target equilibrium as a sum of `amplitude·e_k` terms; empty means zero.
pub type TargetTerms = Vec<(usize, f64)>;

pub fn target_field(terms: &TargetTerms, m: usize) -> Result<SpectralField> {
    let mut u = SpectralField::zeros(m);
    for &(k, a) in terms {
        if k == 0 || k > m {
            return Err(Error::config(format!(
                "synthesize.targets: mode {k} outside 1..={m}"
            )));
        }
        u.coeffs_mut()[k - 1] += a;
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSettings {
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesizeSettings {
    pub targets: Vec<TargetTerms>,
    pub chi: ChiFamily,
    pub rho: f64,
    pub t_verify: f64,
    pub drift_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyConfig {
    pub n_states: usize,
    pub radius: f64,
    pub n_pairs: usize,
    pub ess_grid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSettings {
    pub radii: Vec<f64>,
    pub t_max: f64,
    pub n_members: usize,
    pub t_transient: f64,
    pub t_observe: f64,
    pub ensemble_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IoSettings {
    pub out: String,
    pub seed: Option<u64>,
    pub dt_refine: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub preset: Option<String>,
    pub model: ModelConfig,
    pub kernel: KernelSpec,
    pub initial: InitialData,
    pub simulate: SimulateSettings,
    pub synthesize: SynthesizeSettings,
    pub certify: CertifyConfig,
    pub probe: ProbeSettings,
    pub io: IoSettings,
}

impl RunConfig {
    pub fn certify_settings(&self) -> CertifySettings {
        CertifySettings {
            n_states: self.certify.n_states,
            radius: self.certify.radius,
            n_pairs: self.certify.n_pairs,
            ess_grid: self.certify.ess_grid,
            seed: self.io.seed.unwrap_or(0),
        }
    }

    /// Cross-field checks; called by the parser.
    pub fn validate(&self) -> Result<()> {
        validate_model(&self.model)?;
        if self.command.needs_seed() && self.io.seed.is_none() {
            return Err(Error::config(format!(
                "io.seed: a seed is required for {}",
                self.command.name()
            )));
        }
        if matches!(self.initial, InitialData::Random { .. }) && self.io.seed.is_none() {
            return Err(Error::config(
                "io.seed: a seed is required for random initial data",
            ));
        }
        if let InitialData::Random { radius } = self.initial {
            positive("initial.radius", radius)?;
        }
        if let InitialData::Modes { coeffs, .. } = &self.initial {
            if coeffs.len() > self.model.modes {
                return Err(Error::config(format!(
                    "initial.coeffs: {} coefficients for {} modes",
                    coeffs.len(),
                    self.model.modes
                )));
            }
        }
        let quad = self.model.theta_quadrature()?;
        if let KernelSpec::ConstantInState { chi, .. } = &self.kernel {
            TimeProfile::new(chi.clone(), &quad)
                .map_err(|e| Error::config(format!("kernel.chi: {}", strip(&e))))?;
        }
        positive("simulate.t_end", self.simulate.t_end)?;
        let s = &self.synthesize;
        if self.command == Command::Synthesize {
            if s.targets.is_empty() {
                return Err(Error::config(
                    "synthesize.targets: at least one target is required",
                ));
            }
            for t in &s.targets {
                target_field(t, self.model.modes)?;
            }
            TimeProfile::new(s.chi.clone(), &quad)
                .map_err(|e| Error::config(format!("synthesize.chi: {}", strip(&e))))?;
        }
        positive("synthesize.rho", s.rho)?;
        positive("synthesize.t_verify", s.t_verify)?;
        positive("synthesize.drift_tol", s.drift_tol)?;
        positive("certify.radius", self.certify.radius)?;
        if self.certify.n_states == 0 || self.certify.n_pairs == 0 || self.certify.ess_grid < 2 {
            return Err(Error::config("certify: sample counts must be positive"));
        }
        let p = &self.probe;
        if p.radii.is_empty() {
            return Err(Error::config("probe.radii: at least one radius is required"));
        }
        for &r in &p.radii {
            positive("probe.radii", r)?;
        }
        positive("probe.t_max", p.t_max)?;
        positive("probe.t_observe", p.t_observe)?;
        positive("probe.ensemble_radius", p.ensemble_radius)?;
        if p.t_transient < 0.0 {
            return Err(Error::config("probe.t_transient: must be non-negative"));
        }
        if p.n_members < 2 {
            return Err(Error::config(
                "probe.n_members: an ensemble needs at least two members",
            ));
        }
        Ok(())
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::InvalidConfig(m) => m.clone(),
        other => other.to_string(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("{path}: must be positive (got {v})")))
    }
}

fn validate_model(m: &ModelConfig) -> Result<()> {
    if !(m.d > 0.0) {
        return Err(Error::config(format!(
            "model.d: d must be positive (got {})",
            m.d
        )));
    }
    positive("model.length", m.length)?;
    positive("model.r", m.r)?;
    positive("model.dt", m.dt)?;
    if m.modes == 0 {
        return Err(Error::config("model.modes: must be at least 1"));
    }
    if m.quad_order < 4 * m.modes {
        return Err(Error::config(format!(
            "model.quad_order: {} is below 4·modes = {}",
            m.quad_order,
            4 * m.modes
        )));
    }
    m.validate()
        .map_err(|e| Error::config(format!("model: {}", strip(&e))))
}

/// Values supplied outside the file (command line).
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub dt_refine: Option<usize>,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Table {
    entries: BTreeMap<(String, String), Entry>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    message: format!("malformed section header {content:?}"),
                })?;
                let name = name.trim();
                if name.is_empty() || !SECTIONS.contains(&name) {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown section [{name}]"),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid key {key:?}"),
                });
            }
            let prev = entries.insert(
                (section.clone(), key.to_string()),
                Entry {
                    value: value.trim().to_string(),
                    line,
                    used: false,
                },
            );
            if let Some(p) = prev {
                return Err(Error::Parse {
                    line,
                    message: format!("{} repeats the key set on line {}", path(&section, key), p.line),
                });
            }
        }
        Ok(Self { entries })
    }

    fn raw(&mut self, sec: &str, key: &str) -> Option<(String, usize)> {
        self.entries
            .get_mut(&(sec.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.value.clone(), e.line)
            })
    }

    fn has(&self, sec: &str, key: &str) -> bool {
        self.entries.contains_key(&(sec.to_string(), key.to_string()))
    }

    fn string(&mut self, sec: &str, key: &str) -> Option<String> {
        self.raw(sec, key).map(|(v, _)| v)
    }

    fn parsed<T: std::str::FromStr>(&mut self, sec: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("{}: expected {what}, got {v:?}", path(sec, key)),
            }),
        }
    }

    fn f64(&mut self, sec: &str, key: &str) -> Result<Option<f64>> {
        self.parsed(sec, key, "a number")
    }

    fn usize(&mut self, sec: &str, key: &str) -> Result<Option<usize>> {
        self.parsed(sec, key, "a non-negative integer")
    }

    fn f64_list(&mut self, sec: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(sec, key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("{}: expected a number list, got {v:?}", path(sec, key)),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn required<T>(v: Option<T>, sec: &str, key: &str) -> Result<T> {
        v.ok_or_else(|| Error::config(format!("{}: required", path(sec, key))))
    }

    fn bad_choice(&mut self, sec: &str, key: &str, got: &str, choices: &str) -> Error {
        let line = self
            .entries
            .get(&(sec.to_string(), key.to_string()))
            .map(|e| e.line)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: format!("{}: unknown value {got:?} (expected {choices})", path(sec, key)),
        }
    }

    fn finish(self) -> Result<()> {
        let first = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used)
            .min_by_key(|(_, e)| e.line);
        match first {
            None => Ok(()),
            Some(((sec, key), e)) => Err(Error::Parse {
                line: e.line,
                message: format!("unknown key {}", path(sec, key)),
            }),
        }
    }
}

fn path(sec: &str, key: &str) -> String {
    if sec.is_empty() {
        key.to_string()
    } else {
        format!("{sec}.{key}")
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// Parses, applies `overrides`, then validates.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut t = Table::parse(text)?;
    let command = match t.raw("", "command") {
        Some((v, line)) => Some(Command::parse(&v).ok_or_else(|| Error::Parse {
            line,
            message: format!("command: unknown command {v:?}"),
        })?),
        None => None,
    };
    let command = overrides
        .command
        .or(command)
        .ok_or_else(|| Error::config("command: required (simulate, synthesize, certify or probe)"))?;
    let preset_name = t.string("", "preset");
    let base = match &preset_name {
        Some(name) => {
            Some(presets::preset(name).map_err(|e| Error::config(format!("preset: {}", strip(&e))))?)
        }
        None => None,
    };

    let model = read_model(&mut t, base.as_ref().map(|b| &b.0))?;
    let kernel = read_kernel(&mut t, base.as_ref().map(|b| &b.1))?;
    let initial = read_initial(&mut t)?;
    let simulate = SimulateSettings {
        t_end: t.f64("simulate", "t_end")?.unwrap_or(5.0 * model.r),
    };
    let synthesize = read_synthesize(&mut t, &model)?;
    let defaults = CertifySettings::default();
    let certify = CertifyConfig {
        n_states: t.usize("certify", "n_states")?.unwrap_or(defaults.n_states),
        radius: t.f64("certify", "radius")?.unwrap_or(defaults.radius),
        n_pairs: t.usize("certify", "n_pairs")?.unwrap_or(defaults.n_pairs),
        ess_grid: t.usize("certify", "ess_grid")?.unwrap_or(defaults.ess_grid),
    };
    let probe = ProbeSettings {
        radii: t
            .f64_list("probe", "radii")?
            .unwrap_or_else(|| vec![1.0, 10.0, 100.0]),
        t_max: t.f64("probe", "t_max")?.unwrap_or(50.0 * model.r),
        n_members: t.usize("probe", "n_members")?.unwrap_or(4),
        t_transient: t.f64("probe", "t_transient")?.unwrap_or(20.0 * model.r),
        t_observe: t.f64("probe", "t_observe")?.unwrap_or(10.0 * model.r),
        ensemble_radius: t.f64("probe", "ensemble_radius")?.unwrap_or(10.0),
    };
    let io = IoSettings {
        out: overrides
            .out
            .clone()
            .or(t.string("io", "out"))
            .unwrap_or_else(|| "out".to_string()),
        seed: match overrides.seed {
            Some(s) => {
                t.raw("io", "seed");
                Some(s)
            }
            None => t.parsed("io", "seed", "a non-negative integer")?,
        },
        dt_refine: match overrides.dt_refine {
            Some(k) => {
                t.raw("io", "dt_refine");
                k
            }
            None => t.usize("io", "dt_refine")?.unwrap_or(0),
        },
    };
    t.finish()?;
    let cfg = RunConfig {
        command,
        preset: preset_name,
        model,
        kernel,
        initial,
        simulate,
        synthesize,
        certify,
        probe,
        io,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn read_model(t: &mut Table, base: Option<&ModelConfig>) -> Result<ModelConfig> {
    let s = "model";
    let length = t.f64(s, "length")?.or(base.map(|b| b.length));
    let d = t.f64(s, "d")?.or(base.map(|b| b.d));
    let r = t.f64(s, "r")?.or(base.map(|b| b.r));
    let length = Table::required(length, s, "length")?;
    let d = Table::required(d, s, "d")?;
    let r = Table::required(r, s, "r")?;
    let modes = t.usize(s, "modes")?.unwrap_or(DEFAULT_MODES);
    let quad_order = t.usize(s, "quad_order")?.unwrap_or(4 * modes);
    let dt = t.f64(s, "dt")?.unwrap_or(r / DEFAULT_STEPS_PER_DELAY);
    let theta_nodes = t.usize(s, "theta_nodes")?.unwrap_or(DEFAULT_THETA_NODES);
    let nonlinearity = read_nonlinearity(t, base.map(|b| b.nonlinearity))?;
    let spatial = read_spatial(t, base.map(|b| b.spatial))?;
    Ok(ModelConfig {
        length,
        modes,
        quad_order,
        d,
        r,
        dt,
        theta_nodes,
        nonlinearity,
        spatial,
    })
}

fn read_nonlinearity(t: &mut Table, base: Option<Nonlinearity>) -> Result<Nonlinearity> {
    let s = "nonlinearity";
    let base_kind = base.map(|b| match b {
        Nonlinearity::NicholsonAbs { .. } => "nicholson_abs",
        Nonlinearity::Nicholson { .. } => "nicholson",
        Nonlinearity::Tanh { .. } => "tanh",
        Nonlinearity::Zero => "zero",
    });
    let kind = Table::required(t.string(s, "kind").or(base_kind.map(String::from)), s, "kind")?;
    let same = base_kind == Some(kind.as_str());
    let base_p = match base {
        Some(Nonlinearity::NicholsonAbs { p }) | Some(Nonlinearity::Nicholson { p }) if same => Some(p),
        _ => None,
    };
    let base_gain = match base {
        Some(Nonlinearity::Tanh { gain }) if same => Some(gain),
        _ => None,
    };
    Ok(match kind.as_str() {
        "nicholson_abs" => Nonlinearity::NicholsonAbs {
            p: Table::required(t.f64(s, "p")?.or(base_p), s, "p")?,
        },
        "nicholson" => Nonlinearity::Nicholson {
            p: Table::required(t.f64(s, "p")?.or(base_p), s, "p")?,
        },
        "tanh" => Nonlinearity::Tanh {
            gain: Table::required(t.f64(s, "gain")?.or(base_gain), s, "gain")?,
        },
        "zero" => Nonlinearity::Zero,
        other => {
            return Err(t.bad_choice(s, "kind", other, "nicholson_abs, nicholson, tanh, zero"));
        }
    })
}

fn read_spatial(t: &mut Table, base: Option<SpatialKernel>) -> Result<SpatialKernel> {
    let s = "spatial";
    let base_kind = base.map(|b| match b {
        SpatialKernel::Constant { .. } => "constant",
        SpatialKernel::Gaussian { .. } => "gaussian",
    });
    let kind = Table::required(t.string(s, "kind").or(base_kind.map(String::from)), s, "kind")?;
    let same = base_kind == Some(kind.as_str());
    Ok(match kind.as_str() {
        "constant" => {
            let b = match base {
                Some(SpatialKernel::Constant { value }) if same => Some(value),
                _ => None,
            };
            SpatialKernel::Constant {
                value: Table::required(t.f64(s, "value")?.or(b), s, "value")?,
            }
        }
        "gaussian" => {
            let b = match base {
                Some(SpatialKernel::Gaussian { alpha }) if same => Some(alpha),
                _ => None,
            };
            SpatialKernel::Gaussian {
                alpha: Table::required(t.f64(s, "alpha")?.or(b), s, "alpha")?,
            }
        }
        other => return Err(t.bad_choice(s, "kind", other, "constant, gaussian")),
    })
}

fn read_chi(t: &mut Table, s: &str, base: Option<&ChiFamily>) -> Result<ChiFamily> {
    let base_kind = base.map(chi_kind);
    let kind = Table::required(t.string(s, "chi").or(base_kind.map(String::from)), s, "chi")?;
    let same = base_kind == Some(kind.as_str());
    let b = |f: fn(&ChiFamily) -> Option<f64>| if same { base.and_then(f) } else { None };
    let mut get = |key: &str, fallback: Option<f64>| -> Result<f64> {
        Table::required(t.f64(s, key)?.or(fallback), s, key)
    };
    Ok(match kind.as_str() {
        "constant" => ChiFamily::Constant {
            value: get(
                "chi_value",
                b(|c| match c {
                    ChiFamily::Constant { value } => Some(*value),
                    _ => None,
                }),
            )?,
        },
        "bump" => {
            let (c0, w0, h0) = match (same, base) {
                (
                    true,
                    Some(ChiFamily::Bump {
                        center,
                        half_width,
                        height,
                    }),
                ) => (Some(*center), Some(*half_width), Some(*height)),
                _ => (None, None, None),
            };
            ChiFamily::Bump {
                center: get("chi_center", c0)?,
                half_width: get("chi_half_width", w0)?,
                height: get("chi_height", h0)?,
            }
        }
        "gaussian" => {
            let (c0, s0, h0) = match (same, base) {
                (
                    true,
                    Some(ChiFamily::Gaussian {
                        center,
                        sigma,
                        height,
                    }),
                ) => (Some(*center), Some(*sigma), Some(*height)),
                _ => (None, None, None),
            };
            ChiFamily::Gaussian {
                center: get("chi_center", c0)?,
                sigma: get("chi_sigma", s0)?,
                height: get("chi_height", h0)?,
            }
        }
        "linear" => {
            let (i0, s0) = match (same, base) {
                (true, Some(ChiFamily::Linear { intercept, slope })) => (Some(*intercept), Some(*slope)),
                _ => (None, None),
            };
            ChiFamily::Linear {
                intercept: get("chi_intercept", i0)?,
                slope: get("chi_slope", s0)?,
            }
        }
        other => return Err(t.bad_choice(s, "chi", other, "constant, bump, gaussian, linear")),
    })
}

fn chi_kind(c: &ChiFamily) -> &'static str {
    match c {
        ChiFamily::Constant { .. } => "constant",
        ChiFamily::Bump { .. } => "bump",
        ChiFamily::Gaussian { .. } => "gaussian",
        ChiFamily::Linear { .. } => "linear",
    }
}

fn read_profile(t: &mut Table, base: Option<&ProfileSpec>) -> Result<ProfileSpec> {
    let s = "kernel";
    let base_kind = base.map(|p| match p {
        ProfileSpec::Constant { .. } => "constant",
        ProfileSpec::Modes { .. } => "modes",
    });
    let kind = Table::required(
        t.string(s, "profile").or(base_kind.map(String::from)),
        s,
        "profile",
    )?;
    let same = base_kind == Some(kind.as_str());
    Ok(match kind.as_str() {
        "constant" => {
            let b = match base {
                Some(ProfileSpec::Constant { value }) if same => Some(*value),
                _ => None,
            };
            ProfileSpec::Constant {
                value: Table::required(t.f64(s, "profile_value")?.or(b), s, "profile_value")?,
            }
        }
        "modes" => {
            let b = match base {
                Some(ProfileSpec::Modes { coeffs }) if same => Some(coeffs.clone()),
                _ => None,
            };
            ProfileSpec::Modes {
                coeffs: Table::required(t.f64_list(s, "profile_coeffs")?.or(b), s, "profile_coeffs")?,
            }
        }
        other => return Err(t.bad_choice(s, "profile", other, "constant, modes")),
    })
}

fn read_declared(t: &mut Table, base: Option<&DeclaredBounds>) -> Result<DeclaredBounds> {
    let s = "kernel";
    let b = base.cloned().unwrap_or_default();
    Ok(DeclaredBounds {
        c_minus_half: t.f64(s, "declared_c_minus_half")?.or(b.c_minus_half),
        c_zero: t.f64(s, "declared_c_zero")?.or(b.c_zero),
        ess_sup: t.f64(s, "declared_ess_sup")?.or(b.ess_sup),
        lipschitz: t.f64(s, "declared_lipschitz")?.or(b.lipschitz),
    })
}

fn read_kernel(t: &mut Table, base: Option<&KernelSpec>) -> Result<KernelSpec> {
    let s = "kernel";
    let base_family = base.map(KernelSpec::family_name);
    let family = match t.string(s, "family").or(base_family.map(String::from)) {
        Some(f) => f,
        None => "zero".to_string(),
    };
    let base = if base_family == Some(family.as_str()) {
        base
    } else {
        None
    };
    Ok(match family.as_str() {
        "zero" => KernelSpec::Zero,
        "constant_in_state" => {
            let (bp, bc, bd) = match base {
                Some(KernelSpec::ConstantInState {
                    profile,
                    chi,
                    declared,
                }) => (Some(profile), Some(chi), Some(declared)),
                _ => (None, None, None),
            };
            KernelSpec::ConstantInState {
                profile: read_profile(t, bp)?,
                chi: read_chi(t, s, bc)?,
                declared: read_declared(t, bd)?,
            }
        }
        "delay_selective" => {
            let (bt, bs, bp, bd) = match base {
                Some(KernelSpec::DelaySelective {
                    tau,
                    sigma,
                    profile,
                    declared,
                }) => (Some(tau), Some(*sigma), Some(profile), Some(declared)),
                _ => (None, None, None, None),
            };
            let tau_kind = t.string(s, "tau").or(bt.map(|b| match b {
                TauMap::Constant { .. } => "constant".to_string(),
                TauMap::Saturating { .. } => "saturating".to_string(),
            }));
            let tau_kind = Table::required(tau_kind, s, "tau")?;
            let tau = match tau_kind.as_str() {
                "constant" => {
                    let b = match bt {
                        Some(TauMap::Constant { value }) => Some(*value),
                        _ => None,
                    };
                    TauMap::Constant {
                        value: Table::required(t.f64(s, "tau_value")?.or(b), s, "tau_value")?,
                    }
                }
                "saturating" => {
                    let (lo, hi, sc) = match bt {
                        Some(TauMap::Saturating { lo, hi, scale }) => (Some(*lo), Some(*hi), Some(*scale)),
                        _ => (None, None, None),
                    };
                    TauMap::Saturating {
                        lo: Table::required(t.f64(s, "tau_lo")?.or(lo), s, "tau_lo")?,
                        hi: Table::required(t.f64(s, "tau_hi")?.or(hi), s, "tau_hi")?,
                        scale: Table::required(t.f64(s, "tau_scale")?.or(sc), s, "tau_scale")?,
                    }
                }
                other => return Err(t.bad_choice(s, "tau", other, "constant, saturating")),
            };
            KernelSpec::DelaySelective {
                tau,
                sigma: Table::required(t.f64(s, "sigma")?.or(bs), s, "sigma")?,
                profile: read_profile(t, bp)?,
                declared: read_declared(t, bd)?,
            }
        }
        "synthesized" => {
            let (ba, bd) = match base {
                Some(KernelSpec::Synthesized { artifact, declared }) => {
                    (Some(artifact.clone()), Some(declared))
                }
                _ => (None, None),
            };
            KernelSpec::Synthesized {
                artifact: Table::required(t.string(s, "artifact").or(ba), s, "artifact")?,
                declared: read_declared(t, bd)?,
            }
        }
        other => {
            return Err(t.bad_choice(
                s,
                "family",
                other,
                "zero, constant_in_state, delay_selective, synthesized",
            ))
        }
    })
}

fn read_initial(t: &mut Table) -> Result<InitialData> {
    let s = "initial";
    let kind = t.string(s, "kind").unwrap_or_else(|| "zero".to_string());
    Ok(match kind.as_str() {
        "zero" => InitialData::Zero,
        "modes" => {
            let coeffs = Table::required(t.f64_list(s, "coeffs")?, s, "coeffs")?;
            let history = match t.string(s, "history").as_deref() {
                None | Some("constant") => HistoryKind::Constant,
                Some("zero") => HistoryKind::Zero,
                Some(other) => {
                    let o = other.to_string();
                    return Err(t.bad_choice(s, "history", &o, "constant, zero"));
                }
            };
            InitialData::Modes { coeffs, history }
        }
        "random" => InitialData::Random {
            radius: t.f64(s, "radius")?.unwrap_or(1.0),
        },
        other => return Err(t.bad_choice(s, "kind", other, "zero, modes, random")),
    })
}

fn parse_targets(v: &str, line: usize) -> Result<Vec<TargetTerms>> {
    let bad = || Error::Parse {
        line,
        message: format!(
            "synthesize.targets: expected items like `1:0.5` or `1:0.5+3:0.1` or `0`, got {v:?}"
        ),
    };
    v.split(',')
        .map(|item| {
            let item = item.trim();
            if item == "0" {
                return Ok(Vec::new());
            }
            item.split('+')
                .map(|term| {
                    let (k, a) = term.trim().split_once(':').ok_or_else(bad)?;
                    let k = k.trim().parse::<usize>().map_err(|_| bad())?;
                    let a = a.trim().parse::<f64>().map_err(|_| bad())?;
                    Ok((k, a))
                })
                .collect()
        })
        .collect()
}

fn read_synthesize(t: &mut Table, model: &ModelConfig) -> Result<SynthesizeSettings> {
    let s = "synthesize";
    let targets = match t.raw(s, "targets") {
        Some((v, line)) => parse_targets(&v, line)?,
        None => Vec::new(),
    };
    let chi = if t.has(s, "chi") {
        read_chi(t, s, None)?
    } else {
        ChiFamily::Constant { value: 1.0 }
    };
    Ok(SynthesizeSettings {
        targets,
        chi,
        rho: t.f64(s, "rho")?.unwrap_or(0.5),
        t_verify: t.f64(s, "t_verify")?.unwrap_or(10.0 * model.r),
        drift_tol: t.f64(s, "drift_tol")?.unwrap_or(1e-4),
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn emit_chi(out: &mut String, c: &ChiFamily) {
    let _ = writeln!(out, "chi = {}", chi_kind(c));
    match c {
        ChiFamily::Constant { value } => {
            let _ = writeln!(out, "chi_value = {value}");
        }
        ChiFamily::Bump {
            center,
            half_width,
            height,
        } => {
            let _ = writeln!(
                out,
                "chi_center = {center}\nchi_half_width = {half_width}\nchi_height = {height}"
            );
        }
        ChiFamily::Gaussian {
            center,
            sigma,
            height,
        } => {
            let _ = writeln!(
                out,
                "chi_center = {center}\nchi_sigma = {sigma}\nchi_height = {height}"
            );
        }
        ChiFamily::Linear { intercept, slope } => {
            let _ = writeln!(out, "chi_intercept = {intercept}\nchi_slope = {slope}");
        }
    }
}

fn emit_profile(out: &mut String, p: &ProfileSpec) {
    match p {
        ProfileSpec::Constant { value } => {
            let _ = writeln!(out, "profile = constant\nprofile_value = {value}");
        }
        ProfileSpec::Modes { coeffs } => {
            let _ = writeln!(out, "profile = modes\nprofile_coeffs = {}", fmt_list(coeffs));
        }
    }
}

fn emit_declared(out: &mut String, d: &DeclaredBounds) {
    for (k, v) in [
        ("declared_c_minus_half", d.c_minus_half),
        ("declared_c_zero", d.c_zero),
        ("declared_ess_sup", d.ess_sup),
        ("declared_lipschitz", d.lipschitz),
    ] {
        if let Some(v) = v {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
}

/// The `[kernel]` block describing `spec`.
pub fn emit_kernel(spec: &KernelSpec) -> String {
    let mut out = String::from("[kernel]\n");
    let _ = writeln!(out, "family = {}", spec.family_name());
    match spec {
        KernelSpec::Zero => {}
        KernelSpec::ConstantInState {
            profile,
            chi,
            declared,
        } => {
            emit_profile(&mut out, profile);
            emit_chi(&mut out, chi);
            emit_declared(&mut out, declared);
        }
        KernelSpec::DelaySelective {
            tau,
            sigma,
            profile,
            declared,
        } => {
            match tau {
                TauMap::Constant { value } => {
                    let _ = writeln!(out, "tau = constant\ntau_value = {value}");
                }
                TauMap::Saturating { lo, hi, scale } => {
                    let _ = writeln!(
                        out,
                        "tau = saturating\ntau_lo = {lo}\ntau_hi = {hi}\ntau_scale = {scale}"
                    );
                }
            }
            let _ = writeln!(out, "sigma = {sigma}");
            emit_profile(&mut out, profile);
            emit_declared(&mut out, declared);
        }
        KernelSpec::Synthesized { artifact, declared } => {
            let _ = writeln!(out, "artifact = {artifact}");
            emit_declared(&mut out, declared);
        }
    }
    out
}

/// Writes every field explicitly; `parse_config(&emit(c))` reproduces `c`.
pub fn emit(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command = {}", cfg.command.name());
    if let Some(p) = &cfg.preset {
        let _ = writeln!(out, "preset = {p}");
    }
    let m = &cfg.model;
    let _ = writeln!(
        out,
        "\n[model]\nlength = {}\nmodes = {}\nquad_order = {}\nd = {}\nr = {}\ndt = {}\ntheta_nodes = {}",
        m.length, m.modes, m.quad_order, m.d, m.r, m.dt, m.theta_nodes
    );
    out.push_str("\n[nonlinearity]\n");
    match m.nonlinearity {
        Nonlinearity::NicholsonAbs { p } => {
            let _ = writeln!(out, "kind = nicholson_abs\np = {p}");
        }
        Nonlinearity::Nicholson { p } => {
            let _ = writeln!(out, "kind = nicholson\np = {p}");
        }
        Nonlinearity::Tanh { gain } => {
            let _ = writeln!(out, "kind = tanh\ngain = {gain}");
        }
        Nonlinearity::Zero => out.push_str("kind = zero\n"),
    }
    out.push_str("\n[spatial]\n");
    match m.spatial {
        SpatialKernel::Constant { value } => {
            let _ = writeln!(out, "kind = constant\nvalue = {value}");
        }
        SpatialKernel::Gaussian { alpha } => {
            let _ = writeln!(out, "kind = gaussian\nalpha = {alpha}");
        }
    }
    out.push('\n');
    out.push_str(&emit_kernel(&cfg.kernel));
    out.push_str("\n[initial]\n");
    match &cfg.initial {
        InitialData::Zero => out.push_str("kind = zero\n"),
        InitialData::Modes { coeffs, history } => {
            let h = match history {
                HistoryKind::Constant => "constant",
                HistoryKind::Zero => "zero",
            };
            let _ = writeln!(out, "kind = modes\ncoeffs = {}\nhistory = {h}", fmt_list(coeffs));
        }
        InitialData::Random { radius } => {
            let _ = writeln!(out, "kind = random\nradius = {radius}");
        }
    }
    let _ = writeln!(out, "\n[simulate]\nt_end = {}", cfg.simulate.t_end);
    let s = &cfg.synthesize;
    out.push_str("\n[synthesize]\n");
    if !s.targets.is_empty() {
        let items: Vec<String> = s
            .targets
            .iter()
            .map(|t| {
                if t.is_empty() {
                    "0".to_string()
                } else {
                    t.iter()
                        .map(|(k, a)| format!("{k}:{a}"))
                        .collect::<Vec<_>>()
                        .join("+")
                }
            })
            .collect();
        let _ = writeln!(out, "targets = {}", items.join(", "));
    }
    emit_chi(&mut out, &s.chi);
    let _ = writeln!(
        out,
        "rho = {}\nt_verify = {}\ndrift_tol = {}",
        s.rho, s.t_verify, s.drift_tol
    );
    let c = &cfg.certify;
    let _ = writeln!(
        out,
        "\n[certify]\nn_states = {}\nradius = {}\nn_pairs = {}\ness_grid = {}",
        c.n_states, c.radius, c.n_pairs, c.ess_grid
    );
    let p = &cfg.probe;
    let _ = writeln!(
        out,
        "\n[probe]\nradii = {}\nt_max = {}\nn_members = {}\nt_transient = {}\nt_observe = {}\nensemble_radius = {}",
        fmt_list(&p.radii),
        p.t_max,
        p.n_members,
        p.t_transient,
        p.t_observe,
        p.ensemble_radius
    );
    let _ = writeln!(out, "\n[io]\nout = {}", cfg.io.out);
    if let Some(seed) = cfg.io.seed {
        let _ = writeln!(out, "seed = {seed}");
    }
    let _ = writeln!(out, "dt_refine = {}", cfg.io.dt_refine);
    out
}

/// Minimal config for a preset: `command`, `preset` and a seed.
pub fn preset_template(name: &str, command: Command, seed: u64) -> Result<String> {
    presets::preset(name)?;
    Ok(format!(
        "# {name}\ncommand = {}\npreset = {name}\n\n[io]\nseed = {seed}\n",
        command.name()
    ))
}
