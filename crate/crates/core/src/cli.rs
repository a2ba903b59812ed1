//! Command-line front end: runs a [`RunConfig`] and writes its artifacts.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Command, HistoryKind, InitialData, Overrides, RunConfig};
use crate::diagnostics::{
    attractor_probe, audit_certificates, dissipativity_probe, AttractorSettings, AuditReport,
    CertifiedConstants, DissipativityReport, EnsembleSummary,
};
use crate::error::{Error, Result};
use crate::kernels::{certify_kernel, CertificateReport, KernelSpec, StateSampler};
use crate::phase_space::PhaseState;
use crate::solver::{simulate_from_state, Model, Trajectory};
use crate::spectral::SpectralField;
use crate::synthesis::{
    certify_stationary_kernel, synthesize_model, verify_stationary, KernelArtifact, StationaryReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_AUDIT: i32 = 3;

/// Exit status and the files written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_blowup() {
        EXIT_BLOWUP
    } else {
        EXIT_INVALID
    }
}

/// Audit tolerance at step `dt`; shrinks linearly with `dt`.
pub fn audit_tolerance(dt: f64, r: f64) -> f64 {
    1e-6 * dt / (r / 512.0)
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: PathBuf::from(dir),
            files: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body)?;
        self.files.push(p);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,norm_l2,norm_h1,c1..c_m` with 17 significant digits.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let m = traj.fields.first().map_or(0, SpectralField::len);
    let mut out = String::from("t,norm_l2,norm_h1");
    for k in 1..=m {
        let _ = write!(out, ",c{k}");
    }
    out.push('\n');
    for i in 0..traj.len() {
        out.push_str(&num(traj.times[i]));
        for v in [traj.norm_l2[i], traj.norm_h1[i]]
            .into_iter()
            .chain(traj.fields[i].coeffs().iter().copied())
        {
            out.push(',');
            out.push_str(&num(v));
        }
        out.push('\n');
    }
    out
}

pub fn build_model(cfg: &RunConfig) -> Result<Model> {
    Model::from_spec(cfg.model.clone(), &cfg.kernel)
}

/// The configured initial state.
pub fn initial_state(cfg: &RunConfig, model: &Model) -> Result<PhaseState> {
    let m = cfg.model.modes;
    let quad = model.theta_quadrature();
    Ok(match &cfg.initial {
        InitialData::Zero => PhaseState::zero(m, quad),
        InitialData::Modes { coeffs, history } => {
            let u0 = SpectralField::new(coeffs.clone()).resized(m);
            match history {
                HistoryKind::Constant => PhaseState::stationary(&u0, quad),
                HistoryKind::Zero => PhaseState {
                    v: u0,
                    psi: PhaseState::zero(m, quad).psi,
                },
            }
        }
        InitialData::Random { radius } => {
            let seed = cfg.io.seed.unwrap_or(0);
            StateSampler::new(m, quad)
                .sample_states(1, *radius, seed)
                .pop()
                .expect("one state")
        }
    })
}

fn run_trajectory(cfg: &RunConfig, model: &Model) -> Result<Trajectory> {
    simulate_from_state(model, &initial_state(cfg, model)?, cfg.simulate.t_end)
}

#[derive(Serialize)]
struct SimulateAudit<'a> {
    constants: &'a CertifiedConstants,
    k1: f64,
    absorbing_level: f64,
    steps: usize,
    t_end: f64,
    #[serde(flatten)]
    audit: &'a AuditReport,
}

#[derive(Serialize)]
struct Refinement {
    dts: Vec<f64>,
    /// `‖u_dt(T) - u_{dt/2}(T)‖`
    final_differences: Vec<f64>,
    /// `log2` of successive difference ratios.
    rates: Vec<f64>,
    worst_energy_margins: Vec<f64>,
}

fn cmd_simulate(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let model = build_model(cfg)?;
    let traj = run_trajectory(cfg, &model)?;
    w.text("trajectory.csv", &trajectory_csv(&traj))?;
    let constants = CertifiedConstants::from_model(&model)?;
    let tol = audit_tolerance(cfg.model.dt, cfg.model.r);
    let audit = audit_certificates(&traj, &constants, tol);
    w.json(
        "audit.json",
        &SimulateAudit {
            constants: &constants,
            k1: constants.k1(),
            absorbing_level: constants.absorbing_level(),
            steps: traj.len() - 1,
            t_end: *traj.times.last().unwrap(),
            audit: &audit,
        },
    )?;
    let mut pass = audit.pass;
    if cfg.io.dt_refine > 0 {
        let levels: Vec<f64> = (0..=cfg.io.dt_refine)
            .map(|k| cfg.model.dt / f64::powi(2.0, k as i32))
            .collect();
        let runs = levels
            .par_iter()
            .map(|&dt| {
                let mut c = cfg.clone();
                c.model.dt = dt;
                let model = build_model(&c)?;
                let traj = run_trajectory(&c, &model)?;
                let a = audit_certificates(&traj, &constants, audit_tolerance(dt, c.model.r));
                Ok((traj.last().clone(), a.min_energy, a.pass))
            })
            .collect::<Result<Vec<_>>>()?;
        let diffs: Vec<f64> = runs.windows(2).map(|p| p[0].0.sub(&p[1].0).norm()).collect();
        let rates = diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
        pass &= runs.iter().all(|r| r.2);
        w.json(
            "refinement.json",
            &Refinement {
                dts: levels,
                final_differences: diffs,
                rates,
                worst_energy_margins: runs.iter().map(|r| r.1).collect(),
            },
        )?;
    }
    let summary = format!(
        "simulated {} steps to t = {}; worst audit margin {:.3e} (tol {:.1e})",
        traj.len() - 1,
        traj.times.last().unwrap(),
        audit.worst(),
        tol
    );
    Ok((if pass { EXIT_OK } else { EXIT_AUDIT }, summary))
}

#[derive(Serialize)]
struct StationarySummary {
    target: usize,
    u_st: Vec<f64>,
    residual: f64,
    relative_residual: f64,
    max_drift: f64,
    pass: bool,
}

pub fn certification_text(rep: &CertificateReport) -> String {
    let mut out = format!("kernel family: {}\n", rep.family);
    let _ = writeln!(
        out,
        "{:<14} {:>24} {:>24}  status",
        "constant", "measured", "declared"
    );
    for c in &rep.checks {
        let declared = c.declared.map_or("-".to_string(), num);
        let _ = writeln!(
            out,
            "{:<14} {:>24} {:>24}  {}",
            c.name,
            num(c.measured),
            declared,
            if c.pass { "ok" } else { "VIOLATED" }
        );
    }
    if let Some(p) = rep.p_min {
        let _ = writeln!(out, "p_min          {}", num(p));
    }
    let _ = writeln!(out, "overall: {}", if rep.passed() { "pass" } else { "FAIL" });
    out
}

fn cmd_synthesize(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let s = &cfg.synthesize;
    let targets = s
        .targets
        .iter()
        .map(|t| config::target_field(t, cfg.model.modes))
        .collect::<Result<Vec<_>>>()?;
    let (model, kernel) = synthesize_model(&cfg.model, &targets, &s.chi, s.rho)?;
    let cert = certify_stationary_kernel(
        &kernel,
        model.basis(),
        model.theta_quadrature(),
        &cfg.certify_settings(),
    )?;
    let reports: Vec<StationaryReport> = targets
        .par_iter()
        .map(|u| verify_stationary(&model, u, s.t_verify, s.drift_tol))
        .collect::<Result<_>>()?;

    let mut art = KernelArtifact::from_kernel(&kernel, &cfg.model);
    art.certificate = Some(cert.clone());
    w.json("kernel.json", &art)?;
    w.text("certification.txt", &certification_text(&cert))?;
    let summaries: Vec<StationarySummary> = reports
        .iter()
        .zip(&targets)
        .enumerate()
        .map(|(i, (r, u))| StationarySummary {
            target: i + 1,
            u_st: u.coeffs().to_vec(),
            residual: r.residual,
            relative_residual: r.relative_residual,
            max_drift: r.max_drift,
            pass: r.pass,
        })
        .collect();
    w.json("stationary.json", &summaries)?;

    let mut csv = String::from("t");
    for i in 1..=reports.len() {
        let _ = write!(csv, ",drift_{i}");
    }
    csv.push('\n');
    for (j, t) in reports[0].drift_times.iter().enumerate() {
        csv.push_str(&num(*t));
        for r in &reports {
            csv.push(',');
            csv.push_str(&num(r.drift[j]));
        }
        csv.push('\n');
    }
    w.text("drift.csv", &csv)?;

    let pass = cert.passed() && reports.iter().all(|r| r.pass);
    let worst_drift = reports.iter().map(|r| r.max_drift).fold(0.0, f64::max);
    let worst_res = reports.iter().map(|r| r.relative_residual).fold(0.0, f64::max);
    let summary = format!(
        "synthesized {} targets; worst relative residual {worst_res:.3e}, worst drift {worst_drift:.3e}; certification {}",
        targets.len(),
        if cert.passed() { "pass" } else { "FAIL" }
    );
    Ok((if pass { EXIT_OK } else { EXIT_AUDIT }, summary))
}

fn cmd_certify(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    cfg.model.validate()?;
    let basis = cfg.model.basis()?;
    let quad = cfg.model.theta_quadrature()?;
    let settings = cfg.certify_settings();
    let mut rep = match &cfg.kernel {
        KernelSpec::Synthesized { artifact, declared } => {
            let k = KernelArtifact::load(artifact)?
                .build_kernel(&basis, &quad)?
                .with_declared(declared);
            certify_stationary_kernel(&k, &basis, &quad, &settings)?
        }
        spec => {
            let k = spec.build(&basis, &quad)?;
            certify_kernel(k.as_ref(), &basis, &quad, &settings)?
        }
    };
    rep.c_b = Some(cfg.model.nonlinearity.bound());
    rep.l_b = Some(cfg.model.nonlinearity.lipschitz());
    rep.m_f = Some(cfg.model.spatial.bound());
    w.json("certificate.json", &rep)?;
    let failed: Vec<&str> = rep
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let summary = if failed.is_empty() {
        format!("{} kernel: all declared bounds hold", rep.family)
    } else {
        format!(
            "{} kernel: declared bounds violated: {}",
            rep.family,
            failed.join(", ")
        )
    };
    Ok((if rep.passed() { EXIT_OK } else { EXIT_AUDIT }, summary))
}

#[derive(Serialize)]
struct EntryTime {
    radius: f64,
    entry_time: Option<f64>,
    max_ratio_after_entry: f64,
    status: crate::diagnostics::EntryStatus,
}

#[derive(Serialize)]
struct ProbeJson<'a> {
    constants: &'a CertifiedConstants,
    absorbing_level: f64,
    absorbing_radius_estimate: f64,
    margins: &'a [[f64; 3]],
    entry_times: Vec<EntryTime>,
    ensemble: &'a EnsembleSummary,
    dissipativity: &'a DissipativityReport,
}

fn cmd_probe(cfg: &RunConfig, w: &mut Writer) -> Result<(i32, String)> {
    let model = build_model(cfg)?;
    let seed = cfg.io.seed.expect("validated");
    let constants = CertifiedConstants::from_model(&model)?;
    let p = &cfg.probe;
    let diss = dissipativity_probe(&model, &constants, &p.radii, p.t_max, seed)?;
    let attr = attractor_probe(
        &model,
        &AttractorSettings {
            n_members: p.n_members,
            t_transient: p.t_transient,
            t_observe: p.t_observe,
            radius: p.ensemble_radius,
            seed: seed.wrapping_add(1),
        },
    )?;
    let tol = audit_tolerance(cfg.model.dt, cfg.model.r);
    let margins_ok = attr.margins.iter().flatten().all(|m| *m >= -tol);
    w.json(
        "probe.json",
        &ProbeJson {
            constants: &constants,
            absorbing_level: attr.absorbing_level,
            absorbing_radius_estimate: attr.absorbing_radius_estimate,
            margins: &attr.margins,
            entry_times: diss
                .records
                .iter()
                .map(|r| EntryTime {
                    radius: r.radius,
                    entry_time: r.entry_time,
                    max_ratio_after_entry: r.max_ratio_after_entry,
                    status: r.status,
                })
                .collect(),
            ensemble: &attr.ensemble,
            dissipativity: &diss,
        },
    )?;
    for (i, traj) in attr.trajectories.iter().enumerate() {
        w.text(&format!("member_{:03}.csv", i + 1), &trajectory_csv(traj))?;
    }
    let pass = diss.pass() && margins_ok;
    let summary = format!(
        "absorbing level {:.6}; entry times {:?}; terminal diameter {:.3e}; contained: {}",
        diss.level,
        diss.records.iter().map(|r| r.entry_time).collect::<Vec<_>>(),
        attr.ensemble.terminal_diameter,
        attr.ensemble.contained_in_ball
    );
    Ok((if pass { EXIT_OK } else { EXIT_AUDIT }, summary))
}

/// Runs the configured command, writing artifacts under `cfg.io.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer::new(&cfg.io.out)?;
    let (exit_code, summary) = match cfg.command {
        Command::Simulate => cmd_simulate(cfg, &mut w)?,
        Command::Synthesize => cmd_synthesize(cfg, &mut w)?,
        Command::Certify => cmd_certify(cfg, &mut w)?,
        Command::Probe => cmd_probe(cfg, &mut w)?,
    };
    Ok(Outcome {
        exit_code,
        files: w.files,
        summary,
    })
}

#[derive(Parser, Debug)]
#[command(
    name = "statedelay",
    version,
    about = "Simulate, synthesize, certify and probe reaction-diffusion equations with state-dependent distributed delay"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Run a trajectory and audit the a-priori estimates
    Simulate(RunArgs),
    /// Build a kernel with prescribed stationary solutions
    Synthesize(RunArgs),
    /// Check a kernel's declared constants against sampled values
    Certify(RunArgs),
    /// Dissipativity and attractor probes
    Probe(RunArgs),
    /// Print a starter configuration for a preset
    Template {
        preset: String,
        #[arg(long, default_value = "simulate")]
        command: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of dyadic time-step refinements to run
    #[arg(long)]
    dt_refine: Option<usize>,
}

fn load(path: &Path, command: Command, args: &RunArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    config::parse_config_with(
        &text,
        &Overrides {
            command: Some(command),
            out: args.out.clone(),
            seed: args.seed,
            dt_refine: args.dt_refine,
        },
    )
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Synthesize(a) => (Command::Synthesize, a),
        Sub::Certify(a) => (Command::Certify, a),
        Sub::Probe(a) => (Command::Probe, a),
        Sub::Template {
            preset,
            command,
            seed,
        } => {
            let Some(cmd) = Command::parse(&command) else {
                eprintln!("error: unknown command {command:?}");
                return EXIT_INVALID;
            };
            return match config::preset_template(&preset, cmd, seed) {
                Ok(t) => {
                    print!("{t}");
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INVALID
                }
            };
        }
    };
    let cfg = match load(&args.config, command, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return EXIT_INVALID;
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.exit_code == EXIT_AUDIT {
                eprintln!("audit failed");
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
