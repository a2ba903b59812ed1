//! Reference oracle, a-priori estimate audits and long-time probes.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::StateSampler;
use crate::phase_space::PhaseState;
use crate::solver::{simulate_from_state, simulate_with_snapshots, Model, Simulator, Trajectory};
use crate::spectral::SpectralField;

/// One delayed feedback term `coeff·g(y(t - lag))` with `lag ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayTerm {
    pub lag: f64,
    pub coeff: f64,
}

/// Dense output of [`method_of_steps_oracle`]: nodes, values and derivatives
/// with cubic Hermite interpolation in between.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl DenseSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("at least one node")
    }

    /// `y(t)` for `0 ≤ t ≤ t_end`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }
}

/// Brute-force solver for the scalar delay equation
/// `y' = -a·y + Σ_i c_i·g(y(t - τ_i))`, `y = φ` on `[-max τ, 0)`, `y(0) = y0`.
///
/// The time axis is cut into segments whose length is the smallest positive
/// lag; on each segment the equation is an ordinary ODE in `y` (lag-zero terms
/// stay implicit in the current value) and is integrated with classical RK4
/// at step `h`, reading delayed values from the dense output already built.
pub fn method_of_steps_oracle(
    rate: f64,
    terms: &[DelayTerm],
    history: &dyn Fn(f64) -> f64,
    y0: f64,
    feedback: &dyn Fn(f64) -> f64,
    t_end: f64,
    h: f64,
) -> Result<DenseSolution> {
    if !(h > 0.0) || !(t_end > 0.0) {
        return Err(Error::config("oracle step and horizon must be positive"));
    }
    if terms.iter().any(|t| !(t.lag >= 0.0)) {
        return Err(Error::config("oracle lags must be non-negative"));
    }
    let seg = terms
        .iter()
        .map(|t| t.lag)
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min)
        .min(t_end);
    if h > seg {
        return Err(Error::config("oracle step exceeds the smallest positive lag"));
    }

    let n_seg = (seg / h).ceil().max(1.0);
    let hs = seg / n_seg;

    let mut sol = DenseSolution {
        times: vec![0.0],
        values: vec![y0],
        slopes: vec![0.0],
    };
    // g(y(s)) memoized on the half-step grid, where delayed arguments land
    // whenever the lags are multiples of the smallest one
    let mut memo: HashMap<i64, f64> = HashMap::new();
    let mut delayed = |sol: &DenseSolution, s: f64| {
        let key = (2.0 * s / hs).round();
        let on_grid = (2.0 * s / hs - key).abs() < 1e-7;
        let compute = |s: f64| feedback(if s < 0.0 { history(s) } else { sol.eval(s) });
        if on_grid {
            *memo.entry(key as i64).or_insert_with(|| compute(s))
        } else {
            compute(s)
        }
    };
    let mut rhs = |sol: &DenseSolution, t: f64, y: f64| {
        let mut acc = -rate * y;
        for term in terms {
            if term.coeff == 0.0 {
                continue;
            }
            let g = if term.lag == 0.0 {
                feedback(y)
            } else {
                delayed(sol, t - term.lag)
            };
            acc += term.coeff * g;
        }
        acc
    };
    sol.slopes[0] = rhs(&sol, 0.0, y0);

    let mut seg_start = 0.0;
    while seg_start < t_end - 1e-12 * t_end {
        let seg_end = (seg_start + seg).min(t_end);
        let n = ((seg_end - seg_start) / hs - 1e-9).ceil().max(1.0) as usize;
        for i in 0..n {
            let t = seg_start + i as f64 * hs;
            let t_next = if i + 1 == n { seg_end } else { t + hs };
            let hi = t_next - t;
            let y = *sol.values.last().unwrap();
            let k1 = rhs(&sol, t, y);
            let k2 = rhs(&sol, t + 0.5 * hi, y + 0.5 * hi * k1);
            let k3 = rhs(&sol, t + 0.5 * hi, y + 0.5 * hi * k2);
            let k4 = rhs(&sol, t_next, y + hi * k3);
            let y_next = y + hi / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !y_next.is_finite() {
                return Err(Error::Blowup {
                    time: t_next,
                    detail: "oracle solution is not finite".into(),
                });
            }
            sol.times.push(t_next);
            sol.values.push(y_next);
            sol.slopes.push(0.0);
            let slope = rhs(&sol, t_next, y_next);
            *sol.slopes.last_mut().unwrap() = slope;
        }
        seg_start = seg_end;
    }
    Ok(sol)
}

/// Constants entering the a-priori estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedConstants {
    pub c_b: f64,
    pub m_f: f64,
    pub length: f64,
    /// `C_{ξ,-1/2}`
    pub c_xi_minus_half: f64,
    /// `C_{ξ,0}`
    pub c_xi_zero: f64,
    pub lambda1: f64,
    pub d: f64,
}

impl CertifiedConstants {
    /// Reads `C_b`, `M_f` from `b`, `f` and the `ξ` constants from the kernel's declared bounds.
    pub fn from_model(model: &Model) -> Result<Self> {
        let cfg = model.config();
        let declared = model.kernel().declared_bounds();
        let (Some(mh), Some(z)) = (declared.c_minus_half, declared.c_zero) else {
            return Err(Error::config(format!(
                "kernel family {} declares no integral bounds",
                model.kernel().family()
            )));
        };
        Ok(Self {
            c_b: cfg.nonlinearity.bound(),
            m_f: cfg.spatial.bound(),
            length: cfg.length,
            c_xi_minus_half: mh,
            c_xi_zero: z,
            lambda1: model.basis().lambda1(),
            d: cfg.d,
        })
    }

    /// `|⟨F, v⟩| ≤ C·‖A^{1/2}v‖`
    pub fn pairing_h1(&self) -> f64 {
        self.c_b * self.m_f * self.length * self.c_xi_minus_half
    }

    /// `|⟨F, v⟩| ≤ C·‖v‖`
    pub fn pairing_l2(&self) -> f64 {
        self.c_b * self.m_f * self.length * self.c_xi_zero
    }

    /// `k̃₁`
    pub fn k1(&self) -> f64 {
        self.pairing_h1().powi(2)
    }

    /// `k̃₁ / (λ₁ + 2d)`, the asymptotic bound on `‖u‖²`.
    pub fn absorbing_level(&self) -> f64 {
        self.k1() / (self.lambda1 + 2.0 * self.d)
    }
}

/// Margins `RHS - LHS` of the three a-priori inequalities along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub tol: f64,
    /// `‖u⁰‖² + k̃₁ t - ‖u(t)‖² - ∫₀^t (‖A^{1/2}u‖² + 2d‖u‖²)` at every time.
    pub energy: Vec<f64>,
    /// `C‖A^{1/2}u‖ - |⟨F, u⟩|` at every step start.
    pub pairing_h1: Vec<f64>,
    /// `C₀‖u‖ - |⟨F, u⟩|` at every step start.
    pub pairing_l2: Vec<f64>,
    pub min_energy: f64,
    pub min_pairing_h1: f64,
    pub min_pairing_l2: f64,
    pub pass: bool,
}

impl AuditReport {
    pub fn worst(&self) -> f64 {
        self.min_energy.min(self.min_pairing_h1).min(self.min_pairing_l2)
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Checks the energy estimate and both pairing bounds along `traj`.
pub fn audit_certificates(traj: &Trajectory, constants: &CertifiedConstants, tol: f64) -> AuditReport {
    let k1 = constants.k1();
    let u0_sq = traj.norm_l2[0].powi(2);
    let energy: Vec<f64> = traj
        .times
        .iter()
        .zip(traj.energy_functional())
        .map(|(t, chi)| u0_sq + k1 * t - chi)
        .collect();
    let c8 = constants.pairing_h1();
    let c19 = constants.pairing_l2();
    let pairing_h1: Vec<f64> = traj
        .pairing
        .iter()
        .zip(&traj.norm_h1)
        .map(|(p, n)| c8 * n - p.abs())
        .collect();
    let pairing_l2: Vec<f64> = traj
        .pairing
        .iter()
        .zip(&traj.norm_l2)
        .map(|(p, n)| c19 * n - p.abs())
        .collect();
    let min_energy = min_of(&energy);
    let min_pairing_h1 = min_of(&pairing_h1);
    let min_pairing_l2 = min_of(&pairing_l2);
    let ok = |m: f64| m.is_finite() && m >= -tol || m == f64::INFINITY;
    AuditReport {
        tol,
        pass: ok(min_energy) && ok(min_pairing_h1) && ok(min_pairing_l2),
        energy,
        pairing_h1,
        pairing_l2,
        min_energy,
        min_pairing_h1,
        min_pairing_l2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    /// Entered the ball and stayed below the exit level.
    Entered,
    /// Entered, then later exceeded the exit level.
    Exited,
    /// No entry before the horizon.
    Inconclusive,
    /// `k̃₁ = 0`: the solution decays at least at the linear rate.
    DecayVerified,
    DecayViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub radius: f64,
    pub entry_time: Option<f64>,
    /// Largest `‖u‖² / level` after entry.
    pub max_ratio_after_entry: f64,
    pub status: EntryStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub level: f64,
    pub entry_factor: f64,
    pub exit_factor: f64,
    pub horizon: f64,
    pub records: Vec<EntryRecord>,
}

impl DissipativityReport {
    /// No record failed; inconclusive runs do not count as failures.
    pub fn pass(&self) -> bool {
        self.records
            .iter()
            .all(|r| !matches!(r.status, EntryStatus::Exited | EntryStatus::DecayViolated))
    }

    /// Entry times are non-decreasing in the initial radius.
    pub fn monotone(&self) -> bool {
        let mut recs: Vec<&EntryRecord> = self.records.iter().collect();
        recs.sort_by(|a, b| a.radius.total_cmp(&b.radius));
        recs.windows(2).all(|w| match (w[0].entry_time, w[1].entry_time) {
            (Some(a), Some(b)) => a <= b,
            (_, None) => true,
            (None, Some(_)) => false,
        })
    }
}

pub const ENTRY_FACTOR: f64 = 1.05;
pub const EXIT_FACTOR: f64 = 1.10;

/// Initial state with `‖v‖ = radius`: a seeded random unit direction (the same
/// for every radius) with its history scaled alike.
pub fn scaled_random_state(model: &Model, radius: f64, seed: u64) -> PhaseState {
    let sampler = StateSampler::new(model.config().modes, model.theta_quadrature());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = sampler.random_unit_state(&mut rng);
    let s = radius / dir.v.norm();
    let entries = dir.psi.entries().map(|(t, u)| (*t, u.scaled(s))).collect();
    PhaseState {
        v: dir.v.scaled(s),
        psi: crate::phase_space::HistorySegment::from_entries(dir.r(), entries).expect("times are unchanged"),
    }
}

/// Time for the solution to enter `‖u‖² ≤ 1.05·k̃₁/(λ₁ + 2d)` from data of each radius.
pub fn dissipativity_probe(
    model: &Model,
    constants: &CertifiedConstants,
    radii: &[f64],
    t_max: f64,
    seed: u64,
) -> Result<DissipativityReport> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::config("probe radii must be positive"));
    }
    if !(t_max > 0.0) {
        return Err(Error::config("probe horizon must be positive"));
    }
    let level = constants.absorbing_level();
    let decay = constants.lambda1 + constants.d;
    let records = radii
        .par_iter()
        .enumerate()
        .map(|(i, &radius)| {
            let state = scaled_random_state(model, radius, seed);
            let mut sim = Simulator::from_state(model, &state).map_err(|e| Error::Member {
                member: i,
                source: Box::new(e),
            })?;
            let u0 = state.v.norm();
            let mut entry = if level > 0.0 && u0 * u0 <= ENTRY_FACTOR * level {
                Some(0.0)
            } else {
                None
            };
            let mut max_ratio: f64 = if entry.is_some() { u0 * u0 / level } else { 0.0 };
            let mut decay_ok = true;
            while sim.time() < t_max - 1e-9 * model.config().dt {
                sim.step().map_err(|e| Error::Member {
                    member: i,
                    source: Box::new(e),
                })?;
                let n = sim.current().norm();
                let t = sim.time();
                if level > 0.0 {
                    if entry.is_none() && n * n <= ENTRY_FACTOR * level {
                        entry = Some(t);
                    }
                    if entry.is_some() {
                        max_ratio = max_ratio.max(n * n / level);
                    }
                } else if n > u0 * (-decay * t).exp() * (1.0 + 1e-8) {
                    decay_ok = false;
                }
            }
            let status = if level == 0.0 {
                if decay_ok {
                    EntryStatus::DecayVerified
                } else {
                    EntryStatus::DecayViolated
                }
            } else if entry.is_none() {
                EntryStatus::Inconclusive
            } else if max_ratio > EXIT_FACTOR {
                EntryStatus::Exited
            } else {
                EntryStatus::Entered
            };
            Ok(EntryRecord {
                radius,
                entry_time: if level == 0.0 { None } else { entry },
                max_ratio_after_entry: max_ratio,
                status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DissipativityReport {
        level,
        entry_factor: ENTRY_FACTOR,
        exit_factor: EXIT_FACTOR,
        horizon: t_max,
        records,
    })
}

/// Ensemble settings for [`attractor_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorSettings {
    pub n_members: usize,
    pub t_transient: f64,
    pub t_observe: f64,
    /// Initial states are drawn from the H-ball of this radius.
    pub radius: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_members: usize,
    pub t_first: f64,
    pub t_terminal: f64,
    /// Largest pairwise H-distance at the terminal time.
    pub terminal_diameter: f64,
    /// Row-major upper triangle of terminal pairwise distances.
    pub pairwise_terminal_distances: Vec<f64>,
    /// `sup_{b ∈ terminal} inf_{a ∈ first} dist(a, b)`
    pub hausdorff_semidistance: f64,
    pub max_terminal_norm_sq: f64,
    pub contained_in_ball: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub constants: CertifiedConstants,
    pub absorbing_level: f64,
    pub absorbing_radius_estimate: f64,
    pub ensemble: EnsembleSummary,
    /// Worst audit margins per member: `[energy, pairing_h1, pairing_l2]`.
    pub margins: Vec<[f64; 3]>,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

/// Evolves an ensemble from seeded random states in the ball of `settings.radius`.
pub fn attractor_probe(model: &Model, settings: &AttractorSettings) -> Result<ProbeReport> {
    if settings.n_members < 2 {
        return Err(Error::config("an ensemble needs at least two members"));
    }
    let sampler = StateSampler::new(model.config().modes, model.theta_quadrature());
    let states = sampler.sample_states(settings.n_members, settings.radius, settings.seed);
    attractor_probe_from(model, &states, settings)
}

/// [`attractor_probe`] from given initial states.
pub fn attractor_probe_from(
    model: &Model,
    initial: &[PhaseState],
    settings: &AttractorSettings,
) -> Result<ProbeReport> {
    if initial.len() < 2 {
        return Err(Error::config("an ensemble needs at least two members"));
    }
    if !(settings.t_observe > 0.0) || settings.t_transient < 0.0 {
        return Err(Error::config("observation window must be positive"));
    }
    let constants = CertifiedConstants::from_model(model)?;
    let quad = model.theta_quadrature();
    let t1 = settings.t_transient + settings.t_observe;
    let t2 = settings.t_transient + 2.0 * settings.t_observe;
    let runs = initial
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let wrap = |e| Error::Member {
                member: i,
                source: Box::new(e),
            };
            let (traj, mut snaps) = simulate_with_snapshots(model, s, t2, &[t1, t2]).map_err(wrap)?;
            let terminal = snaps.pop().expect("two snapshots");
            let first = snaps.pop().expect("two snapshots");
            let audit = audit_certificates(&traj, &constants, 0.0);
            Ok((
                first,
                terminal,
                [audit.min_energy, audit.min_pairing_h1, audit.min_pairing_l2],
                traj,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let firsts: Vec<&PhaseState> = runs.iter().map(|r| &r.0).collect();
    let terminals: Vec<&PhaseState> = runs.iter().map(|r| &r.1).collect();
    let mut pairwise = Vec::new();
    for i in 0..terminals.len() {
        for j in i + 1..terminals.len() {
            pairwise.push(terminals[i].h_distance(terminals[j], quad));
        }
    }
    let hausdorff = terminals
        .iter()
        .map(|b| {
            firsts
                .iter()
                .map(|a| a.h_distance(b, quad))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let max_terminal_norm_sq = terminals.iter().map(|s| s.v.norm_sq()).fold(0.0, f64::max);
    let level = constants.absorbing_level();
    Ok(ProbeReport {
        absorbing_level: level,
        absorbing_radius_estimate: (ENTRY_FACTOR * level).sqrt(),
        ensemble: EnsembleSummary {
            n_members: terminals.len(),
            t_first: t1,
            t_terminal: t2,
            terminal_diameter: pairwise.iter().copied().fold(0.0, f64::max),
            pairwise_terminal_distances: pairwise,
            hausdorff_semidistance: hausdorff,
            max_terminal_norm_sq,
            contained_in_ball: max_terminal_norm_sq <= ENTRY_FACTOR * level,
        },
        margins: runs.iter().map(|r| r.2).collect(),
        trajectories: runs.into_iter().map(|r| r.3).collect(),
        constants,
    })
}

/// Response of the solution to perturbations of the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub eps: Vec<f64>,
    /// `sup_t ‖u^ε(t) - u(t)‖`
    pub response: Vec<f64>,
    /// `response[i] / response[i + 1]`
    pub ratios: Vec<f64>,
}

/// Runs the model from `base + ε·direction` for each `ε` and compares with the run from `base`.
pub fn continuous_dependence(
    model: &Model,
    base: &PhaseState,
    direction: &PhaseState,
    eps: &[f64],
    t_end: f64,
) -> Result<DependenceReport> {
    let reference = simulate_from_state(model, base, t_end)?;
    let response = eps
        .par_iter()
        .map(|&e| {
            let perturbed = PhaseState {
                v: base.v.add(&direction.v.scaled(e)),
                psi: crate::phase_space::HistorySegment::from_entries(
                    base.r(),
                    base.psi
                        .entries()
                        .zip(direction.psi.entries())
                        .map(|((t, a), (_, b))| (*t, a.add(&b.scaled(e))))
                        .collect(),
                )?,
            };
            Ok(simulate_from_state(model, &perturbed, t_end)?.sup_distance(&reference))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios = response.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(DependenceReport {
        eps: eps.to_vec(),
        response,
        ratios,
    })
}

/// `‖u^m(T) - u^{2m}(T)‖` with the coarse solution padded by zeros.
pub fn self_convergence(
    build: &(dyn Fn(usize) -> Result<Model> + Sync),
    u0: &(dyn Fn(usize) -> SpectralField + Sync),
    modes: &[usize],
    t_end: f64,
) -> Result<Vec<f64>> {
    modes
        .par_iter()
        .map(|&m| {
            let coarse_model = build(m)?;
            let fine_model = build(2 * m)?;
            let a = u0(m);
            let b = u0(2 * m);
            let ca = a.clone();
            let cb = b.clone();
            let coarse = crate::solver::simulate(&coarse_model, &a, &move |_| ca.clone(), t_end)?;
            let fine = crate::solver::simulate(&fine_model, &b, &move |_| cb.clone(), t_end)?;
            Ok(coarse.last().resized(2 * m).sub(fine.last()).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_pure_decay() {
        let sol = method_of_steps_oracle(
            2.0,
            &[DelayTerm { lag: 0.5, coeff: 1.0 }],
            &|_| 3.0,
            1.5,
            &|_| 0.0,
            3.0,
            1e-3,
        )
        .unwrap();
        for t in [0.0, 0.3, 1.234, 3.0] {
            assert!((sol.eval(t) - 1.5 * (-2.0 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_constant_feedback_is_linear() {
        let sol = method_of_steps_oracle(
            0.0,
            &[DelayTerm { lag: 1.0, coeff: 1.0 }],
            &|_| 0.0,
            0.5,
            &|_| 0.75,
            1.0,
            1e-2,
        )
        .unwrap();
        for t in [0.0, 0.25, 0.61, 1.0] {
            assert!((sol.eval(t) - (0.5 + 0.75 * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn oracle_matches_step_solution_of_linear_delay_equation() {
        // y' = -y(t-1), y = 1 on [-1, 0]: y = 1 - t on [0,1], 1 - t + (t-1)²/2 on [1,2]
        let sol = method_of_steps_oracle(
            0.0,
            &[DelayTerm {
                lag: 1.0,
                coeff: -1.0,
            }],
            &|_| 1.0,
            1.0,
            &|y| y,
            2.0,
            1e-3,
        )
        .unwrap();
        for t in [0.5f64, 1.0, 1.5, 2.0] {
            let exact = if t <= 1.0 {
                1.0 - t
            } else {
                1.0 - t + (t - 1.0).powi(2) / 2.0
            };
            assert!((sol.eval(t) - exact).abs() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn oracle_rejects_bad_input() {
        let g = |y: f64| y;
        assert!(method_of_steps_oracle(
            1.0,
            &[DelayTerm {
                lag: -0.1,
                coeff: 1.0
            }],
            &|_| 0.0,
            0.0,
            &g,
            1.0,
            1e-3
        )
        .is_err());
        assert!(method_of_steps_oracle(
            1.0,
            &[DelayTerm {
                lag: 0.01,
                coeff: 1.0
            }],
            &|_| 0.0,
            0.0,
            &g,
            1.0,
            0.1
        )
        .is_err());
    }

    #[test]
    fn zero_trajectory_margins_equal_constants() {
        let traj = Trajectory {
            dt: 0.5,
            times: vec![0.0, 0.5, 1.0],
            fields: vec![SpectralField::zeros(2); 3],
            norm_l2: vec![0.0; 3],
            norm_h1: vec![0.0; 3],
            dissipation: vec![0.0; 3],
            pairing: vec![0.0; 2],
        };
        let c = CertifiedConstants {
            c_b: 2.0,
            m_f: 1.0,
            length: 1.0,
            c_xi_minus_half: 0.5,
            c_xi_zero: 1.0,
            lambda1: 1.0,
            d: 1.0,
        };
        let rep = audit_certificates(&traj, &c, 0.0);
        assert!(rep.pass);
        assert_eq!(rep.energy, vec![0.0, 0.5, 1.0]);
        assert!(rep.pairing_h1.iter().all(|m| *m == 0.0));
    }
}
