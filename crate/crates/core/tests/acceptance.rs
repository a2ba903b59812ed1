//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::{E, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use statedelay::diagnostics::{
    audit_certificates, continuous_dependence, dissipativity_probe, method_of_steps_oracle, self_convergence,
    CertifiedConstants, DelayTerm, EntryStatus,
};
use statedelay::kernels::StateSampler;
use statedelay::presets::{nicholson_constant_f, nicholson_gaussian_f, preset_model};
use statedelay::solver::simulate_from_state;
use statedelay::synthesis::{certify_stationary_kernel, synthesize_model, verify_stationary};
use statedelay::{
    certify_kernel, eval_f, simulate, CertificateReport, CertifySettings, ChiFamily, DeclaredBounds,
    KernelSpec, Model, ModelConfig, Nonlinearity, PhaseState, ProfileSpec, SpatialKernel, SpectralField,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn nicholson(dt: Option<f64>) -> Model {
    preset_model("nicholson_constant_f", None, dt).expect("preset builds")
}

/// `k̃₁` from first principles for the constant-f preset: `C_b = p/e`, `M_f = 1`, `L = 1`.
fn k1_from_parameters(model: &Model) -> f64 {
    let c_xi = model
        .kernel()
        .declared_bounds()
        .c_minus_half
        .expect("preset kernel declares C_{-1/2}");
    (40.0 / E * 1.0 * 1.0 * c_xi).powi(2)
}

fn unit_ball_states(model: &Model, n: usize, seed: u64) -> Vec<PhaseState> {
    StateSampler::new(model.config().modes, model.theta_quadrature()).sample_states(n, 1.0, seed)
}

fn worst_energy_margin(model: &Model, states: &[PhaseState], t_end: f64) -> (f64, f64) {
    let k1 = k1_from_parameters(model);
    let mut worst = f64::INFINITY;
    let mut worst_positive_t = f64::INFINITY;
    for s in states {
        let traj = simulate_from_state(model, s, t_end).expect("run completes");
        let u0 = traj.norm_l2[0].powi(2);
        for (i, (t, chi)) in traj.times.iter().zip(traj.energy_functional()).enumerate() {
            let margin = u0 + k1 * t - chi;
            worst = worst.min(margin);
            if i > 0 {
                worst_positive_t = worst_positive_t.min(margin);
            }
        }
    }
    (worst, worst_positive_t)
}

fn criterion_1() -> Outcome {
    let t_end = 5.0;
    let coarse = nicholson(Some(1.0 / 512.0));
    let fine = nicholson(Some(1.0 / 1024.0));
    let states = unit_ball_states(&coarse, 20, 2024);
    let (worst_c, pos_c) = worst_energy_margin(&coarse, &states, t_end);
    let (_, pos_f) = worst_energy_margin(&fine, &states, t_end);
    let deficit_c = (-pos_c).max(0.0);
    let deficit_f = (-pos_f).max(0.0);
    let refine_ok = deficit_f <= 0.5 * deficit_c + 1e-12;

    let constants = CertifiedConstants::from_model(&coarse).unwrap();
    let mut wrong = constants.clone();
    wrong.c_xi_minus_half /= 10f64.sqrt();
    let inverted_fails = states.iter().take(3).all(|s| {
        let traj = simulate_from_state(&coarse, s, t_end).unwrap();
        !audit_certificates(&traj, &wrong, 1e-6).pass
    });
    Outcome {
        pass: worst_c >= -1e-6 && refine_ok && inverted_fails,
        detail: format!(
            "worst margin {worst_c:.3e} at dt=r/512; deficit {deficit_c:.3e} -> {deficit_f:.3e} under halving; k1/10 audit fails: {inverted_fails}"
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut total = 0;
    for (name, seed) in [("nicholson_constant_f", 11u64), ("nicholson_gaussian_f", 12)] {
        let model = preset_model(name, None, None).unwrap();
        let c = CertifiedConstants::from_model(&model).unwrap();
        let basis = model.basis();
        let sampler = StateSampler::new(model.config().modes, model.theta_quadrature());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            let state = sampler.random_state(&mut rng, 10.0);
            let scale = 10f64.powf(rng.random_range(-2.0..2.0));
            let v = sampler.random_field(&mut rng).scaled(scale);
            let f = eval_f(&state, &model).unwrap();
            let pairing = f.dot(&v).abs();
            let rhs_h1 = c.pairing_h1() * basis.fractional_norm(&v, 0.5);
            let rhs_l2 = c.pairing_l2() * v.norm();
            worst_ratio = worst_ratio.max(pairing / rhs_h1).max(pairing / rhs_l2);
            if pairing > rhs_h1 || pairing > rhs_l2 {
                violations += 1;
            }
            total += 1;
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in {total} pairs; worst |<F,v>|/bound {worst_ratio:.3}"),
    }
}

fn oracle_model(dt: f64, chi: &ChiFamily) -> Model {
    let cfg = ModelConfig {
        length: 1.0,
        modes: 1,
        quad_order: 32,
        d: 1.0,
        r: 1.0,
        dt,
        theta_nodes: 32,
        nonlinearity: Nonlinearity::Tanh { gain: 1.0 },
        spatial: SpatialKernel::Constant { value: 1.0 },
    };
    let spec = KernelSpec::ConstantInState {
        profile: ProfileSpec::Modes { coeffs: vec![1.0] },
        chi: chi.clone(),
        declared: DeclaredBounds::default(),
    };
    Model::from_spec(cfg, &spec).unwrap()
}

fn criterion_3() -> Outcome {
    let r = 1.0;
    let amp = 1e-3;
    let chi = ChiFamily::Bump {
        center: -0.5,
        half_width: 0.3,
        height: 1.0,
    };
    let e1 = |x: f64| 2f64.sqrt() * (PI * x).sin();
    // ξ = χ(θ)e₁(x) projected back on e₁ contributes ∫e₁² = 1
    let mass_e1 = simpson(|x| e1(x) * e1(x), 0.0, 1.0, 2000);
    // trapezoid delay nodes on [-r, 0], endpoints included
    let n = 32;
    let h = r / (n - 1) as f64;
    let terms: Vec<DelayTerm> = (0..n)
        .map(|j| {
            let theta = -r + j as f64 * h;
            let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
            DelayTerm {
                lag: -theta,
                coeff: w * chi.eval(theta) * mass_e1,
            }
        })
        .collect();
    let feedback = |y: f64| simpson(|x| (y * e1(x)).tanh(), 0.0, 1.0, 200);
    let t_end = 3.0 * r;
    let oracle =
        method_of_steps_oracle(PI * PI + 1.0, &terms, &|_| amp, amp, &feedback, t_end, r / 4096.0).unwrap();

    let diff_at = |dt: f64| {
        let model = oracle_model(dt, &chi);
        let u0 = SpectralField::new(vec![amp]);
        let traj = simulate(&model, &u0, &|_| SpectralField::new(vec![amp]), t_end).unwrap();
        traj.times
            .iter()
            .zip(&traj.fields)
            .map(|(t, u)| (u.coeffs()[0] - oracle.eval(*t)).abs())
            .fold(0.0, f64::max)
    };
    let d512 = diff_at(r / 512.0);
    let d1024 = diff_at(r / 1024.0);
    let ratio = d512 / d1024;
    Outcome {
        pass: d1024 < 1e-6 && (1.6..=2.5).contains(&ratio),
        detail: format!("sup diff {d512:.3e} (r/512), {d1024:.3e} (r/1024); ratio {ratio:.3}"),
    }
}

fn criterion_4() -> Outcome {
    let (cfg, _) = nicholson_constant_f();
    let cfg = cfg.with_dt(1.0 / 1024.0);
    let amplitudes = [0.5, 1.0, 2.0];
    let targets: Vec<SpectralField> = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &s)| SpectralField::mode(cfg.modes, i + 1, s))
        .collect();
    let (model, _) = synthesize_model(&cfg, &targets, &ChiFamily::Constant { value: 1.0 }, 0.5).unwrap();
    let mut worst_res: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut ok = true;
    for (k, u) in targets.iter().enumerate() {
        // (A + d) u_st from λ_k = (kπ/L)²
        let lam = ((k + 1) as f64 * PI).powi(2);
        let mut lhs = SpectralField::zeros(cfg.modes);
        lhs.coeffs_mut()[k] = (lam + cfg.d) * amplitudes[k];
        let f = eval_f(&PhaseState::stationary(u, model.theta_quadrature()), &model).unwrap();
        let diff = lhs.sub(&f);
        let res: f64 = diff
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, c)| c * c / ((j + 1) as f64 * PI).powi(2))
            .sum::<f64>()
            .sqrt();
        let rep = verify_stationary(&model, u, 10.0 * cfg.r, 1e-4).unwrap();
        worst_res = worst_res.max(res);
        worst_drift = worst_drift.max(rep.max_drift);
        ok &= res < 1e-8 && rep.max_drift < 1e-4;
    }
    Outcome {
        pass: ok,
        detail: format!("worst residual {worst_res:.3e}; worst drift over 10r {worst_drift:.3e}"),
    }
}

fn criterion_5() -> Outcome {
    let model = nicholson(None);
    let sampler = StateSampler::new(model.config().modes, model.theta_quadrature());
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let base = sampler.random_state(&mut rng, 1.0);
    let direction = sampler.random_unit_state(&mut rng);
    let rep = continuous_dependence(&model, &base, &direction, &[1e-2, 1e-3, 1e-4], 5.0).unwrap();
    let zero = continuous_dependence(&model, &base, &direction, &[0.0], 5.0).unwrap();
    let ratios_ok = rep.ratios.iter().all(|q| (8.0..=12.0).contains(q));
    let zero_ok = zero.response[0] < 1e-12;
    Outcome {
        pass: ratios_ok && zero_ok,
        detail: format!(
            "ratios {:?}; eps=0 response {:.1e}",
            rep.ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>(),
            zero.response[0]
        ),
    }
}

fn criterion_6() -> Outcome {
    let model = nicholson(None);
    let constants = CertifiedConstants::from_model(&model).unwrap();
    let rep = dissipativity_probe(&model, &constants, &[1.0, 10.0, 100.0], 50.0, 7).unwrap();
    let all_entered = rep.records.iter().all(|r| r.status == EntryStatus::Entered);
    let entries: Vec<String> = rep
        .records
        .iter()
        .map(|r| match r.entry_time {
            Some(t) => format!("{t:.3}"),
            None => "none".into(),
        })
        .collect();
    let worst_after = rep
        .records
        .iter()
        .map(|r| r.max_ratio_after_entry)
        .fold(0.0, f64::max);
    Outcome {
        pass: all_entered && rep.pass() && rep.monotone() && worst_after <= 1.10,
        detail: format!(
            "level {:.4}; entry times {entries:?}; max |u|^2/level after entry {worst_after:.4}",
            rep.level
        ),
    }
}

fn shrink(d: &DeclaredBounds, m: &statedelay::kernels::MeasuredConstants) -> DeclaredBounds {
    let cut = |declared: Option<f64>, measured: f64| {
        if measured > 0.0 {
            Some(measured / 10.0)
        } else {
            declared
        }
    };
    DeclaredBounds {
        c_minus_half: cut(d.c_minus_half, m.c_minus_half),
        c_zero: cut(d.c_zero, m.c_zero),
        ess_sup: cut(d.ess_sup, m.ess_sup),
        lipschitz: cut(d.lipschitz, m.lipschitz),
    }
}

fn with_declared(spec: &KernelSpec, declared: DeclaredBounds) -> KernelSpec {
    match spec.clone() {
        KernelSpec::ConstantInState { profile, chi, .. } => KernelSpec::ConstantInState {
            profile,
            chi,
            declared,
        },
        KernelSpec::DelaySelective {
            tau, sigma, profile, ..
        } => KernelSpec::DelaySelective {
            tau,
            sigma,
            profile,
            declared,
        },
        other => other,
    }
}

fn sound(rep: &CertificateReport) -> bool {
    let m = &rep.measured;
    let finite = [m.c_minus_half, m.c_zero, m.ess_sup, m.lipschitz]
        .iter()
        .all(|v| v.is_finite());
    let all_declared = [
        rep.declared.c_minus_half,
        rep.declared.c_zero,
        rep.declared.ess_sup,
        rep.declared.lipschitz,
    ]
    .iter()
    .all(Option::is_some);
    finite && all_declared && rep.passed()
}

fn criterion_7() -> Outcome {
    let settings = CertifySettings {
        seed: 3,
        ..CertifySettings::default()
    };
    let (cfg, delay_selective) = nicholson_gaussian_f();
    let basis = cfg.basis().unwrap();
    let quad = cfg.theta_quadrature().unwrap();
    let builtins = [
        KernelSpec::Zero,
        KernelSpec::ConstantInState {
            profile: ProfileSpec::Constant { value: 1.0 },
            chi: ChiFamily::Bump {
                center: -0.5,
                half_width: 0.4,
                height: 1.0,
            },
            declared: DeclaredBounds::default(),
        },
        delay_selective,
    ];
    let mut lines = Vec::new();
    let mut ok = true;
    for spec in &builtins {
        let k = spec.build(&basis, &quad).unwrap();
        let rep = certify_kernel(k.as_ref(), &basis, &quad, &settings).unwrap();
        let good = sound(&rep);
        let inverted_fails = if matches!(spec, KernelSpec::Zero) {
            true
        } else {
            let bad = with_declared(spec, shrink(&rep.declared, &rep.measured));
            let k = bad.build(&basis, &quad).unwrap();
            !certify_kernel(k.as_ref(), &basis, &quad, &settings)
                .unwrap()
                .passed()
        };
        ok &= good && inverted_fails;
        lines.push(format!(
            "{}: {} / inverted fails {}",
            spec.family_name(),
            good,
            inverted_fails
        ));
    }

    let targets: Vec<SpectralField> = [0.5, 1.0, 2.0]
        .iter()
        .enumerate()
        .map(|(i, &s)| SpectralField::mode(cfg.modes, i + 1, s))
        .collect();
    let (_, k) = synthesize_model(&cfg, &targets, &ChiFamily::Constant { value: 1.0 }, 0.5).unwrap();
    let rep = certify_stationary_kernel(&k, &basis, &quad, &settings).unwrap();
    let good = sound(&rep);
    let bad = k.clone().with_declared(&shrink(&rep.declared, &rep.measured));
    let inverted_fails = !certify_stationary_kernel(&bad, &basis, &quad, &settings)
        .unwrap()
        .passed();
    ok &= good && inverted_fails;
    lines.push(format!("synthesized: {good} / inverted fails {inverted_fails}"));
    Outcome {
        pass: ok,
        detail: lines.join("; "),
    }
}

fn criterion_8() -> Outcome {
    let build = |m: usize| preset_model("nicholson_constant_f", Some(m), None);
    let u0 = |m: usize| {
        SpectralField::new(
            (1..=m)
                .map(|k| 1.0 / (k * k) as f64 * if k % 2 == 0 { -1.0 } else { 1.0 })
                .collect(),
        )
    };
    let diffs = self_convergence(&build, &u0, &[4, 8, 16, 32], 5.0).unwrap();
    let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: decreasing,
        detail: format!(
            "|u^m - u^2m| = {:?}",
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("energy certificate", criterion_1),
        ("delay-term pairing bounds", criterion_2),
        ("oracle equivalence", criterion_3),
        ("stationary synthesis", criterion_4),
        ("continuous dependence", criterion_5),
        ("dissipativity", criterion_6),
        ("kernel certification", criterion_7),
        ("galerkin self-convergence", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed += 1;
        }
        println!(
            "{verdict} criterion {} ({name}): {} [{:.1}s]",
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
