use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use statedelay::cli::{EXIT_AUDIT, EXIT_BLOWUP, EXIT_INVALID, EXIT_OK};

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{sub}.cfg"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_statedelay"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited normally")
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_zero_data_writes_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\n[initial]\nkind = zero\n[simulate]\nt_end = 1\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&dir.path().join("out/trajectory.csv"));
    assert_eq!(&header[..3], ["t", "norm_l2", "norm_h1"]);
    assert_eq!(header.len(), 3 + 16);
    assert_eq!(rows.len(), 257);
    assert!(rows.iter().all(|r| r[1..].iter().all(|&v| v == 0.0)));
    assert!(dir.path().join("out/audit.json").exists());
}

#[test]
fn csv_columns_reproduce_norms() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\n[initial]\nkind = modes\ncoeffs = 1, 0.5, -0.25\n[simulate]\nt_end = 1\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_OK);
    let (_, rows) = csv_rows(&dir.path().join("out/trajectory.csv"));
    for row in &rows {
        let l2: f64 = row[3..].iter().map(|c| c * c).sum::<f64>().sqrt();
        let h1: f64 = row[3..]
            .iter()
            .enumerate()
            .map(|(k, c)| ((k + 1) as f64 * std::f64::consts::PI).powi(2) * c * c)
            .sum::<f64>()
            .sqrt();
        assert!((l2 - row[1]).abs() <= 1e-14 * l2.max(1.0));
        assert!((h1 - row[2]).abs() <= 1e-13 * h1.max(1.0));
    }
}

#[test]
fn synthesize_three_targets_keeps_drift_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "synthesize",
        "command = synthesize\npreset = nicholson_constant_f\n[synthesize]\ntargets = 1:0.5, 2:1, 3:2\nt_verify = 2\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["kernel.json", "certification.txt", "stationary.json", "drift.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "missing {f}");
    }
    let (header, rows) = csv_rows(&dir.path().join("out/drift.csv"));
    assert_eq!(header, ["t", "drift_1", "drift_2", "drift_3"]);
    let max = rows
        .iter()
        .flat_map(|r| r[1..].iter().copied())
        .fold(0.0, f64::max);
    assert!(max < 1e-4, "drift {max}");
}

#[test]
fn synthesized_artifact_can_be_simulated_and_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "synthesize",
        "command = synthesize\npreset = nicholson_constant_f\n[synthesize]\ntargets = 1:1\nt_verify = 1\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_OK);
    let artifact = dir.path().join("out/kernel.json");
    let sim = format!(
        "command = simulate\npreset = nicholson_constant_f\n[kernel]\nfamily = synthesized\nartifact = {}\n[initial]\nkind = modes\ncoeffs = 1\n[simulate]\nt_end = 1\n",
        artifact.display()
    );
    let sub = tempfile::tempdir().unwrap();
    let out = run(sub.path(), "simulate", &sim, &[]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&sub.path().join("out/trajectory.csv"));
    let last = rows.last().unwrap();
    assert!((last[3] - 1.0).abs() < 1e-10);

    let cert = sim.replace("command = simulate", "command = certify") + "[io]\nseed = 4\n";
    let out = run(sub.path(), "certify", &cert, &[]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn certify_with_understated_bounds_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(
        dir.path(),
        "certify",
        "command = certify\npreset = nicholson_constant_f\n[io]\nseed = 1\n",
        &[],
    );
    assert_eq!(code(&ok), EXIT_OK);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/certificate.json")).unwrap()).unwrap();
    assert_eq!(report["family"], "delay_selective");

    let bad = run(
        dir.path(),
        "certify",
        "command = certify\npreset = nicholson_constant_f\n[kernel]\ndeclared_c_minus_half = 0.1\ndeclared_lipschitz = 0.01\n[io]\nseed = 1\n",
        &[],
    );
    assert_eq!(code(&bad), EXIT_AUDIT);
}

#[test]
fn invalid_model_exits_1_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\n[model]\nd = -1\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_INVALID);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.d"));
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\nthis line is broken\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_INVALID);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn probe_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "probe",
        "command = probe\npreset = nicholson_constant_f\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_INVALID);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn classic_nicholson_with_negative_data_blows_up() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\n[nonlinearity]\nkind = nicholson\np = 40\n[initial]\nkind = modes\ncoeffs = -30, 0, -10\n[simulate]\nt_end = 5\n",
        &[],
    );
    assert_eq!(code(&out), EXIT_BLOWUP);
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let config = "command = probe\npreset = nicholson_constant_f\n[probe]\nradii = 1, 10\nt_max = 5\nn_members = 3\nt_transient = 2\nt_observe = 1\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = run(d.path(), "probe", config, &["--seed", "9"]);
        assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }

    let sim = "command = simulate\npreset = nicholson_gaussian_f\n[initial]\nkind = random\nradius = 2\n[simulate]\nt_end = 1\n";
    for d in [&a, &b] {
        assert_eq!(code(&run(d.path(), "simulate", sim, &["--seed", "3"])), EXIT_OK);
    }
    for f in ["trajectory.csv", "audit.json"] {
        assert_eq!(
            fs::read(a.path().join("out").join(f)).unwrap(),
            fs::read(b.path().join("out").join(f)).unwrap()
        );
    }
}

#[test]
fn dt_refine_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        "simulate",
        "command = simulate\npreset = nicholson_constant_f\n[initial]\nkind = modes\ncoeffs = 1, 0.5\n[simulate]\nt_end = 1\n",
        &["--dt-refine", "2"],
    );
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/refinement.json")).unwrap()).unwrap();
    let rates = rep["rates"].as_array().unwrap();
    assert!(!rates.is_empty());
    for r in rates {
        let r = r.as_f64().unwrap();
        assert!(r > 0.8 && r < 1.3, "rate {r}");
    }
}

#[test]
fn template_output_parses() {
    let out = Command::new(env!("CARGO_BIN_EXE_statedelay"))
        .args([
            "template",
            "nicholson_gaussian_f",
            "--command",
            "probe",
            "--seed",
            "5",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&out), EXIT_OK);
    let cfg = statedelay::config::parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.io.seed, Some(5));
    assert_eq!(cfg.preset.as_deref(), Some("nicholson_gaussian_f"));
}
