use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use specwave::cli::{self, config::RunConfig, validate};
use specwave::spectral::{energy_sq, SpectralModel};
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specwave"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> u8 {
    cli::run(std::iter::once("specwave").chain(args.iter().copied()))
}

const SMALL: &str = r#"
[model]
theta = 1.0
n_ref = 16
initial_pos = [1.0]

[time]
t_final = 0.5
n_steps = 32

[study]
levels = [2, 4, 8]
paths = 64
"#;

#[test]
fn missing_step_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[model]\ntheta = 1.0\nn_ref = 8\ninitial_pos = [1.0]\n\n[time]\nt_final = 1.0\n");
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_steps"));
}

#[test]
fn unknown_subcommand_and_missing_file() {
    assert_eq!(bin().arg("frobnicate").status().unwrap().code(), Some(2));
    let code = run(&["simulate", "--config", "/nonexistent/specwave.toml"]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_preserves_energy_without_noise_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("[study]", "[coefficients]\npreset = \"zero\"\n\n[study]");
    let cfg = write(&dir, "zero.toml", &text);
    let out = dir.path().join("a");
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let norms = fs::read_to_string(out.join("norms.csv")).unwrap();
    let h0: Vec<f64> = norms.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(h0.len(), 33);
    for v in &h0 {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    let noisy = write(&dir, "noisy.toml", SMALL);
    let (a, b) = (dir.path().join("n1"), dir.path().join("n2"));
    for o in [&a, &b] {
        assert_eq!(run(&["simulate", "--config", noisy.to_str().unwrap(), "--seed", "5", "--out", o.to_str().unwrap()]), 0);
    }
    for f in ["terminal.csv", "norms.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("n3");
    assert_eq!(run(&["simulate", "--config", noisy.to_str().unwrap(), "--seed", "6", "--out", c.to_str().unwrap()]), 0);
    assert_ne!(fs::read(a.join("terminal.csv")).unwrap(), fs::read(c.join("terminal.csv")).unwrap());
}

#[test]
fn terminal_dump_matches_norm_series() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let out = dir.path().join("o");
    assert_eq!(run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let rows: Vec<(f64, f64)> = fs::read_to_string(out.join("terminal.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let model = SpectralModel::new(1.0, 16).unwrap();
    let (p, v): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let from_dump = energy_sq(&p, &v, &model).sqrt();
    let norms = fs::read_to_string(out.join("norms.csv")).unwrap();
    let last: f64 = norms.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((from_dump - last).abs() < 1e-12 * last);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_from_environment_and_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", SMALL);
    let run_env = |seed: &str, extra: &[&str], name: &str| {
        let o = dir.path().join(name);
        let status = bin()
            .env("SPECWAVE_SEED", seed)
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&o)
            .args(extra)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(o.join("terminal.csv")).unwrap()
    };
    let env9 = run_env("9", &[], "e9");
    let flag9 = run_env("1", &["--seed", "9"], "f9");
    assert_eq!(env9, flag9);
}

#[test]
fn blow_up_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("[study]", "[coefficients]\ndrift = \"1e200 * y * y * y\"\n\n[study]");
    let cfg = write(&dir, "c.toml", &text);
    let out = dir.path().join("o");
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = bin().args(["convergence", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_errors_exit_with_four() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("[study]", "[coefficients]\npreset = \"zero\"\n\n[study]");
    let cfg = write(&dir, "c.toml", &text);
    let out = dir.path().join("o");
    assert_eq!(run(&["convergence", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 4);
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(csv.starts_with("level,weak_error,weak_stderr,strong_error,strong_stderr,n_paths\n"));
    assert!(csv.contains("\n2,0e0,0e0,0e0,0e0,64\n"), "{csv}");
}

#[test]
fn too_few_levels_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", &SMALL.replace("levels = [2, 4, 8]", "levels = [4, 8]"));
    assert_eq!(run(&["convergence", "--config", cfg.to_str().unwrap()]), 2);
}

#[test]
fn convergence_writes_report_and_is_worker_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("anderson_small.toml");
    let (a, b) = (dir.path().join("w1"), dir.path().join("w3"));
    for (o, w) in [(&a, "1"), (&b, "3")] {
        let code = run(&["convergence", "--config", cfg.to_str().unwrap(), "--paths", "200", "--workers", w, "--out", o.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(fs::read(a.join("errors.csv")).unwrap(), fs::read(b.join("errors.csv")).unwrap());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert!(report["weak_slope"].as_f64().unwrap() < 0.0);
    assert!(report["strong_slope"].as_f64().unwrap() < 0.0);
    assert!(report["reference_proxy"].as_str().unwrap().contains("N_ref = 32"));
    assert_eq!(report["bound"]["all_hold"], true);
    assert_eq!(report["moments"]["holds"], true);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_paths"], 200);
    assert_eq!(manifest["levels"], serde_json::json!([4, 8, 16, 32]));
}

fn bound_stdout(cfg: &Path) -> (Option<i32>, String) {
    let o = bin().args(["bound", "--config"]).arg(cfg).output().unwrap();
    (o.status.code(), String::from_utf8(o.stdout).unwrap())
}

#[test]
fn bound_all_ones() {
    let (code, out) = bound_stdout(&configs().join("bound_ones.toml"));
    assert_eq!(code, Some(0));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let want = 3.0 * 3f64.sqrt() * 10.5f64.exp();
    assert!((v["bound"].as_f64().unwrap() - want).abs() < 1e-9 * want);
    assert_eq!(v["lambda_exponent"].as_f64().unwrap(), 0.0);
}

#[test]
fn bound_json_input_and_zero_test_function() {
    let dir = TempDir::new().unwrap();
    let ones = fs::read_to_string(configs().join("bound_ones.toml")).unwrap();
    let mut v: serde_json::Map<String, serde_json::Value> = toml::from_str(&ones).unwrap();
    v.insert("phi_cb2".into(), 0.0.into());
    let p = write(&dir, "b.json", &serde_json::to_string(&v).unwrap());
    let (code, out) = bound_stdout(&p);
    assert_eq!(code, Some(0));
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["bound"].as_f64().unwrap(), 0.0);
}

#[test]
fn bound_zero_norms() {
    let dir = TempDir::new().unwrap();
    let text = "t_final = 1.0\nxi_l2_rho = 0.0\nxi_l1_smooth = 0.0\nf_rho_smooth = 0.0\nf_rho = 0.0\nf_lip = 0.0\n\
                b_rho_gamma = 0.0\nb_rho_hs = 0.0\nb_lip = 0.0\nc_f = 0.0\nc_b = 0.0\nhs = 0.0\nphi_cb2 = 0.0\n\
                lambda_cut = 10.0\ngamma = 0.875\nbeta = 0.625\n";
    let (code, out) = bound_stdout(&write(&dir, "z.toml", text));
    assert_eq!(code, Some(0));
    let r: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(r["bound"].as_f64().unwrap(), 0.0);
    assert_eq!(r["n_exponent"].as_f64().unwrap(), -0.5);
}

#[test]
fn bound_out_of_range_beta_names_the_parameter() {
    let dir = TempDir::new().unwrap();
    let ones = fs::read_to_string(configs().join("bound_ones.toml")).unwrap();
    let p = write(&dir, "b.toml", &ones.replace("beta = 1.0", "beta = 0.4"));
    let o = bin().args(["bound", "--config"]).arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn validate_quick_passes() {
    let o = bin().args(["validate", "--quick"]).output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn validate_suite_reports_every_check() {
    let mut buf = Vec::new();
    let outcome = validate::run_suite(false, &mut buf);
    let text = String::from_utf8(buf).unwrap();
    let quick = validate::checks().iter().filter(|c| !c.full_only).count();
    assert_eq!(outcome.passed, quick);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), quick);
}

#[test]
fn shipped_configs_parse() {
    for f in ["anderson.toml", "anderson_small.toml", "additive.toml"] {
        let text = fs::read_to_string(configs().join(f)).unwrap();
        RunConfig::parse(&text).unwrap().sim_config().unwrap();
    }
}
