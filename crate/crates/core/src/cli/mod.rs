//! `specwave {simulate|convergence|bound|validate}`.
//!
//! Exit codes: 0 success, 1 internal or validation failure, 2 configuration
//! error, 3 path blow-up, 4 error estimates indistinguishable from zero.

pub mod config;
pub mod validate;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    cos_pairing_cb2, exp_neg_norm_cb2, fit_rate, moment_envelope, predicted_exponent, theoretical_weak_bound,
    BoundParams, PredictedExponent, RateFit,
};
use crate::error::{Error, Result};
use crate::integrator::{path_seed, SimConfig, Simulator};
use crate::mc::{weak_strong_study_with, StudyOptions, StudyReport, TestFunctional};
use crate::spectral::{energy_sq, hs_norm_lambda_pow, norm_bold_hr};
use config::RunConfig;

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_PATHS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "specwave", version, about = "Spectral Galerkin stochastic wave simulator and convergence harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path at the reference resolution.
    Simulate(RunArgs),
    /// Weak/strong convergence study across the configured levels.
    Convergence(RunArgs),
    /// Evaluate the explicit weak-error bound from a parameter file.
    Bound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the invariant suites.
    Validate {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, env = "SPECWAVE_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::BlowUp { .. } | Error::PathFailures { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Convergence(a) => cmd_convergence(&a),
        Command::Bound { config } => cmd_bound(&config),
        Command::Validate { full, .. } => Ok(cmd_validate(full)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Loaded {
    text: String,
    run: RunConfig,
    sim: SimConfig,
}

fn load(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path)?;
    let run = RunConfig::parse(&text)?;
    let sim = run.sim_config()?;
    Ok(Loaded { text, run, sim })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn out_dir(args: &RunArgs, run: &RunConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| run.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    master_seed: u64,
    n_ref: usize,
    levels: Vec<usize>,
    m_noise: usize,
    grid_points: usize,
    n_steps: usize,
    noise_refinement: usize,
    n_paths: usize,
}

fn write_manifest(dir: &Path, command: &str, l: &Loaded, seed: u64, n_paths: usize) -> Result<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: sha256_hex(l.text.as_bytes()),
        master_seed: seed,
        n_ref: l.sim.n_ref(),
        levels: l.sim.all_levels(),
        m_noise: l.sim.m_noise,
        grid_points: l.sim.grid_points,
        n_steps: l.sim.n_steps,
        noise_refinement: l.sim.noise_refinement,
        n_paths,
    };
    write_json(&dir.join("manifest.json"), &m)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn seed_of(args: &RunArgs, run: &RunConfig) -> u64 {
    args.seed.or(run.study.seed).unwrap_or(DEFAULT_SEED)
}

/// Runs one path at `N_ref`; writes `terminal.csv`, `norms.csv` and `manifest.json`.
pub fn cmd_simulate(args: &RunArgs) -> Result<u8> {
    let l = load(&args.config)?;
    let seed = seed_of(args, &l.run);
    let dir = out_dir(args, &l.run);
    let rho = l.run.study.monitor_rho;
    let model = &l.sim.model;
    let dt = l.sim.dt();
    let sim = Simulator::new(&l.sim)?;
    let mut norms = String::from("step,t,h0_norm,hrho_norm\n");
    let terminal = sim.path_observed(l.sim.n_ref(), path_seed(seed, 0), |k, x| {
        let h0 = energy_sq(x.pos.as_slice(), x.vel.as_slice(), model).sqrt();
        let hr = norm_bold_hr(x, rho, model);
        norms.push_str(&format!("{k},{:e},{h0:e},{hr:e}\n", k as f64 * dt));
    })?;
    fs::create_dir_all(&dir)?;
    let mut coeffs = String::from("mode,pos,vel\n");
    for (i, (p, v)) in terminal.pos.as_slice().iter().zip(terminal.vel.as_slice()).enumerate() {
        coeffs.push_str(&format!("{},{p:e},{v:e}\n", i + 1));
    }
    fs::write(dir.join("terminal.csv"), coeffs)?;
    fs::write(dir.join("norms.csv"), norms)?;
    write_manifest(&dir, "simulate", &l, seed, 1)?;
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelBound {
    pub level: usize,
    pub lambda_cut: f64,
    pub bound: f64,
    pub weak_error: f64,
    pub weak_stderr: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub beta: f64,
    pub rho: f64,
    pub hs: f64,
    pub phi_cb2: f64,
    pub predicted: PredictedExponent,
    pub levels: Vec<LevelBound>,
    pub all_hold: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub rho: f64,
    /// `max` over levels and time of `1 ∨ ‖X_t^N‖_{L²(ℙ; 𝐇_ρ)}`.
    pub sup: f64,
    /// The same plus three standard errors.
    pub sup_upper: f64,
    pub envelope: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub functional: String,
    pub within_hypotheses: bool,
    pub n_ref: usize,
    pub levels: Vec<usize>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub weak_slope: Option<f64>,
    pub strong_slope: Option<f64>,
    pub weak_fit: Option<RateFit>,
    pub strong_fit: Option<RateFit>,
    /// Fit of consecutive weak-error differences; insensitive to the reference level.
    pub successive_difference_fit: Option<RateFit>,
    /// Levels whose weak or strong estimate is within 2 standard errors of 0.
    pub indistinguishable_levels: Vec<usize>,
    pub bound: Option<BoundReport>,
    pub moments: MomentReport,
    pub reference_proxy: String,
}

fn phi_cb2(phi: &TestFunctional, sim: &SimConfig) -> Option<f64> {
    match phi {
        TestFunctional::ExpNegNorm => Some(exp_neg_norm_cb2()),
        TestFunctional::CosPairing(psi) => {
            Some(cos_pairing_cb2(energy_sq(psi.pos.as_slice(), psi.vel.as_slice(), &sim.model).sqrt()))
        }
        TestFunctional::Coordinate { .. } => None,
    }
}

/// Bound evaluation for every study level from the declared norms in `run`.
pub fn bound_report(run: &RunConfig, sim: &SimConfig, phi: &TestFunctional, study: &StudyReport) -> Result<Option<BoundReport>> {
    let (Some(d), Some(phi_cb2)) = (&run.coefficients.declared_norms, phi_cb2(phi, sim)) else {
        return Ok(None);
    };
    let (gamma, beta) = d.exponents()?;
    let predicted = predicted_exponent(gamma, beta)?;
    let hs = hs_norm_lambda_pow(sim.model.theta(), beta, 1e-12)?;
    let xi_rho = norm_bold_hr(&sim.initial, d.rho, &sim.model);
    let xi_smooth = norm_bold_hr(&sim.initial, 2.0 * (gamma - beta), &sim.model);
    let mut levels = Vec::new();
    for row in &study.table.rows {
        let lambda_cut = sim.model.first_omitted_eigenvalue(row.level);
        let bound = theoretical_weak_bound(&BoundParams {
            t_final: sim.t_final,
            xi_l2_rho: xi_rho,
            xi_l1_smooth: xi_smooth,
            f_rho_smooth: d.f_rho_smooth,
            f_rho: d.f_rho,
            f_lip: d.f_lip,
            b_rho_gamma: d.b_rho_gamma,
            b_rho_hs: d.b_rho_hs,
            b_lip: d.b_lip,
            c_f: d.c_f,
            c_b: d.c_b,
            hs,
            phi_cb2,
            lambda_cut,
            gamma,
            beta,
            rho: Some(d.rho),
        })?;
        levels.push(LevelBound {
            level: row.level,
            lambda_cut,
            bound,
            weak_error: row.weak_error,
            weak_stderr: row.weak_stderr,
            holds: row.weak_error.abs() - 3.0 * row.weak_stderr <= bound,
        });
    }
    Ok(Some(BoundReport {
        gamma,
        beta,
        rho: d.rho,
        hs,
        phi_cb2,
        predicted,
        all_hold: levels.iter().all(|l| l.holds),
        levels,
    }))
}

/// Moment sup over all levels against the a-priori envelope, when the
/// declared norms refer to the monitored `ρ`.
pub fn moment_report(run: &RunConfig, sim: &SimConfig, study: &StudyReport) -> MomentReport {
    let m = &study.moments;
    let sup = (0..m.levels.len()).map(|l| m.sup(l)).fold(1.0, f64::max);
    let sup_upper = (0..m.levels.len()).map(|l| m.sup_upper(l, 3.0)).fold(1.0, f64::max);
    let norms = run.coefficients.declared_norms.as_ref().and_then(|d| {
        if d.rho == m.rho {
            Some((d.f_rho, d.b_rho_hs))
        } else if m.rho == 0.0 {
            d.b_rho0_hs.map(|b| (d.f_rho0.unwrap_or(0.0), b))
        } else {
            None
        }
    });
    let envelope = norms.map(|(f, b)| moment_envelope(sim.t_final, norm_bold_hr(&sim.initial, m.rho, &sim.model), f, b));
    MomentReport {
        rho: m.rho,
        sup,
        sup_upper,
        envelope,
        holds: envelope.map(|e| sup_upper <= e),
    }
}

pub fn proxy_note(n_ref: usize) -> String {
    format!(
        "errors are measured against the Galerkin solution with N_ref = {n_ref} modes driven by the same noise, \
         standing in for the unavailable N = infinity limit; the weak estimates therefore carry the additional \
         difference E phi(X^inf) - E phi(X^N_ref)"
    )
}

/// Runs the study; writes `errors.csv`, `report.json` and `manifest.json`.
pub fn cmd_convergence(args: &RunArgs) -> Result<u8> {
    let l = load(&args.config)?;
    if l.sim.levels.len() < 3 {
        return Err(Error::Config("study.levels must list at least 3 levels".into()));
    }
    let seed = seed_of(args, &l.run);
    let n_paths = args.paths.or(l.run.study.paths).unwrap_or(DEFAULT_PATHS);
    let phi = l.run.functional()?;
    let opts = StudyOptions {
        workers: args.workers,
        monitor_rho: l.run.study.monitor_rho,
    };
    let study = weak_strong_study_with(&l.sim, &phi, n_paths, seed, opts)?;
    let dir = out_dir(args, &l.run);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("errors.csv"), study.table.to_csv())?;

    let indistinguishable: Vec<usize> = study
        .table
        .rows
        .iter()
        .filter(|r| r.weak_error.abs() <= 2.0 * r.weak_stderr || r.strong_error <= 2.0 * r.strong_stderr)
        .map(|r| r.level)
        .collect();
    let (weak_fit, strong_fit) = if indistinguishable.is_empty() {
        (
            Some(fit_rate(&study.table.weak_points())?),
            Some(fit_rate(&study.table.strong_points())?),
        )
    } else {
        (None, None)
    };
    let report = ConvergenceReport {
        functional: study.functional.clone(),
        within_hypotheses: study.within_hypotheses,
        n_ref: study.n_ref,
        levels: l.sim.levels.clone(),
        n_paths,
        master_seed: seed,
        weak_slope: weak_fit.map(|f| f.slope),
        strong_slope: strong_fit.map(|f| f.slope),
        weak_fit,
        strong_fit,
        successive_difference_fit: fit_rate(&study.table.successive_difference_points()).ok(),
        bound: bound_report(&l.run, &l.sim, &phi, &study)?,
        moments: moment_report(&l.run, &l.sim, &study),
        reference_proxy: proxy_note(study.n_ref),
        indistinguishable_levels: indistinguishable.clone(),
    };
    write_json(&dir.join("report.json"), &report)?;
    write_manifest(&dir, "convergence", &l, seed, n_paths)?;
    if !indistinguishable.is_empty() {
        eprintln!("error estimates at levels {indistinguishable:?} are within 2 standard errors of zero; no rate fitted");
        return Ok(4);
    }
    println!(
        "weak slope {:+.4} (r² {:.4}), strong slope {:+.4} (r² {:.4})",
        report.weak_fit.unwrap().slope,
        report.weak_fit.unwrap().r_squared,
        report.strong_fit.unwrap().slope,
        report.strong_fit.unwrap().r_squared
    );
    Ok(0)
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    bound: f64,
    lambda_exponent: f64,
    n_exponent: f64,
}

/// Reads [`BoundParams`] (TOML, or JSON for `.json` files) and prints the bound as JSON.
pub fn cmd_bound(path: &Path) -> Result<u8> {
    let text = fs::read_to_string(path)?;
    let params: BoundParams = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
    };
    let bound = theoretical_weak_bound(&params)?;
    let p = predicted_exponent(params.gamma, params.beta)?;
    let out = BoundOutput {
        bound,
        lambda_exponent: p.lambda_exponent,
        n_exponent: p.n_exponent,
    };
    println!("{}", serde_json::to_string(&out).map_err(|e| Error::Config(e.to_string()))?);
    Ok(0)
}

pub fn cmd_validate(full: bool) -> u8 {
    let outcome = validate::run_suite(full, &mut std::io::stdout());
    match outcome.first_failure {
        None => 0,
        Some(name) => {
            eprintln!("invariant failed: {name}");
            1
        }
    }
}
