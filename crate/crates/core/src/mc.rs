//! Monte Carlo estimation of weak and strong errors across Galerkin levels.
//!
//! Paths run in parallel in fixed-size chunks; per-path results are folded
//! sequentially in path-index order, so tables do not depend on the number of
//! worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{path_seed, SimConfig, Simulator};
use crate::spectral::{energy_sq, norm_bold_hr, PairState, SpectralModel};

const CHUNK: usize = 64;
const UNCOUPLED_STREAM: u64 = 0xA5A5_5A5A_C3C3_3C3C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Pos,
    Vel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctional {
    /// `exp(−‖x‖²_{𝐇₀})`
    ExpNegNorm,
    /// `cos(⟨ψ, x⟩_{𝐇₀})`
    CosPairing(PairState),
    /// One coefficient (1-based mode); unbounded.
    Coordinate { mode: usize, component: Component },
}

impl TestFunctional {
    pub fn name(&self) -> String {
        match self {
            TestFunctional::ExpNegNorm => "exp_neg_norm".into(),
            TestFunctional::CosPairing(_) => "cos_pairing".into(),
            TestFunctional::Coordinate { mode, component } => {
                format!("coordinate({mode}, {component:?})").to_lowercase()
            }
        }
    }

    /// Bounded with bounded first and second derivatives.
    pub fn within_hypotheses(&self) -> bool {
        !matches!(self, TestFunctional::Coordinate { .. })
    }

    pub fn eval(&self, x: &PairState, model: &SpectralModel) -> f64 {
        match self {
            TestFunctional::ExpNegNorm => (-energy_sq(x.pos.as_slice(), x.vel.as_slice(), model)).exp(),
            TestFunctional::CosPairing(psi) => {
                let n = psi.n_modes().min(x.n_modes());
                let w = model.inv_abs_lambdas();
                let (pp, pv) = (&psi.pos.as_slice()[..n], &psi.vel.as_slice()[..n]);
                let (xp, xv) = (&x.pos.as_slice()[..n], &x.vel.as_slice()[..n]);
                let s: f64 = (0..n).map(|i| pp[i] * xp[i] + w[i] * pv[i] * xv[i]).sum();
                s.cos()
            }
            TestFunctional::Coordinate { mode, component } => {
                let c = match component {
                    Component::Pos => &x.pos,
                    Component::Vel => &x.vel,
                };
                if *mode >= 1 && *mode <= c.len() {
                    c.mode(*mode)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Running mean and variance, updated in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub level: usize,
    pub weak_error: f64,
    pub weak_stderr: f64,
    pub strong_error: f64,
    pub strong_stderr: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub const CSV_HEADER: &'static str = "level,weak_error,weak_stderr,strong_error,strong_stderr,n_paths";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{}\n",
                r.level, r.weak_error, r.weak_stderr, r.strong_error, r.strong_stderr, r.n_paths
            ));
        }
        out
    }

    pub fn weak_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.level as f64, r.weak_error.abs())).collect()
    }

    pub fn strong_points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.level as f64, r.strong_error)).collect()
    }

    /// `(N_i, |E φ(X^{N_{i+1}}) − E φ(X^{N_i})|)` for consecutive levels; free of the reference level.
    pub fn successive_difference_points(&self) -> Vec<(f64, f64)> {
        self.rows
            .windows(2)
            .map(|w| (w[0].level as f64, (w[0].weak_error - w[1].weak_error).abs()))
            .collect()
    }
}

/// `t ↦ ‖X_t^N‖_{L²(ℙ; 𝐇_ρ)}` on the time grid for every simulated level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrace {
    pub rho: f64,
    pub levels: Vec<usize>,
    /// `rms[l][k]` at time `k·Δ`.
    pub rms: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl MomentTrace {
    /// `max_k (1 ∨ rms_k) + z·stderr_k` for the level at `index`.
    pub fn sup_upper(&self, index: usize, z: f64) -> f64 {
        self.rms[index]
            .iter()
            .zip(&self.stderr[index])
            .map(|(r, s)| r.max(1.0) + z * s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup(&self, index: usize) -> f64 {
        self.rms[index].iter().fold(1.0f64, |m, r| m.max(*r))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub functional: String,
    pub within_hypotheses: bool,
    pub n_ref: usize,
    pub table: ErrorTable,
    /// `E φ(X_T^N)` and its standard error for `levels ∪ {N_ref}`.
    pub level_means: Vec<(usize, f64, f64)>,
    pub moments: MomentTrace,
}

#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// `ρ` of the monitored `𝐇_ρ` moment.
    pub monitor_rho: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            workers: None,
            monitor_rho: 0.0,
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `work` for paths `0..n_paths` in parallel chunks and feeds the results
/// to `fold` in path order. All-or-nothing: any failure aborts the fold.
fn run_paths<T: Send>(
    n_paths: usize,
    workers: Option<usize>,
    work: impl Fn(usize) -> Result<T> + Sync + Send,
    mut fold: impl FnMut(T) + Send,
) -> Result<()> {
    with_pool(workers, || {
        let mut failed = 0;
        let mut first: Option<Error> = None;
        let mut start = 0;
        while start < n_paths {
            let end = (start + CHUNK).min(n_paths);
            let chunk: Vec<Result<T>> = (start..end).into_par_iter().map(&work).collect();
            for r in chunk {
                match r {
                    Ok(v) if failed == 0 => fold(v),
                    Ok(_) => {}
                    Err(e) => {
                        failed += 1;
                        first.get_or_insert(e);
                    }
                }
            }
            start = end;
        }
        match first {
            None => Ok(()),
            Some(e) => Err(Error::PathFailures {
                failed,
                total: n_paths,
                first: Box::new(e),
            }),
        }
    })?
}

/// Mean and standard error of `φ(X_T^N)` over `n_paths` paths.
pub fn estimate_functional(
    phi: &TestFunctional,
    config: &SimConfig,
    level: usize,
    n_paths: usize,
    master_seed: u64,
) -> Result<(f64, f64)> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "must be at least 2"));
    }
    let sim = Simulator::new(config)?;
    let mut acc = Welford::default();
    run_paths(
        n_paths,
        None,
        |p| {
            let x = sim.path(level, path_seed(master_seed, p as u64))?;
            Ok(phi.eval(&x, &config.model))
        },
        |v| acc.push(v),
    )?;
    Ok((acc.mean(), acc.stderr()))
}

struct PathSample {
    phi: Vec<f64>,
    sq_diff: Vec<f64>,
    norms_sq: Vec<f64>,
}

fn check_study(config: &SimConfig, n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "must be at least 2"));
    }
    match config.levels.last() {
        None => Err(Error::Config("study needs at least one level".into())),
        Some(&top) if top >= config.n_ref() => Err(Error::Config(format!(
            "N_ref = {} must exceed the largest study level {top}",
            config.n_ref()
        ))),
        _ => Ok(()),
    }
}

fn moment_sq(x: &PairState, rho: f64, model: &SpectralModel) -> f64 {
    if rho == 0.0 {
        energy_sq(x.pos.as_slice(), x.vel.as_slice(), model)
    } else {
        norm_bold_hr(x, rho, model).powi(2)
    }
}

pub fn weak_strong_study(config: &SimConfig, phi: &TestFunctional, n_paths: usize, master_seed: u64) -> Result<StudyReport> {
    weak_strong_study_with(config, phi, n_paths, master_seed, StudyOptions::default())
}

/// Coupled study: every path drives all levels and the reference with the same noise.
pub fn weak_strong_study_with(
    config: &SimConfig,
    phi: &TestFunctional,
    n_paths: usize,
    master_seed: u64,
    opts: StudyOptions,
) -> Result<StudyReport> {
    check_study(config, n_paths)?;
    let sim = Simulator::new(config)?;
    let levels = sim.levels().to_vec();
    let n_lv = levels.len();
    let n_t = config.n_steps + 1;
    let model = &config.model;

    let work = |p: usize| -> Result<PathSample> {
        let mut norms_sq = vec![0.0; n_lv * n_t];
        let xs = sim.coupled_observed(path_seed(master_seed, p as u64), |k, states| {
            for (l, x) in states.iter().enumerate() {
                norms_sq[l * n_t + k] = moment_sq(x, opts.monitor_rho, model);
            }
        })?;
        let reference = xs.last().expect("reference level");
        let phi_vals: Vec<f64> = xs.iter().map(|x| phi.eval(x, model)).collect();
        let sq_diff = xs[..n_lv - 1]
            .iter()
            .map(|x| {
                let d = reference.add_scaled(&x.resized(reference.n_modes()), -1.0);
                energy_sq(d.pos.as_slice(), d.vel.as_slice(), model)
            })
            .collect();
        Ok(PathSample {
            phi: phi_vals,
            sq_diff,
            norms_sq,
        })
    };

    let mut phi_acc = vec![Welford::default(); n_lv];
    let mut weak_acc = vec![Welford::default(); n_lv - 1];
    let mut strong_acc = vec![Welford::default(); n_lv - 1];
    let mut mom_acc = vec![Welford::default(); n_lv * n_t];
    run_paths(n_paths, opts.workers, work, |s| {
        let phi_ref = s.phi[n_lv - 1];
        for (a, v) in phi_acc.iter_mut().zip(&s.phi) {
            a.push(*v);
        }
        for (i, a) in weak_acc.iter_mut().enumerate() {
            a.push(phi_ref - s.phi[i]);
        }
        for (a, v) in strong_acc.iter_mut().zip(&s.sq_diff) {
            a.push(*v);
        }
        for (a, v) in mom_acc.iter_mut().zip(&s.norms_sq) {
            a.push(*v);
        }
    })?;

    let rows = levels[..n_lv - 1]
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let ms = strong_acc[i].mean();
            let strong = ms.sqrt();
            let strong_se = if strong > 0.0 { strong_acc[i].stderr() / (2.0 * strong) } else { 0.0 };
            ErrorRow {
                level,
                weak_error: weak_acc[i].mean(),
                weak_stderr: weak_acc[i].stderr(),
                strong_error: strong,
                strong_stderr: strong_se,
                n_paths,
            }
        })
        .collect();

    let mut rms = Vec::with_capacity(n_lv);
    let mut stderr = Vec::with_capacity(n_lv);
    for l in 0..n_lv {
        let (r, s): (Vec<f64>, Vec<f64>) = mom_acc[l * n_t..(l + 1) * n_t]
            .iter()
            .map(|a| {
                let r = a.mean().max(0.0).sqrt();
                let s = if r > 0.0 { a.stderr() / (2.0 * r) } else { 0.0 };
                (r, s)
            })
            .unzip();
        rms.push(r);
        stderr.push(s);
    }

    Ok(StudyReport {
        functional: phi.name(),
        within_hypotheses: phi.within_hypotheses(),
        n_ref: config.n_ref(),
        table: ErrorTable { rows },
        level_means: levels
            .iter()
            .zip(&phi_acc)
            .map(|(&l, a)| (l, a.mean(), a.stderr()))
            .collect(),
        moments: MomentTrace {
            rho: opts.monitor_rho,
            levels,
            rms,
            stderr,
        },
    })
}

/// Weak-error estimates `E φ(X^{N_ref}) − E φ(X^{N_i})` and their standard
/// errors when the reference and the level are driven by independent noise.
pub fn uncoupled_weak_errors(
    config: &SimConfig,
    phi: &TestFunctional,
    n_paths: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<Vec<(usize, f64, f64)>> {
    check_study(config, n_paths)?;
    let sim = Simulator::new(config)?;
    let levels = sim.levels().to_vec();
    let n_lv = levels.len();
    let model = &config.model;
    let work = |p: usize| -> Result<Vec<f64>> {
        let a = sim.coupled(path_seed(master_seed, p as u64))?;
        let b = sim.coupled(path_seed(master_seed ^ UNCOUPLED_STREAM, p as u64))?;
        let phi_ref = phi.eval(&a[n_lv - 1], model);
        Ok(b[..n_lv - 1].iter().map(|x| phi_ref - phi.eval(x, model)).collect())
    };
    let mut acc = vec![Welford::default(); n_lv - 1];
    run_paths(n_paths, workers, work, |d| {
        for (a, v) in acc.iter_mut().zip(&d) {
            a.push(*v);
        }
    })?;
    Ok(levels[..n_lv - 1]
        .iter()
        .zip(&acc)
        .map(|(&l, a)| (l, a.mean(), a.stderr()))
        .collect())
}
