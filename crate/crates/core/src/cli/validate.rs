//! Invariant suites behind `specwave validate`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{fit_rate, mittag_envelope, theoretical_weak_bound, BoundParams};
use crate::coefficients::{
    apply_diffusion, apply_drift, diffusion_hs_sq, sample_noise, CoefficientSpec, PointwiseFn, PresetParams,
};
use crate::error::Result;
use crate::grid::GridWorkspace;
use crate::integrator::{simulate_coupled, simulate_path, SimConfig};
use crate::mc::{estimate_functional, uncoupled_weak_errors, weak_strong_study, weak_strong_study_with, StudyOptions, TestFunctional};
use crate::propagator::propagate;
use crate::spectral::{energy_sq, hs_norm_lambda_pow, norm_bold_hr, project, FieldCoeffs, PairState, SpectralModel};

pub type CheckResult = std::result::Result<(), String>;

pub struct Check {
    pub name: &'static str,
    pub full_only: bool,
    pub run: fn() -> CheckResult,
}

#[derive(Debug, Default)]
pub struct SuiteOutcome {
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<&'static str>,
}

type Propagator = dyn Fn(&PairState, f64, &SpectralModel) -> Result<PairState>;

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> PairState {
    let pos = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
    let vel = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
    PairState::from_vecs(pos, vel).expect("finite")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> CheckResult {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok_or<T>(r: Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// `‖e^{𝐀t}x‖_{𝐇₀} = ‖x‖_{𝐇₀}` to 1e-12 relative for random states and times.
pub fn isometry_invariant(prop: &Propagator, samples: usize) -> CheckResult {
    let m = ok_or(SpectralModel::new(1.0, 16))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..samples {
        let x = random_state(&mut rng, 16);
        let t = rng.random_range(0.0..10.0);
        let before = norm_bold_hr(&x, 0.0, &m);
        let after = norm_bold_hr(&ok_or(prop(&x, t, &m))?, 0.0, &m);
        ensure((before - after).abs() <= 1e-12 * before.max(1.0), || {
            format!("norm {before} became {after} at t = {t}")
        })?;
    }
    Ok(())
}

fn isometry() -> CheckResult {
    isometry_invariant(&propagate, 1000)
}

fn group_law() -> CheckResult {
    let m = ok_or(SpectralModel::new(0.7, 8))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let x = random_state(&mut rng, 8);
        let (s, t) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let two = ok_or(propagate(&ok_or(propagate(&x, s, &m))?, t, &m))?;
        let one = ok_or(propagate(&x, s + t, &m))?;
        let close = two
            .pos
            .as_slice()
            .iter()
            .chain(two.vel.as_slice())
            .zip(one.pos.as_slice().iter().chain(one.vel.as_slice()))
            .all(|(a, b)| (a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        ensure(close, || format!("group law violated at s = {s}, t = {t}"))?;
    }
    Ok(())
}

fn projection_commutes() -> CheckResult {
    let m = ok_or(SpectralModel::new(1.0, 10))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = random_state(&mut rng, 10);
        let t = rng.random_range(0.0..10.0);
        let k = rng.random_range(0..=10);
        let lhs = ok_or(propagate(&ok_or(project(&x, k))?, t, &m))?;
        let rhs = ok_or(project(&ok_or(propagate(&x, t, &m))?, k))?;
        ensure(lhs == rhs, || format!("projection to {k} does not commute at t = {t}"))?;
    }
    Ok(())
}

fn hs_norm() -> CheckResult {
    let got = ok_or(hs_norm_lambda_pow(1.0, 1.0, 1e-12))?;
    let want = (1.0f64 / 3.0).sqrt();
    ensure((got - want).abs() <= 1e-10, || format!("{got} vs {want}"))
}

fn mittag() -> CheckResult {
    for i in 0..=30 {
        let x = i as f64 * 0.1;
        let got = ok_or(mittag_envelope(1.0, x, 1e-12))?;
        let want = (x * x / 2.0).exp();
        ensure((got - want).abs() <= 1e-10 * want, || format!("x = {x}: {got} vs {want}"))?;
    }
    Ok(())
}

fn rate_fit() -> CheckResult {
    for slope in [-2.0, -1.0, -0.5, -0.25] {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n: &f64| (n, 0.7 * n.powf(slope))).collect();
        let fit = ok_or(fit_rate(&pts))?;
        ensure((fit.slope - slope).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12, || {
            format!("slope {slope} fitted as {}", fit.slope)
        })?;
    }
    Ok(())
}

fn bound_monotone() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let mut v: Vec<f64> = (0..13).map(|_| rng.random_range(0.0..2.0)).collect();
        let make = |v: &[f64]| BoundParams {
            t_final: v[0] + 0.1,
            xi_l2_rho: v[1],
            xi_l1_smooth: v[2],
            f_rho_smooth: v[3],
            f_rho: v[4],
            f_lip: v[5],
            b_rho_gamma: v[6],
            b_rho_hs: v[7],
            b_lip: v[8],
            c_f: v[9],
            c_b: v[10],
            hs: v[11],
            phi_cb2: v[12],
            lambda_cut: 50.0,
            gamma: 0.875,
            beta: 0.625,
            rho: None,
        };
        let lo = ok_or(theoretical_weak_bound(&make(&v)))?;
        let i = rng.random_range(0..13);
        v[i] += rng.random_range(0.0..1.0);
        let hi = ok_or(theoretical_weak_bound(&make(&v)))?;
        ensure(hi >= lo * (1.0 - 1e-12), || format!("bound decreased when input {i} grew"))?;
    }
    Ok(())
}

fn drift_projection() -> CheckResult {
    let m = ok_or(SpectralModel::new(1.0, 2))?;
    let g = ok_or(GridWorkspace::new(4095))?;
    let one = CoefficientSpec::zero().with_drift(PointwiseFn::new("1", |_, _| 1.0));
    let out = ok_or(apply_drift(&PairState::zeros(2), &one, &g, &m))?;
    let want = 2.0 * SQRT_2 / PI;
    ensure((out.vel.mode(1) - want).abs() < 1e-6, || format!("{} vs {want}", out.vel.mode(1)))?;
    let id = CoefficientSpec::zero().with_drift(PointwiseFn::new("y", |_, y| y));
    let x = ok_or(PairState::from_vecs(vec![1.0, 2.0], vec![0.0, 0.0]))?;
    let out = ok_or(apply_drift(&x, &id, &g, &m))?;
    ensure((out.vel.mode(1) - 1.0).abs() < 1e-12 && (out.vel.mode(2) - 2.0).abs() < 1e-12, || {
        "identity drift does not reproduce the coefficients".into()
    })
}

fn diffusion_product_and_linearity() -> CheckResult {
    let m = ok_or(SpectralModel::new(1.0, 6))?;
    let g = ok_or(GridWorkspace::new(1023))?;
    let spec = CoefficientSpec::anderson(0.0, 1.0);
    let mut dw = vec![0.0; 8];
    dw[0] = 1.0;
    let e1 = ok_or(PairState::new(FieldCoeffs::unit(1, 6), FieldCoeffs::zeros(6)))?;
    let out = ok_or(apply_diffusion(&e1, &ok_or(crate::coefficients::NoiseIncrement::new(dw, 0.1))?, &spec, &g, &m))?;
    let want = 8.0 * SQRT_2 / (3.0 * PI);
    ensure((out.vel.mode(1) - want).abs() < 1e-8, || format!("⟨e_1, e_1²⟩ = {} vs {want}", out.vel.mode(1)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_state(&mut rng, 6);
    let noise = ok_or(sample_noise(&mut rng, 12, 0.01))?;
    let spec = CoefficientSpec::anderson(0.3, 1.0);
    let a = ok_or(apply_diffusion(&x, &noise, &spec, &g, &m))?;
    let b = ok_or(apply_diffusion(&x, &noise.scaled(3.0), &spec, &g, &m))?;
    let linear = a
        .vel
        .as_slice()
        .iter()
        .zip(b.vel.as_slice())
        .all(|(u, v)| (3.0 * u - v).abs() <= 1e-12 * (1.0 + v.abs()));
    ensure(linear, || "diffusion is not linear in the noise".into())
}

fn noise_determinism() -> CheckResult {
    let a = ok_or(sample_noise(&mut ChaCha8Rng::seed_from_u64(6), 32, 0.01))?;
    let b = ok_or(sample_noise(&mut ChaCha8Rng::seed_from_u64(6), 32, 0.01))?;
    ensure(a == b, || "same seed gave different increments".into())?;
    ensure(sample_noise(&mut ChaCha8Rng::seed_from_u64(6), 32, 0.0).is_err(), || "dt = 0 accepted".into())
}

fn truncation_monotone() -> CheckResult {
    let m = ok_or(SpectralModel::new(1.0, 16))?;
    let g = ok_or(GridWorkspace::new(512))?;
    let x = ok_or(PairState::from_vecs((1..=16).map(|n| 1.0 / n as f64).collect(), vec![0.0; 16]))?;
    let spec = CoefficientSpec::anderson(0.0, 1.0);
    let mut prev = 0.0;
    for mm in [2, 4, 8, 16, 32, 64, 128] {
        let v = ok_or(diffusion_hs_sq(&x, &spec, &g, &m, mm))?;
        ensure(v >= prev - 1e-14, || format!("capture decreased at M = {mm}"))?;
        prev = v;
    }
    Ok(())
}

fn small_anderson(n_ref: usize, levels: Vec<usize>) -> Result<SimConfig> {
    Ok(SimConfig {
        model: SpectralModel::new(1.0, n_ref)?,
        levels,
        t_final: 1.0,
        n_steps: 64,
        m_noise: 2 * n_ref,
        grid_points: 3 * n_ref + 1,
        spec: CoefficientSpec::anderson(0.0, 1.0),
        initial: PairState::new(FieldCoeffs::unit(1, n_ref), FieldCoeffs::zeros(n_ref))?,
        noise_refinement: 1,
    })
}

fn coupled_consistency() -> CheckResult {
    let cfg = ok_or(small_anderson(16, vec![4, 8]))?;
    for (level, x) in ok_or(simulate_coupled(&cfg, 99))? {
        ensure(x == ok_or(simulate_path(&cfg, level, 99))?, || format!("level {level} differs from its separate run"))?;
    }
    Ok(())
}

fn scheduling_independence() -> CheckResult {
    let cfg = ok_or(small_anderson(16, vec![4, 8]))?;
    let phi = TestFunctional::ExpNegNorm;
    let run = |w| weak_strong_study_with(&cfg, &phi, 200, 7, StudyOptions { workers: Some(w), monitor_rho: 0.0 });
    let (a, b) = (ok_or(run(1))?, ok_or(run(4))?);
    ensure(a.table.to_csv() == b.table.to_csv(), || "tables differ between 1 and 4 workers".into())
}

fn coupling_variance() -> CheckResult {
    let cfg = ok_or(small_anderson(16, vec![4, 8]))?;
    let phi = TestFunctional::ExpNegNorm;
    let coupled = ok_or(weak_strong_study(&cfg, &phi, 300, 8))?;
    let uncoupled = ok_or(uncoupled_weak_errors(&cfg, &phi, 300, 8, None))?;
    for (row, (_, _, se)) in coupled.table.rows.iter().zip(&uncoupled) {
        ensure(row.weak_stderr <= *se, || format!("coupled stderr {} > uncoupled {se}", row.weak_stderr))?;
    }
    Ok(())
}

fn functional_curvature() -> CheckResult {
    let n = 8;
    let m = ok_or(SpectralModel::new(1.0, n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi_pos: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    let psi = ok_or(PairState::from_vecs(psi_pos, vec![0.0; n]))?;
    let psi_sq = energy_sq(psi.pos.as_slice(), psi.vel.as_slice(), &m);
    let phis = [TestFunctional::ExpNegNorm, TestFunctional::CosPairing(psi)];
    for _ in 0..200 {
        let x = ok_or(PairState::from_vecs(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|i| m.mus()[i] * rng.random_range(-1.0..1.0)).collect(),
        ))?;
        let h = ok_or(PairState::from_vecs(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|i| m.mus()[i] * rng.random_range(-1.0..1.0)).collect(),
        ))?;
        let hn = energy_sq(h.pos.as_slice(), h.vel.as_slice(), &m).sqrt();
        let h = PairState::zeros(n).add_scaled(&h, 1.0 / hn);
        let eps = 1e-3;
        for phi in &phis {
            let f = |t: f64| phi.eval(&x.add_scaled(&h, t), &m);
            let d2 = (f(eps) - 2.0 * f(0.0) + f(-eps)) / (eps * eps);
            ensure(d2.abs() <= 10.0 * psi_sq.max(1.0), || format!("{} curvature {d2}", phi.name()))?;
        }
    }
    Ok(())
}

/// Monte Carlo `E‖X_T‖²_{𝐇₀}` against `‖ξ‖² + T Σ_k ‖𝐏_N B e_k‖²` for additive noise.
pub fn ito_isometry(paths: usize) -> CheckResult {
    let (n, mm, sigma) = (8, 16, 0.8);
    let spec = ok_or(CoefficientSpec::preset("additive-heat-kick", PresetParams { sigma, m_noise: mm, n_modes: n }))?;
    let model = ok_or(SpectralModel::new(1.0, n))?;
    let initial = ok_or(PairState::from_vecs(vec![0.5, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0, 0.1], vec![0.0; n]))?;
    let cfg = SimConfig {
        model: model.clone(),
        levels: vec![],
        t_final: 1.0,
        n_steps: 50,
        m_noise: mm,
        grid_points: 32,
        spec,
        initial: initial.clone(),
        noise_refinement: 1,
    };
    let xi_sq = energy_sq(initial.pos.as_slice(), initial.vel.as_slice(), &model);
    let hs: f64 = model.inv_abs_lambdas().iter().map(|w| sigma * sigma * w).sum();
    let want = xi_sq + cfg.t_final * hs;
    // E‖X‖² as the mean of a coordinate-free functional: φ = ‖x‖² is not bounded, so estimate directly
    let sim = ok_or(crate::integrator::Simulator::new(&cfg))?;
    let mut acc = crate::mc::Welford::default();
    for p in 0..paths {
        let x = ok_or(sim.path(n, crate::integrator::path_seed(11, p as u64)))?;
        acc.push(energy_sq(x.pos.as_slice(), x.vel.as_slice(), &model));
    }
    ensure((acc.mean() - want).abs() <= 3.0 * acc.stderr(), || {
        format!("E‖X_T‖² = {} ± {} vs {want}", acc.mean(), acc.stderr())
    })
}

fn ito_isometry_full() -> CheckResult {
    ito_isometry(20_000)
}

fn moment_bound_small() -> CheckResult {
    let cfg = ok_or(small_anderson(32, vec![4, 8, 16]))?;
    let r = ok_or(weak_strong_study(&cfg, &TestFunctional::ExpNegNorm, 2000, 12))?;
    let envelope = crate::analysis::moment_envelope(1.0, 1.0, 0.0, (1.0f64 / 3.0).sqrt());
    for l in 0..r.moments.levels.len() {
        let up = r.moments.sup_upper(l, 3.0);
        ensure(up <= envelope, || format!("level {}: {up} exceeds {envelope}", r.moments.levels[l]))?;
    }
    Ok(())
}

fn deterministic_functional() -> CheckResult {
    let mut cfg = ok_or(small_anderson(8, vec![4]))?;
    cfg.spec = CoefficientSpec::zero();
    let (mean, se) = ok_or(estimate_functional(&TestFunctional::ExpNegNorm, &cfg, 4, 4, 0))?;
    let x = ok_or(propagate(&ok_or(project(&cfg.initial, 4))?, 1.0, &cfg.model))?;
    let want = TestFunctional::ExpNegNorm.eval(&x, &cfg.model);
    ensure(se == 0.0 && (mean - want).abs() < 1e-12, || format!("{mean} ± {se} vs {want}"))
}

pub fn checks() -> Vec<Check> {
    vec![
        Check { name: "semigroup isometry", full_only: false, run: isometry },
        Check { name: "semigroup group law", full_only: false, run: group_law },
        Check { name: "projection commutation", full_only: false, run: projection_commutes },
        Check { name: "hilbert-schmidt norm", full_only: false, run: hs_norm },
        Check { name: "mittag envelope closed form", full_only: false, run: mittag },
        Check { name: "rate fit on power laws", full_only: false, run: rate_fit },
        Check { name: "bound monotonicity", full_only: false, run: bound_monotone },
        Check { name: "drift projection", full_only: false, run: drift_projection },
        Check { name: "diffusion product and linearity", full_only: false, run: diffusion_product_and_linearity },
        Check { name: "noise determinism", full_only: false, run: noise_determinism },
        Check { name: "noise truncation monotone", full_only: false, run: truncation_monotone },
        Check { name: "coupled equals separate paths", full_only: false, run: coupled_consistency },
        Check { name: "deterministic functional", full_only: false, run: deterministic_functional },
        Check { name: "scheduling independence", full_only: false, run: scheduling_independence },
        Check { name: "coupling reduces variance", full_only: false, run: coupling_variance },
        Check { name: "test functional curvature", full_only: false, run: functional_curvature },
        Check { name: "additive ito isometry", full_only: true, run: ito_isometry_full },
        Check { name: "moment envelope", full_only: true, run: moment_bound_small },
    ]
}

/// Runs the quick suite, or everything with `full`, printing one line per check.
pub fn run_suite(full: bool, out: &mut impl Write) -> SuiteOutcome {
    let mut outcome = SuiteOutcome::default();
    for c in checks().into_iter().filter(|c| full || !c.full_only) {
        let start = Instant::now();
        let res = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(()) => {
                outcome.passed += 1;
                let _ = writeln!(out, "PASS  {:<34} {secs:>7.2}s", c.name);
            }
            Err(msg) => {
                outcome.failed += 1;
                outcome.first_failure.get_or_insert(c.name);
                let _ = writeln!(out, "FAIL  {:<34} {secs:>7.2}s  {msg}", c.name);
            }
        }
    }
    let _ = writeln!(out, "{} passed, {} failed", outcome.passed, outcome.failed);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_error_in_the_group_breaks_isometry() {
        let broken = |x: &PairState, t: f64, m: &SpectralModel| -> Result<PairState> {
            let mut y = propagate(x, t, m)?;
            // flip the sign of the μ sin(μt) a term
            for i in 0..y.n_modes() {
                let (s, c) = (m.mus()[i] * t).sin_cos();
                let a = x.pos.as_slice()[i];
                let v = x.vel.as_slice()[i];
                y.vel.as_mut_slice()[i] = m.mus()[i] * s * a + c * v;
            }
            Ok(y)
        };
        assert!(isometry_invariant(&broken, 50).is_err());
        assert!(isometry_invariant(&propagate, 50).is_ok());
    }

    #[test]
    fn ito_isometry_small() {
        ito_isometry(4000).unwrap();
    }
}
