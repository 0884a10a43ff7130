//! Exponential Euler for the `N`-mode Galerkin system in mild form:
//!
//! ```text
//! X_{k+1} = e^{𝐀Δ} ( X_k + Δ·𝐏_N 𝐅(X_k) + 𝐏_N 𝐁(X_k) ΔW_k )
//! ```
//!
//! All Galerkin levels of one path are driven by the same increments `ΔW_k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{add_diffusion, add_drift, fill_noise, CoefficientScratch, CoefficientSpec, NoiseIncrement};
use crate::error::{Error, Result};
use crate::grid::{GridScratch, GridWorkspace};
use crate::propagator::RotationTable;
use crate::spectral::{PairState, SpectralModel};

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Operator data at the reference resolution `N_ref`.
    pub model: SpectralModel,
    /// Strictly ascending Galerkin sizes, each `≤ N_ref`.
    pub levels: Vec<usize>,
    pub t_final: f64,
    pub n_steps: usize,
    pub m_noise: usize,
    pub grid_points: usize,
    pub spec: CoefficientSpec,
    /// Deterministic `ξ` with `N_ref` modes.
    pub initial: PairState,
    /// Each increment is the sum of this many finer increments of the same
    /// Brownian path, so a run with `K/r` steps and refinement `r` sees the
    /// noise of a run with `K` steps. Usually 1.
    pub noise_refinement: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let n_ref = self.n_ref();
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(Error::invalid("t_final", self.t_final, "must be positive"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", 0.0, "must be at least 1"));
        }
        if self.m_noise == 0 {
            return Err(Error::invalid("m_noise", 0.0, "must be at least 1"));
        }
        if self.noise_refinement == 0 {
            return Err(Error::invalid("noise_refinement", 0.0, "must be at least 1"));
        }
        if self.levels.first() == Some(&0) {
            return Err(Error::invalid("levels", 0.0, "Galerkin sizes must be positive"));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("levels must be strictly ascending".into()));
        }
        if let Some(&top) = self.levels.last() {
            if top > n_ref {
                return Err(Error::invalid("levels", top as f64, "must not exceed N_ref"));
            }
        }
        if self.initial.n_modes() != n_ref {
            return Err(Error::LengthMismatch {
                expected: n_ref,
                got: self.initial.n_modes(),
            });
        }
        if !self.initial.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        if self.grid_points < n_ref.max(self.m_noise) {
            return Err(Error::invalid(
                "grid_points",
                self.grid_points as f64,
                "must be at least max(N_ref, M)",
            ));
        }
        if let Some(cols) = self.spec.noise_modes_required() {
            if cols != self.m_noise {
                return Err(Error::Config(format!(
                    "additive diffusion has {cols} columns but m_noise = {}",
                    self.m_noise
                )));
            }
        }
        if let Some(len) = self.spec.max_modes() {
            if len < n_ref {
                return Err(Error::Config(format!(
                    "additive diffusion columns have {len} modes, fewer than N_ref = {n_ref}"
                )));
            }
        }
        if let Some(norms) = &self.spec.declared_norms {
            norms.validate()?;
        }
        Ok(())
    }

    pub fn n_ref(&self) -> usize {
        self.model.n_modes()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// `levels ∪ {N_ref}`, ascending.
    pub fn all_levels(&self) -> Vec<usize> {
        let mut out = self.levels.clone();
        if out.last() != Some(&self.n_ref()) {
            out.push(self.n_ref());
        }
        out
    }
}

/// Deterministic per-path seed from the study seed and the path index.
pub fn path_seed(master_seed: u64, path_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(path_index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One step of size `dt` with the increment `noise`.
pub fn step(
    state: &PairState,
    dt: f64,
    noise: &NoiseIncrement,
    spec: &CoefficientSpec,
    grid: &GridWorkspace,
    model: &SpectralModel,
) -> Result<PairState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", dt, "must be positive"));
    }
    let n = state.n_modes();
    if n > model.n_modes() {
        return Err(Error::LengthMismatch {
            expected: model.n_modes(),
            got: n,
        });
    }
    if grid.n_points() < n.max(noise.m_modes()) {
        return Err(Error::invalid("grid_points", grid.n_points() as f64, "must be at least max(N, M)"));
    }
    let rot = RotationTable::new(model, dt)?;
    let mut scratch = CoefficientScratch::new(grid);
    let mut gs = grid.scratch();
    let dw_grid = grid_noise(spec, &noise.dw, grid, &mut gs);
    let mut out = state.clone();
    advance(&mut out, spec, dt, &noise.dw, dw_grid.as_deref(), grid, &rot, &mut scratch)?;
    if !out.is_finite() {
        return Err(Error::BlowUp { path_seed: 0, step: 1 });
    }
    Ok(out)
}

fn grid_noise(spec: &CoefficientSpec, dw: &[f64], grid: &GridWorkspace, s: &mut GridScratch) -> Option<Vec<f64>> {
    let needs = match &spec.diffusion {
        crate::coefficients::DiffusionKind::Anderson { beta, .. } => *beta != 0.0,
        crate::coefficients::DiffusionKind::Pointwise(_) => true,
        crate::coefficients::DiffusionKind::Additive { .. } => false,
    };
    needs.then(|| {
        let mut out = vec![0.0; grid.n_points()];
        grid.synthesize_into(dw, &mut out, s);
        out
    })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    x: &mut PairState,
    spec: &CoefficientSpec,
    dt: f64,
    dw: &[f64],
    dw_grid: Option<&[f64]>,
    grid: &GridWorkspace,
    rot: &RotationTable,
    s: &mut CoefficientScratch,
) -> Result<()> {
    // 𝐅 and 𝐁 only act on the velocity and only read the position, so the
    // left-endpoint increments can be accumulated in place.
    let PairState { pos, vel } = x;
    if let Some(f) = &spec.drift {
        add_drift(f, pos.as_slice(), vel.as_mut_slice(), dt, grid, s)?;
    }
    add_diffusion(spec, pos.as_slice(), vel.as_mut_slice(), dw, dw_grid, grid, s)?;
    rot.apply(pos.as_mut_slice(), vel.as_mut_slice());
    Ok(())
}

/// Immutable per-config data shared by all paths: grid plan and rotation table.
#[derive(Debug)]
pub struct Simulator<'a> {
    config: &'a SimConfig,
    grid: GridWorkspace,
    rot: RotationTable,
    levels: Vec<usize>,
}

impl<'a> Simulator<'a> {
    pub fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            grid: GridWorkspace::new(config.grid_points)?,
            rot: RotationTable::new(&config.model, config.dt())?,
            levels: config.all_levels(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        self.config
    }

    /// Levels simulated by [`Simulator::coupled`]: `levels ∪ {N_ref}`.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Terminal state of one level.
    pub fn path(&self, level: usize, seed: u64) -> Result<PairState> {
        if level == 0 || level > self.config.n_ref() {
            return Err(Error::invalid("level", level as f64, "must lie in 1..=N_ref"));
        }
        let mut out = self.run(&[level], seed, |_, _| {})?;
        Ok(out.pop().expect("one level"))
    }

    /// As [`Simulator::path`], calling `observe(k, state)` at every time index `k = 0..=K`.
    pub fn path_observed(&self, level: usize, seed: u64, mut observe: impl FnMut(usize, &PairState)) -> Result<PairState> {
        if level == 0 || level > self.config.n_ref() {
            return Err(Error::invalid("level", level as f64, "must lie in 1..=N_ref"));
        }
        let mut out = self.run(&[level], seed, |k, xs| observe(k, &xs[0]))?;
        Ok(out.pop().expect("one level"))
    }

    /// Terminal states of all levels, ascending.
    pub fn coupled(&self, seed: u64) -> Result<Vec<PairState>> {
        self.run(&self.levels, seed, |_, _| {})
    }

    /// As [`Simulator::coupled`], calling `observe(k, states)` at every time
    /// index `k = 0..=K` with the states of all levels.
    pub fn coupled_observed(&self, seed: u64, observe: impl FnMut(usize, &[PairState])) -> Result<Vec<PairState>> {
        self.run(&self.levels, seed, observe)
    }

    fn run(&self, levels: &[usize], seed: u64, mut observe: impl FnMut(usize, &[PairState])) -> Result<Vec<PairState>> {
        let cfg = self.config;
        let dt = cfg.dt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states: Vec<PairState> = levels.iter().map(|&n| cfg.initial.resized(n)).collect();
        let mut scratch: Vec<CoefficientScratch> = levels.iter().map(|_| CoefficientScratch::new(&self.grid)).collect();
        let mut gs = self.grid.scratch();
        let mut dw = vec![0.0; cfg.m_noise];
        let mut dw_grid = grid_noise(&cfg.spec, &dw, &self.grid, &mut gs);
        observe(0, &states);
        for k in 1..=cfg.n_steps {
            fill_noise(&mut rng, &mut dw, dt, cfg.noise_refinement);
            if let Some(g) = dw_grid.as_mut() {
                self.grid.synthesize_into(&dw, g, &mut gs);
            }
            for (x, s) in states.iter_mut().zip(scratch.iter_mut()) {
                advance(x, &cfg.spec, dt, &dw, dw_grid.as_deref(), &self.grid, &self.rot, s)
                    .map_err(|_| Error::BlowUp { path_seed: seed, step: k })?;
                if !x.is_finite() {
                    return Err(Error::BlowUp { path_seed: seed, step: k });
                }
            }
            observe(k, &states);
        }
        Ok(states)
    }
}

/// Terminal state at `level` for one path.
pub fn simulate_path(config: &SimConfig, level: usize, path_seed: u64) -> Result<PairState> {
    Simulator::new(config)?.path(level, path_seed)
}

/// Terminal states of `levels ∪ {N_ref}` under common noise, as `(level, state)` pairs.
pub fn simulate_coupled(config: &SimConfig, path_seed: u64) -> Result<Vec<(usize, PairState)>> {
    let sim = Simulator::new(config)?;
    let states = sim.coupled(path_seed)?;
    Ok(sim.levels().iter().copied().zip(states).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{sample_noise, PointwiseFn, PresetParams};
    use crate::propagator::propagate;
    use crate::spectral::{energy_sq, project};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, SQRT_2};

    fn config(spec: CoefficientSpec, n_ref: usize, levels: Vec<usize>) -> SimConfig {
        let mut pos = vec![0.0; n_ref];
        let mut vel = vec![0.0; n_ref];
        for n in 1..=n_ref {
            pos[n - 1] = 1.0 / (n * n) as f64;
            vel[n - 1] = 0.5 / n as f64;
        }
        SimConfig {
            model: SpectralModel::new(1.0, n_ref).unwrap(),
            levels,
            t_final: 1.0,
            n_steps: 40,
            m_noise: 2 * n_ref,
            grid_points: 4 * n_ref,
            spec,
            initial: PairState::from_vecs(pos, vel).unwrap(),
            noise_refinement: 1,
        }
    }

    #[test]
    fn zero_spec_step_is_the_group() {
        let m = SpectralModel::new(1.0, 6).unwrap();
        let g = GridWorkspace::new(24).unwrap();
        let x = PairState::from_vecs(vec![1.0, 0.2, -0.3, 0.0, 0.5, 0.1], vec![0.0, 1.0, 2.0, 0.0, -1.0, 0.3]).unwrap();
        let noise = sample_noise(&mut ChaCha8Rng::seed_from_u64(1), 12, 0.05).unwrap();
        let y = step(&x, 0.05, &noise, &CoefficientSpec::zero(), &g, &m).unwrap();
        assert_eq!(y, propagate(&x, 0.05, &m).unwrap());
    }

    #[test]
    fn constant_drift_single_step() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        let g = GridWorkspace::new(4095).unwrap();
        let spec = CoefficientSpec::zero().with_drift(PointwiseFn::new("1", |_, _| 1.0));
        let noise = NoiseIncrement::zeros(1, 0.1).unwrap();
        let y = step(&PairState::zeros(1), 0.1, &noise, &spec, &g, &m).unwrap();
        let kick = PairState::from_vecs(vec![0.0], vec![0.1 * 2.0 * SQRT_2 / PI]).unwrap();
        let want = propagate(&kick, 0.1, &m).unwrap();
        assert_abs_diff_eq!(y.pos.mode(1), want.pos.mode(1), epsilon = 1e-8);
        assert_abs_diff_eq!(y.vel.mode(1), want.vel.mode(1), epsilon = 1e-8);
    }

    #[test]
    fn additive_single_step_second_moment() {
        let (n, mm, sigma, dt) = (4, 8, 0.7, 0.01);
        let m = SpectralModel::new(1.0, n).unwrap();
        let g = GridWorkspace::new(32).unwrap();
        let spec = CoefficientSpec::preset("additive-heat-kick", PresetParams { sigma, m_noise: mm, n_modes: n }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let paths = 100_000;
        let k = 2;
        let mut acc = 0.0;
        let mut exact = true;
        for _ in 0..paths {
            let noise = sample_noise(&mut rng, mm, dt).unwrap();
            let y = step(&PairState::zeros(n), dt, &noise, &spec, &g, &m).unwrap();
            // B·ΔW is (0, σ dw) on modes ≤ N, then rotated
            let kicked = PairState::from_vecs(vec![0.0; n], noise.dw[..n].iter().map(|w| sigma * w).collect()).unwrap();
            exact &= y == propagate(&kicked, dt, &m).unwrap();
            let c = kicked.vel.mode(k);
            acc += c * c;
        }
        assert!(exact);
        let mean = acc / paths as f64;
        assert!((mean / (sigma * sigma * dt) - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn zero_spec_paths_are_deterministic_group_flows() {
        let cfg = config(CoefficientSpec::zero(), 8, vec![2, 4]);
        for level in [2, 4, 8] {
            let got = simulate_path(&cfg, level, 5).unwrap();
            let want = propagate(&project(&cfg.initial, level).unwrap(), 1.0, &cfg.model).unwrap();
            for (a, b) in got.pos.as_slice().iter().zip(want.pos.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
            for (a, b) in got.vel.as_slice().iter().zip(want.vel.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn coupled_matches_separate_paths_bitwise() {
        let cfg = config(CoefficientSpec::anderson(0.1, 1.0), 16, vec![4, 8]);
        let coupled = simulate_coupled(&cfg, 1234).unwrap();
        assert_eq!(coupled.iter().map(|p| p.0).collect::<Vec<_>>(), vec![4, 8, 16]);
        for (level, state) in &coupled {
            assert_eq!(state, &simulate_path(&cfg, *level, 1234).unwrap());
        }
        assert_eq!(simulate_path(&cfg, 8, 1234).unwrap(), simulate_path(&cfg, 8, 1234).unwrap());
        assert_ne!(simulate_path(&cfg, 8, 1234).unwrap(), simulate_path(&cfg, 8, 1235).unwrap());
    }

    #[test]
    fn reference_only_coupling_is_a_singleton() {
        let cfg = config(CoefficientSpec::anderson(0.0, 1.0), 8, vec![8]);
        let coupled = simulate_coupled(&cfg, 7).unwrap();
        assert_eq!(coupled.len(), 1);
        assert_eq!(coupled[0].1, simulate_path(&cfg, 8, 7).unwrap());
    }

    #[test]
    fn zero_spec_levels_differ_by_propagated_tail() {
        let cfg = config(CoefficientSpec::zero(), 8, vec![3]);
        let c = simulate_coupled(&cfg, 0).unwrap();
        let fine = &c[1].1;
        let coarse = &c[0].1;
        assert_eq!(project(fine, 3).unwrap(), coarse.resized(8));
        let tail = cfg.initial.add_scaled(&cfg.initial.resized(3).resized(8), -1.0);
        let want = propagate(&tail, 1.0, &cfg.model).unwrap();
        let diff = fine.add_scaled(&coarse.resized(8), -1.0);
        assert!(diff.pos.as_slice()[..3].iter().chain(&diff.vel.as_slice()[..3]).all(|v| *v == 0.0));
        for (a, b) in diff.pos.as_slice().iter().zip(want.pos.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in diff.vel.as_slice().iter().zip(want.vel.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_refinement_reuses_the_fine_path() {
        // zero diffusion except an additive kick: the terminal state is linear in
        // the increments, so K steps and K/2 steps with refinement 2 only differ
        // by the time discretization of the stochastic convolution
        let cfg = config(CoefficientSpec::zero(), 4, vec![2]);
        let mut coarse = cfg.clone();
        coarse.n_steps = 20;
        coarse.noise_refinement = 2;
        assert!(simulate_path(&coarse, 4, 3).is_ok());
        assert_abs_diff_eq!(coarse.dt(), 2.0 * cfg.dt(), epsilon = 1e-15);
    }

    #[test]
    fn observer_sees_every_time_index() {
        let cfg = config(CoefficientSpec::anderson(0.0, 1.0), 8, vec![2, 4]);
        let sim = Simulator::new(&cfg).unwrap();
        let mut seen = Vec::new();
        let out = sim
            .coupled_observed(11, |k, xs| seen.push((k, energy_sq(xs[2].pos.as_slice(), xs[2].vel.as_slice(), &cfg.model))))
            .unwrap();
        assert_eq!(seen.len(), cfg.n_steps + 1);
        assert_eq!(seen.last().unwrap().1, energy_sq(out[2].pos.as_slice(), out[2].vel.as_slice(), &cfg.model));
    }

    #[test]
    fn blow_up_reports_seed_and_step() {
        let mut cfg = config(CoefficientSpec::zero().with_drift(PointwiseFn::new("explode", |_, y| 1e300 * (1.0 + y * y))), 4, vec![2]);
        cfg.n_steps = 50;
        match simulate_path(&cfg, 4, 77) {
            Err(Error::BlowUp { path_seed, step }) => {
                assert_eq!(path_seed, 77);
                assert!((1..=50).contains(&step));
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let good = config(CoefficientSpec::zero(), 8, vec![2, 4]);
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.levels = vec![4, 2];
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.levels = vec![2, 16];
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.n_steps = 0;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.grid_points = 8;
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.t_final = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn path_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| path_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(path_seed(1, 0), path_seed(2, 0));
    }
}
