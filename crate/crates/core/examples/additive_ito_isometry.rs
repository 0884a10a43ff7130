//! Additive noise: Monte Carlo `E‖X_T‖²` against the Itô isometry
//! `‖ξ‖² + T·Σ_k σ²/(ϑπ²k²)`.

use specwave::coefficients::{CoefficientSpec, PresetParams};
use specwave::integrator::{path_seed, SimConfig, Simulator};
use specwave::mc::Welford;
use specwave::spectral::{energy_sq, PairState, SpectralModel};

fn main() -> specwave::Result<()> {
    let paths: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let (n, m, sigma) = (12, 24, 0.6);
    let model = SpectralModel::new(1.0, n)?;
    let mut pos = vec![0.0; n];
    pos[0] = 0.4;
    pos[2] = -0.2;
    let config = SimConfig {
        model: model.clone(),
        levels: vec![],
        t_final: 2.0,
        n_steps: 100,
        m_noise: m,
        grid_points: 48,
        spec: CoefficientSpec::preset("additive-heat-kick", PresetParams { sigma, m_noise: m, n_modes: n })?,
        initial: PairState::from_vecs(pos, vec![0.0; n])?,
        noise_refinement: 1,
    };

    let xi = energy_sq(config.initial.pos.as_slice(), config.initial.vel.as_slice(), &model);
    let injected: f64 = model.inv_abs_lambdas().iter().map(|w| sigma * sigma * w).sum();
    let exact = xi + config.t_final * injected;

    let sim = Simulator::new(&config)?;
    let mut acc = Welford::default();
    for p in 0..paths {
        let x = sim.path(n, path_seed(1, p))?;
        acc.push(energy_sq(x.pos.as_slice(), x.vel.as_slice(), &model));
    }
    println!("paths           {paths}");
    println!("Monte Carlo     {:.6} ± {:.6}", acc.mean(), acc.stderr());
    println!("closed form     {exact:.6}");
    println!("z-score         {:+.2}", (acc.mean() - exact) / acc.stderr());
    Ok(())
}
