//! Weak and strong convergence of the hyperbolic Anderson model
//! `Ẍ = ∂²X/∂x² + X·Ẇ` with `ξ = (e_1, 0)`.
//!
//! Run with `cargo run --release --example hyperbolic_anderson -- [paths]`.

use std::time::Instant;

use specwave::analysis::fit_rate;
use specwave::coefficients::CoefficientSpec;
use specwave::integrator::SimConfig;
use specwave::mc::{weak_strong_study, TestFunctional};
use specwave::spectral::{FieldCoeffs, PairState, SpectralModel};

fn main() -> specwave::Result<()> {
    let paths: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2_000);
    let n_ref = 128;
    let config = SimConfig {
        model: SpectralModel::new(1.0, n_ref)?,
        levels: vec![4, 8, 16, 32, 64],
        t_final: 1.0,
        n_steps: 512,
        m_noise: 256,
        grid_points: 399,
        spec: CoefficientSpec::anderson(0.0, 1.0),
        initial: PairState::new(FieldCoeffs::unit(1, n_ref), FieldCoeffs::zeros(n_ref))?,
        noise_refinement: 1,
    };

    let start = Instant::now();
    let report = weak_strong_study(&config, &TestFunctional::ExpNegNorm, paths, 2024)?;
    println!("{paths} coupled paths in {:.1?}", start.elapsed());
    print!("{}", report.table.to_csv());

    let weak = fit_rate(&report.table.weak_points())?;
    let strong = fit_rate(&report.table.strong_points())?;
    println!("weak slope   {:+.3} (r² {:.3})", weak.slope, weak.r_squared);
    println!("strong slope {:+.3} (r² {:.3})", strong.slope, strong.r_squared);
    Ok(())
}
