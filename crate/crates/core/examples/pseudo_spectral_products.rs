//! Nemytskii products through the sine transform: `⟨e_n, v·ẇ⟩` computed on the
//! grid against quadrature, and the decay of the aliasing error in `G`.

use std::f64::consts::{PI, SQRT_2};

use specwave::coefficients::{apply_diffusion, CoefficientSpec, NoiseIncrement};
use specwave::grid::GridWorkspace;
use specwave::spectral::{FieldCoeffs, PairState, SpectralModel};

fn quadrature(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    (0..n).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn main() -> specwave::Result<()> {
    let modes = 8;
    let model = SpectralModel::new(1.0, modes)?;
    let pos: Vec<f64> = (1..=modes).map(|n| 1.0 / (n * n) as f64).collect();
    let state = PairState::new(FieldCoeffs::new(pos.clone())?, FieldCoeffs::zeros(modes))?;
    let dw: Vec<f64> = (1..=2 * modes).map(|k| 0.1 / k as f64).collect();
    let noise = NoiseIncrement::new(dw.clone(), 0.01)?;
    let spec = CoefficientSpec::anderson(0.0, 1.0);

    let e = |n: usize, x: f64| SQRT_2 * (n as f64 * PI * x).sin();
    let v = |x: f64| pos.iter().enumerate().map(|(i, a)| a * e(i + 1, x)).sum::<f64>();
    let w = |x: f64| dw.iter().enumerate().map(|(i, a)| a * e(i + 1, x)).sum::<f64>();
    let reference: Vec<f64> = (1..=modes).map(|n| quadrature(|x| e(n, x) * v(x) * w(x), 200_000)).collect();

    println!("{:>6} {:>14}", "G", "max error");
    let mut prev: Option<f64> = None;
    for g in [16, 32, 64, 128, 256] {
        let grid = GridWorkspace::new(g)?;
        let out = apply_diffusion(&state, &noise, &spec, &grid, &model)?;
        let err = out.vel.as_slice().iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        match prev {
            Some(p) => println!("{g:>6} {err:>14.3e}  (ratio {:.1})", p / err),
            None => println!("{g:>6} {err:>14.3e}"),
        }
        prev = Some(err);
    }
    Ok(())
}
