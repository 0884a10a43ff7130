//! The deterministic wave group `e^{𝐀t}` on a few Galerkin modes: energy is
//! conserved, the group law holds, and projections commute with the flow.

use specwave::propagator::propagate;
use specwave::spectral::{norm_bold_hr, project, PairState, SpectralModel};

fn main() -> specwave::Result<()> {
    let model = SpectralModel::new(0.5, 6)?;
    let x = PairState::from_vecs(vec![1.0, -0.5, 0.25, 0.0, 0.1, 0.0], vec![0.0, 3.0, 0.0, -2.0, 0.0, 1.0])?;
    let e0 = norm_bold_hr(&x, 0.0, &model);

    println!("{:>6} {:>14} {:>14}", "t", "energy norm", "first mode");
    for k in 0..=8 {
        let t = k as f64 * 0.25;
        let y = propagate(&x, t, &model)?;
        println!("{t:>6.2} {:>14.10} {:>14.6}", norm_bold_hr(&y, 0.0, &model), y.pos.mode(1));
    }

    let split = propagate(&propagate(&x, 0.7, &model)?, 1.3, &model)?;
    let whole = propagate(&x, 2.0, &model)?;
    let gap = split
        .pos
        .as_slice()
        .iter()
        .zip(whole.pos.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("initial energy norm {e0:.10}");
    println!("max |e^{{1.3A}} e^{{0.7A}} x - e^{{2A}} x| = {gap:.2e}");

    let commutes = propagate(&project(&x, 3)?, 2.0, &model)? == project(&whole, 3)?;
    println!("projection to 3 modes commutes with the flow: {commutes}");
    Ok(())
}
