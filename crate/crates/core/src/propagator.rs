//! Exact action of the wave group `e^{𝐀t}`, `𝐀(v, w) = (w, Av)`.
//!
//! Each mode is an independent rotation with frequency `μ_n`:
//!
//! ```text
//! a_n(t) =  cos(μ_n t) a_n + μ_n⁻¹ sin(μ_n t) c_n
//! c_n(t) = −μ_n sin(μ_n t) a_n + cos(μ_n t) c_n
//! ```

use crate::error::{Error, Result};
use crate::spectral::{PairState, SpectralModel};

/// Per-mode rotation coefficients for one fixed time increment.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationTable {
    dt: f64,
    cos: Vec<f64>,
    sin_over_mu: Vec<f64>,
    mu_sin: Vec<f64>,
}

impl RotationTable {
    pub fn new(model: &SpectralModel, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(Error::invalid("t", dt, "must be finite and non-negative"));
        }
        let n = model.n_modes();
        let mut cos = Vec::with_capacity(n);
        let mut sin_over_mu = Vec::with_capacity(n);
        let mut mu_sin = Vec::with_capacity(n);
        for &mu in model.mus() {
            let (s, c) = (mu * dt).sin_cos();
            cos.push(c);
            sin_over_mu.push(s / mu);
            mu_sin.push(mu * s);
        }
        Ok(Self {
            dt,
            cos,
            sin_over_mu,
            mu_sin,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_modes(&self) -> usize {
        self.cos.len()
    }

    /// Rotate the leading `pos.len()` modes in place.
    pub fn apply(&self, pos: &mut [f64], vel: &mut [f64]) {
        assert!(pos.len() <= self.cos.len() && pos.len() == vel.len());
        for i in 0..pos.len() {
            let (a, c) = (pos[i], vel[i]);
            pos[i] = self.cos[i] * a + self.sin_over_mu[i] * c;
            vel[i] = -self.mu_sin[i] * a + self.cos[i] * c;
        }
    }
}

/// `e^{𝐀t} x` for `t ≥ 0`.
pub fn propagate(state: &PairState, t: f64, model: &SpectralModel) -> Result<PairState> {
    if state.n_modes() > model.n_modes() {
        return Err(Error::LengthMismatch {
            expected: model.n_modes(),
            got: state.n_modes(),
        });
    }
    let table = RotationTable::new(model, t)?;
    let mut out = state.clone();
    table.apply(out.pos.as_mut_slice(), out.vel.as_mut_slice());
    Ok(out)
}

/// Generator `𝐀x = (w, Av)` in coefficient form: `(c_n, λ_n a_n)`.
pub fn generator(state: &PairState, model: &SpectralModel) -> PairState {
    let pos = state.vel.clone();
    let mut vel = state.pos.clone();
    for (c, l) in vel.as_mut_slice().iter_mut().zip(model.lambdas()) {
        *c *= l;
    }
    PairState { pos, vel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{norm_bold_hr, project};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn quarter_period_rotation() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        let x = PairState::from_vecs(vec![1.0], vec![0.0]).unwrap();
        let y = propagate(&x, 0.5, &m).unwrap();
        assert_abs_diff_eq!(y.pos.mode(1), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.vel.mode(1), -PI, epsilon = 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let m = SpectralModel::new(2.5, 4).unwrap();
        let x = PairState::from_vecs(vec![1.0, -2.0, 0.5, 3.0], vec![0.1, 0.2, -0.3, 4.0]).unwrap();
        assert_eq!(propagate(&x, 0.0, &m).unwrap(), x);
    }

    #[test]
    fn full_period_returns() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        let x = PairState::from_vecs(vec![0.3], vec![-1.7]).unwrap();
        let y = propagate(&x, 2.0, &m).unwrap();
        assert_abs_diff_eq!(y.pos.mode(1), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(y.vel.mode(1), -1.7, epsilon = 1e-12);
    }

    #[test]
    fn negative_time_rejected() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        let x = PairState::zeros(1);
        assert!(propagate(&x, -0.1, &m).is_err());
        assert!(propagate(&x, f64::NAN, &m).is_err());
    }

    #[test]
    fn generator_consistency() {
        let m = SpectralModel::new(1.3, 5).unwrap();
        let x = PairState::from_vecs(vec![1.0, -0.5, 0.2, 0.1, -0.3], vec![2.0, 1.0, -4.0, 3.0, 0.5])
            .unwrap();
        let ax = generator(&x, &m);
        let err = |h: f64| {
            let y = propagate(&x, h, &m).unwrap();
            let fd = y.add_scaled(&x, -1.0);
            fd.pos
                .as_slice()
                .iter()
                .zip(ax.pos.as_slice())
                .chain(fd.vel.as_slice().iter().zip(ax.vel.as_slice()))
                .map(|(d, g)| (d / h - g).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(1e-4));
        let order = (e1 / e2).log10();
        assert!(order >= 0.9, "observed order {order}");
    }

    fn state_strategy(n: usize) -> impl Strategy<Value = PairState> {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-100.0..100.0f64, n),
        )
            .prop_map(|(p, v)| PairState::from_vecs(p, v).unwrap())
    }

    proptest! {
        #[test]
        fn isometry(x in state_strategy(16), t in 0.0..10.0f64) {
            let m = SpectralModel::new(1.0, 16).unwrap();
            let before = norm_bold_hr(&x, 0.0, &m);
            let after = norm_bold_hr(&propagate(&x, t, &m).unwrap(), 0.0, &m);
            prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }

        #[test]
        fn group_law(x in state_strategy(8), s in 0.0..10.0f64, t in 0.0..10.0f64) {
            let m = SpectralModel::new(0.7, 8).unwrap();
            let two = propagate(&propagate(&x, s, &m).unwrap(), t, &m).unwrap();
            let one = propagate(&x, s + t, &m).unwrap();
            for (a, b) in two.pos.as_slice().iter().zip(one.pos.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
            for (a, b) in two.vel.as_slice().iter().zip(one.vel.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn commutes_with_projection(x in state_strategy(10), t in 0.0..10.0f64, k in 0usize..=10) {
            let m = SpectralModel::new(1.0, 10).unwrap();
            let lhs = propagate(&project(&x, k).unwrap(), t, &m).unwrap();
            let rhs = project(&propagate(&x, t, &m).unwrap(), k).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
