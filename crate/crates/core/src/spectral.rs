//! Dirichlet sine eigenbasis on (0, 1), coefficient vectors, interpolation-space
//! norms and spectral projections.
//!
//! The linear operator is `A = ϑ ∂²/∂x²` with homogeneous Dirichlet boundary
//! conditions. Its eigenpairs are
//!
//! ```text
//! e_n(x) = √2 sin(nπx),    λ_n = −ϑ π² n²,    μ_n = |λ_n|^{1/2} = √ϑ π n
//! ```
//!
//! Modes are numbered from 1 wherever a mode number appears in the public API;
//! the backing vectors are of course 0-based (`coeffs[n - 1]` is mode `n`).
//!
//! A wave state `(v, w)` is stored as two plain `L²` coefficient vectors
//! `a_n = ⟨e_n, v⟩`, `c_n = ⟨e_n, w⟩`. The product-space norm
//! `‖(v, w)‖_{𝐇_r}² = ‖v‖_{H_{r/2}}² + ‖w‖_{H_{r/2 − 1/2}}²` applies the
//! `|λ_n|` weights only at evaluation time.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Diagonal data of the Dirichlet Laplacian scaled by `ϑ`, truncated to `N` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    theta: f64,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    inv_abs_lambda: Vec<f64>,
}

impl SpectralModel {
    pub fn new(theta: f64, n_modes: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid("theta", theta, "must be positive and finite"));
        }
        if n_modes == 0 {
            return Err(Error::invalid("n_modes", 0.0, "must be at least 1"));
        }
        let lambda: Vec<f64> = (1..=n_modes)
            .map(|n| -theta * PI * PI * (n * n) as f64)
            .collect();
        let mu = (1..=n_modes).map(|n| theta.sqrt() * PI * n as f64).collect();
        let inv_abs_lambda = lambda.iter().map(|l| 1.0 / l.abs()).collect();
        Ok(Self {
            theta,
            lambda,
            mu,
            inv_abs_lambda,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_modes(&self) -> usize {
        self.lambda.len()
    }

    /// Eigenvalues `λ_1, …, λ_N` (all negative, strictly decreasing).
    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Frequencies `μ_n = |λ_n|^{1/2}`.
    pub fn mus(&self) -> &[f64] {
        &self.mu
    }

    /// `|λ_n|^{-1}`, the velocity weight of the energy norm `𝐇₀`.
    pub fn inv_abs_lambdas(&self) -> &[f64] {
        &self.inv_abs_lambda
    }

    /// Eigenvalue of mode `n` (1-based).
    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.lambda[n - 1]
    }

    /// First eigenvalue not represented by a Galerkin space of `n` modes,
    /// `|λ_{n+1}| = ϑπ²(n+1)²`. Not bounded by `n_modes`.
    pub fn first_omitted_eigenvalue(&self, n: usize) -> f64 {
        self.theta * PI * PI * ((n + 1) * (n + 1)) as f64
    }

    /// Same spectrum restricted to the first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Self::new(self.theta, n)
    }
}

/// Sine coefficients `a_n = ⟨e_n, v⟩` of one scalar field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldCoeffs(Vec<f64>);

impl FieldCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("field coefficients"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Single mode `n` (1-based) with unit coefficient, `len` modes total.
    pub fn unit(n: usize, len: usize) -> Self {
        let mut c = vec![0.0; len];
        c[n - 1] = 1.0;
        Self(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Coefficient of mode `n` (1-based).
    pub fn mode(&self, n: usize) -> f64 {
        self.0[n - 1]
    }

    /// Truncate or zero-pad to `len` modes.
    pub fn resized(&self, len: usize) -> Self {
        let mut c = self.0.clone();
        c.resize(len, 0.0);
        Self(c)
    }
}

impl From<FieldCoeffs> for Vec<f64> {
    fn from(f: FieldCoeffs) -> Self {
        f.0
    }
}

/// Galerkin wave state `(v, w)` as position and velocity sine coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairState {
    pub pos: FieldCoeffs,
    pub vel: FieldCoeffs,
}

impl PairState {
    pub fn new(pos: FieldCoeffs, vel: FieldCoeffs) -> Result<Self> {
        if pos.len() != vel.len() {
            return Err(Error::LengthMismatch {
                expected: pos.len(),
                got: vel.len(),
            });
        }
        Ok(Self { pos, vel })
    }

    pub fn from_vecs(pos: Vec<f64>, vel: Vec<f64>) -> Result<Self> {
        Self::new(FieldCoeffs::new(pos)?, FieldCoeffs::new(vel)?)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            pos: FieldCoeffs::zeros(n),
            vel: FieldCoeffs::zeros(n),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.pos.len()
    }

    pub fn is_finite(&self) -> bool {
        self.pos
            .as_slice()
            .iter()
            .chain(self.vel.as_slice())
            .all(|c| c.is_finite())
    }

    /// Truncate or zero-pad both components to `len` modes.
    pub fn resized(&self, len: usize) -> Self {
        Self {
            pos: self.pos.resized(len),
            vel: self.vel.resized(len),
        }
    }

    /// `self + scale · other` over the common modes; `other` may be shorter.
    pub fn add_scaled(&self, other: &PairState, scale: f64) -> PairState {
        let mut out = self.clone();
        for (x, y) in out.pos.0.iter_mut().zip(other.pos.as_slice()) {
            *x += scale * y;
        }
        for (x, y) in out.vel.0.iter_mut().zip(other.vel.as_slice()) {
            *x += scale * y;
        }
        out
    }
}

/// Weight `|λ|^s`, integer powers exactly via `powi`, otherwise through `exp`/`ln`.
fn abs_lambda_pow(lambda: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s.fract() == 0.0 && s.abs() <= 64.0 {
        lambda.abs().powi(s as i32)
    } else {
        (s * lambda.abs().ln()).exp()
    }
}

fn weighted_sq(coeffs: &[f64], r: f64, model: &SpectralModel) -> f64 {
    assert!(
        coeffs.len() <= model.n_modes(),
        "field has {} modes but the model only {}",
        coeffs.len(),
        model.n_modes()
    );
    coeffs
        .iter()
        .zip(model.lambdas())
        .map(|(a, &l)| abs_lambda_pow(l, 2.0 * r) * a * a)
        .sum()
}

/// `‖v‖_{H_r} = (Σ |λ_n|^{2r} a_n²)^{1/2}`.
pub fn norm_hr(field: &FieldCoeffs, r: f64, model: &SpectralModel) -> f64 {
    weighted_sq(field.as_slice(), r, model).sqrt()
}

/// `‖(v, w)‖_{𝐇_r} = (‖v‖²_{H_{r/2}} + ‖w‖²_{H_{r/2 − 1/2}})^{1/2}`.
pub fn norm_bold_hr(state: &PairState, r: f64, model: &SpectralModel) -> f64 {
    (weighted_sq(state.pos.as_slice(), r / 2.0, model)
        + weighted_sq(state.vel.as_slice(), r / 2.0 - 0.5, model))
    .sqrt()
}

/// Squared energy norm `‖x‖²_{𝐇₀}` with the precomputed `|λ_n|^{-1}` table.
pub fn energy_sq(pos: &[f64], vel: &[f64], model: &SpectralModel) -> f64 {
    let p: f64 = pos.iter().map(|a| a * a).sum();
    let v: f64 = vel
        .iter()
        .zip(model.inv_abs_lambdas())
        .map(|(c, w)| w * c * c)
        .sum();
    p + v
}

/// Energy inner product `⟨x, y⟩_{𝐇₀}` over the modes both states carry.
pub fn energy_inner(x: &PairState, y: &PairState, model: &SpectralModel) -> f64 {
    let p: f64 = x
        .pos
        .as_slice()
        .iter()
        .zip(y.pos.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    let v: f64 = x
        .vel
        .as_slice()
        .iter()
        .zip(y.vel.as_slice())
        .zip(model.inv_abs_lambdas())
        .map(|((a, b), w)| w * a * b)
        .sum();
    p + v
}

/// `𝐏_k`: zero every mode above `n_keep`.
pub fn project(state: &PairState, n_keep: usize) -> Result<PairState> {
    if n_keep > state.n_modes() {
        return Err(Error::invalid(
            "n_keep",
            n_keep as f64,
            "must not exceed the number of modes",
        ));
    }
    let mut out = state.clone();
    out.pos.0[n_keep..].iter_mut().for_each(|c| *c = 0.0);
    out.vel.0[n_keep..].iter_mut().for_each(|c| *c = 0.0);
    Ok(out)
}

/// Point values `Σ_n a_n √2 sin(nπx)` at arbitrary points of `(0, 1)`.
pub fn eval_field(field: &FieldCoeffs, points: &[f64]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&x| {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::PointOutsideDomain(x));
            }
            Ok(field
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, a)| a * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
                .sum())
        })
        .collect()
}

// Bernoulli numbers B_2, B_4, …, B_14.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// `Σ_{n≥1} n^{-s}` for `s > 1`: partial sum plus the Euler–Maclaurin tail.
/// Returns the value and the magnitude of the first omitted correction.
fn zeta_euler_maclaurin(s: f64, cutoff: usize) -> (f64, f64) {
    let n = cutoff as f64;
    let head: f64 = (1..cutoff).map(|k| (k as f64).powf(-s)).sum();
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) … (s+2k−2) and (2k)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut last = 0.0;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let k = k + 1;
        let term = b / fact * rising * n.powf(-s - (2 * k - 1) as f64);
        if k == BERNOULLI_EVEN.len() {
            last = term.abs();
            break;
        }
        tail += term;
        rising *= (s + (2 * k - 1) as f64) * (s + (2 * k) as f64);
        fact *= ((2 * k + 1) * (2 * k + 2)) as f64;
    }
    (head + tail, last)
}

/// Hilbert–Schmidt norm `‖𝚲^{-β}‖_{L₂(𝐇₀)} = (2 Σ_n (ϑπ²n²)^{-β})^{1/2}`.
///
/// `𝚲` acts on both components with eigenvalues `|λ_n|^{1/2}`, hence the factor 2.
/// The series is summed exactly up to a cutoff and the remainder is taken from the
/// Euler–Maclaurin expansion; the cutoff is doubled until the first neglected
/// correction of the squared norm is below `tol²`.
pub fn hs_norm_lambda_pow(theta: f64, beta: f64, tol: f64) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::invalid("theta", theta, "must be positive and finite"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", tol, "must be positive"));
    }
    if beta.is_nan() || beta <= 0.5 {
        return Err(Error::DivergentSeries(format!(
            "Σ (ϑπ²n²)^(-β) diverges for β = {beta} ≤ 1/2"
        )));
    }
    let s = 2.0 * beta;
    let scale = 2.0 * (theta * PI * PI).powf(-beta);
    let mut cutoff = 16usize.max(s.ceil() as usize + 8);
    loop {
        let (zeta, remainder) = zeta_euler_maclaurin(s, cutoff);
        if scale * remainder < tol * tol || cutoff > 1 << 24 {
            return Ok((scale * zeta).sqrt());
        }
        cutoff *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn model_eigenvalues() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        assert_abs_diff_eq!(m.lambdas()[0], -PI * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(m.mus()[0], PI, epsilon = 1e-14);

        let m = SpectralModel::new(1.0, 3).unwrap();
        assert_abs_diff_eq!(m.eigenvalue(3), -9.0 * PI * PI, epsilon = 1e-12);

        let m = SpectralModel::new(4.0, 2).unwrap();
        assert_abs_diff_eq!(m.mus()[0], 2.0 * PI, epsilon = 1e-14);
        assert_abs_diff_eq!(m.mus()[1], 4.0 * PI, epsilon = 1e-14);
        assert!(m.lambdas().windows(2).all(|w| w[1] < w[0]));
        assert!(m.mus().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn model_rejects_bad_input() {
        assert!(SpectralModel::new(0.0, 3).is_err());
        assert!(SpectralModel::new(-1.0, 3).is_err());
        assert!(SpectralModel::new(f64::NAN, 3).is_err());
        assert!(SpectralModel::new(1.0, 0).is_err());
    }

    #[test]
    fn eval_single_modes() {
        let v = eval_field(&FieldCoeffs::new(vec![1.0]).unwrap(), &[0.5]).unwrap();
        assert_abs_diff_eq!(v[0], SQRT_2, epsilon = 1e-15);
        let v = eval_field(&FieldCoeffs::new(vec![0.0, 1.0]).unwrap(), &[0.25]).unwrap();
        assert_abs_diff_eq!(v[0], SQRT_2, epsilon = 1e-15);
        // sin(π/2) + sin(π) evaluated independently
        let expect = SQRT_2 * ((PI / 2.0).sin() + PI.sin());
        let v = eval_field(&FieldCoeffs::new(vec![1.0, 1.0]).unwrap(), &[0.5]).unwrap();
        assert_abs_diff_eq!(v[0], expect, epsilon = 1e-15);
    }

    #[test]
    fn eval_rejects_points_outside() {
        let f = FieldCoeffs::new(vec![1.0]).unwrap();
        assert!(matches!(
            eval_field(&f, &[0.0]),
            Err(Error::PointOutsideDomain(_))
        ));
        assert!(eval_field(&f, &[1.0]).is_err());
        assert!(eval_field(&f, &[1.5]).is_err());
    }

    #[test]
    fn hr_norm_examples() {
        let m = SpectralModel::new(1.0, 2).unwrap();
        let e1 = FieldCoeffs::new(vec![1.0, 0.0]).unwrap();
        let e2 = FieldCoeffs::new(vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(norm_hr(&e1, 0.0, &m), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_hr(&e1, 0.5, &m), PI, epsilon = 1e-13);
        assert_abs_diff_eq!(norm_hr(&e2, -0.5, &m), 1.0 / (2.0 * PI), epsilon = 1e-15);
        // non-integer 2r goes through exp/ln
        assert_abs_diff_eq!(norm_hr(&e2, 0.3, &m), (4.0 * PI * PI).powf(0.3), epsilon = 1e-12);
    }

    #[test]
    fn bold_norm_examples() {
        let m = SpectralModel::new(1.0, 1).unwrap();
        let x = PairState::from_vecs(vec![1.0], vec![0.0]).unwrap();
        assert_abs_diff_eq!(norm_bold_hr(&x, 0.0, &m), 1.0, epsilon = 1e-15);
        let x = PairState::from_vecs(vec![0.0], vec![1.0]).unwrap();
        assert_abs_diff_eq!(norm_bold_hr(&x, 0.0, &m), 1.0 / PI, epsilon = 1e-15);
        let x = PairState::from_vecs(vec![1.0], vec![PI]).unwrap();
        assert_abs_diff_eq!(norm_bold_hr(&x, 0.0, &m), SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn projection_examples() {
        let x = PairState::from_vecs(vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        let p = project(&x, 2).unwrap();
        assert_eq!(p.pos.as_slice(), &[1.0, 2.0, 0.0]);
        assert_eq!(p.vel.as_slice(), &[4.0, 5.0, 0.0]);
        assert_eq!(project(&x, 3).unwrap(), x);
        assert_eq!(project(&x, 0).unwrap(), PairState::zeros(3));
        assert!(project(&x, 4).is_err());
    }

    #[test]
    fn pair_state_rejects_mismatch_and_nan() {
        assert!(PairState::from_vecs(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PairState::from_vecs(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn hs_norm_examples() {
        let v = hs_norm_lambda_pow(1.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        let v = hs_norm_lambda_pow(4.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (1.0f64 / 12.0).sqrt(), epsilon = 1e-12);
        assert!(matches!(
            hs_norm_lambda_pow(1.0, 0.5, 1e-8),
            Err(Error::DivergentSeries(_))
        ));
        assert!(hs_norm_lambda_pow(1.0, 0.3, 1e-8).is_err());
    }

    #[test]
    fn hs_norm_beta_two_closed_form() {
        // ζ(4) = π⁴/90
        let v = hs_norm_lambda_pow(1.0, 2.0, 1e-12).unwrap();
        let expect = (2.0 * PI.powi(-4) * PI.powi(4) / 90.0).sqrt();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-13);
    }
}
