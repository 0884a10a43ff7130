//! Rate regression, explicit weak-error and moment bounds, and `ℰ_r`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `log(error)` against `log(N)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::invalid("points", points.len() as f64, "need at least 3 points"));
    }
    for (i, &(n, e)) in points.iter().enumerate() {
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("N", n, "must be positive"));
        }
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::invalid("error", e, "must be positive"));
        }
        if points[..i].iter().any(|p| p.0 == n) {
            return Err(Error::invalid("N", n, "duplicate level"));
        }
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Inputs of the explicit weak-error bound. Norm names follow [`crate::coefficients::DeclaredNorms`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub t_final: f64,
    /// `‖ξ‖_{L²(ℙ; 𝐇_ρ)}`
    pub xi_l2_rho: f64,
    /// `‖ξ‖_{L¹(ℙ; 𝐇_{2(γ−β)})}`
    pub xi_l1_smooth: f64,
    pub f_rho_smooth: f64,
    pub f_rho: f64,
    pub f_lip: f64,
    pub b_rho_gamma: f64,
    pub b_rho_hs: f64,
    pub b_lip: f64,
    pub c_f: f64,
    pub c_b: f64,
    /// `‖𝚲^{−β}‖_{L₂(𝐇₀)}`
    pub hs: f64,
    /// `‖φ‖_{C_b²}`
    pub phi_cb2: f64,
    /// `inf` of `|λ_h|` over the discarded modes.
    pub lambda_cut: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Checked against `[0, 2(γ − β)]` when present.
    #[serde(default)]
    pub rho: Option<f64>,
}

fn check_exponents(gamma: f64, beta: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Hypothesis(format!("gamma > 0 (got {gamma})")));
    }
    if !(beta.is_finite() && beta > gamma / 2.0 && beta <= gamma) {
        return Err(Error::Hypothesis(format!(
            "beta in (gamma/2, gamma] (got beta = {beta}, gamma = {gamma})"
        )));
    }
    Ok(())
}

/// Explicit upper bound for `|E φ(X_T) − E φ(X_T^N)|`.
pub fn theoretical_weak_bound(p: &BoundParams) -> Result<f64> {
    check_exponents(p.gamma, p.beta)?;
    if !(p.lambda_cut.is_finite() && p.lambda_cut > 0.0) {
        return Err(Error::Hypothesis(format!("lambda_cut > 0 (got {})", p.lambda_cut)));
    }
    if !(p.t_final.is_finite() && p.t_final > 0.0) {
        return Err(Error::Hypothesis(format!("T > 0 (got {})", p.t_final)));
    }
    if let Some(rho) = p.rho {
        let top = 2.0 * (p.gamma - p.beta);
        if !(rho >= 0.0 && rho <= top) {
            return Err(Error::Hypothesis(format!("rho in [0, 2(gamma - beta)] = [0, {top}] (got {rho})")));
        }
    }
    let norms = [
        ("xi_l2_rho", p.xi_l2_rho),
        ("xi_l1_smooth", p.xi_l1_smooth),
        ("f_rho_smooth", p.f_rho_smooth),
        ("f_rho", p.f_rho),
        ("f_lip", p.f_lip),
        ("b_rho_gamma", p.b_rho_gamma),
        ("b_rho_hs", p.b_rho_hs),
        ("b_lip", p.b_lip),
        ("c_f", p.c_f),
        ("c_b", p.c_b),
        ("hs", p.hs),
        ("phi_cb2", p.phi_cb2),
    ];
    for (name, v) in norms {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Hypothesis(format!("{name} >= 0 (got {v})")));
        }
    }
    let t = p.t_final;
    let growth = (t * (p.c_f * p.c_f + 2.0 * p.c_b * p.c_b)).sqrt().max(1.0);
    let middle = p.xi_l1_smooth + p.f_rho_smooth + p.hs * p.hs * p.b_rho_gamma * p.b_rho_gamma;
    let exp_global = (t * (0.5 + 3.0 * p.f_lip + 4.0 * p.b_lip * p.b_lip)).exp();
    let exp_rho = (t * (2.0 * p.f_rho + p.b_rho_hs * p.b_rho_hs)).exp();
    Ok(p.phi_cb2
        * t.max(1.0)
        * (p.xi_l2_rho * p.xi_l2_rho).max(1.0)
        * middle
        * growth
        * exp_global
        * exp_rho
        * p.lambda_cut.powf(p.beta - p.gamma))
}

/// A-priori envelope for `sup_t (1 ∨ ‖X_t^N‖_{L²(ℙ; 𝐇_ρ)})`, uniform in `N`.
pub fn moment_envelope(t_final: f64, xi_l2_rho: f64, f_rho: f64, b_rho_hs: f64) -> f64 {
    xi_l2_rho.max(1.0) * (t_final * (f_rho + 0.5 * b_rho_hs * b_rho_hs)).exp()
}

/// `ℰ_r[x] = (Σ_{n≥0} x^{2n} Γ(r)^n / Γ(nr + 1))^{1/2}`.
pub fn mittag_envelope(r: f64, x: f64, tol: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid("r", r, "must be positive"));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::invalid("x", x, "must be non-negative"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid("tol", tol, "must lie in (0, 1)"));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let log_ratio = 2.0 * x.ln() + ln_gamma(r);
    let mut sum = 1.0;
    let mut prev = 1.0;
    for n in 1..1_000_000u32 {
        let term = (n as f64 * log_ratio - ln_gamma(n as f64 * r + 1.0)).exp();
        if !term.is_finite() {
            return Err(Error::NonFinite("mittag_envelope"));
        }
        sum += term;
        if term < tol * tol * sum && term <= prev {
            return Ok(sum.sqrt());
        }
        prev = term;
    }
    Err(Error::DivergentSeries("mittag_envelope did not settle".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedExponent {
    /// Exponent of `λ_N`: `β − γ`.
    pub lambda_exponent: f64,
    /// Exponent of `N` for `λ_N ∝ N²`: `2(β − γ)`.
    pub n_exponent: f64,
}

pub fn predicted_exponent(gamma: f64, beta: f64) -> Result<PredictedExponent> {
    check_exponents(gamma, beta)?;
    Ok(PredictedExponent {
        lambda_exponent: beta - gamma,
        n_exponent: 2.0 * (beta - gamma),
    })
}

/// `(γ, β)` for the Anderson model at accuracy `ε ∈ (0, 1]`, with the
/// predicted `N`-exponent `ε − 1`.
pub fn anderson_exponents(eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid("eps", eps, "must lie in (0, 1]"));
    }
    Ok((1.0 - eps / 4.0, 0.5 + eps / 4.0))
}

/// `‖φ‖_{C_b²}` of `exp(−‖x‖²)`: sum of the sup norms of `φ`, `φ'`, `φ''`.
pub fn exp_neg_norm_cb2() -> f64 {
    1.0 + std::f64::consts::SQRT_2 * (-0.5f64).exp() + 2.0
}

/// `‖φ‖_{C_b²}` of `cos(⟨ψ, x⟩)` given `‖ψ‖_{𝐇₀}`.
pub fn cos_pairing_cb2(psi_norm: f64) -> f64 {
    1.0 + psi_norm + psi_norm * psi_norm
}
