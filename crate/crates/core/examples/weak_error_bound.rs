//! The explicit weak-error bound for the Anderson coefficients as a function
//! of the Galerkin level, next to its predicted decay `λ_cut^{β−γ}`.

use specwave::analysis::{anderson_exponents, exp_neg_norm_cb2, predicted_exponent, theoretical_weak_bound, BoundParams};
use specwave::spectral::{hs_norm_lambda_pow, SpectralModel};

fn main() -> specwave::Result<()> {
    let eps = 0.5;
    let (gamma, beta) = anderson_exponents(eps)?;
    let rho = gamma - 0.5;
    let predicted = predicted_exponent(gamma, beta)?;
    let model = SpectralModel::new(1.0, 256)?;
    let hs = hs_norm_lambda_pow(1.0, beta, 1e-12)?;
    let b_lip = (1.0f64 / 3.0).sqrt();

    println!("eps = {eps}: gamma = {gamma}, beta = {beta}, rho = {rho}, |Λ^-β|_HS = {hs:.6}");
    println!("predicted decay: λ_cut^{:.3}, i.e. N^{:.3}", predicted.lambda_exponent, predicted.n_exponent);
    println!("{:>5} {:>14} {:>14}", "N", "lambda_cut", "bound");
    for n in [4, 8, 16, 32, 64, 128] {
        let lambda_cut = model.first_omitted_eigenvalue(n);
        let bound = theoretical_weak_bound(&BoundParams {
            t_final: 1.0,
            xi_l2_rho: 1.0,
            xi_l1_smooth: 1.0,
            f_rho_smooth: 0.0,
            f_rho: 0.0,
            f_lip: 0.0,
            b_rho_gamma: 1.0,
            b_rho_hs: 1.0,
            b_lip,
            c_f: 0.0,
            c_b: b_lip,
            hs,
            phi_cb2: exp_neg_norm_cb2(),
            lambda_cut,
            gamma,
            beta,
            rho: Some(rho),
        })?;
        println!("{n:>5} {lambda_cut:>14.2} {bound:>14.6e}");
    }
    Ok(())
}
