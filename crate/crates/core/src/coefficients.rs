//! Nemytskii drift `𝐅(v, w) = (0, f(·, v(·)))`, multiplicative diffusion
//! `𝐁(v, w)u = (0, (α + βv)·u)` and friends, and the truncated cylindrical noise.
//!
//! Products are formed pseudo-spectrally: position and noise are synthesized
//! on the grid, multiplied pointwise and analyzed back to the Galerkin modes.
//! For the `anderson` kind both factors are sine polynomials (degrees `N` and
//! `M`); their product vanishes to second order at the boundary, so the
//! analysis error decays like `G⁻³` and `G ≥ N + M` keeps the polynomial part
//! of the product free of aliasing in the retained modes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{GridScratch, GridWorkspace};
use crate::spectral::{FieldCoeffs, PairState, SpectralModel};

/// A pointwise map `(x, y) ↦ g(x, y)` with a printable label.
#[derive(Clone)]
pub struct PointwiseFn {
    label: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl PointwiseFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn from_expr(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(Self::new(src.trim(), move |x, y| e.eval(x, y)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }
}

impl fmt::Debug for PointwiseFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PointwiseFn({})", self.label)
    }
}

#[derive(Debug, Clone)]
pub enum DiffusionKind {
    /// `(α + βv(x)) u(x)`; `α = β = 0` is the zero diffusion.
    Anderson { alpha: f64, beta: f64 },
    /// `b(x, v(x)) u(x)`.
    Pointwise(PointwiseFn),
    /// State-independent: noise mode `k` is mapped to `columns[k - 1]`.
    Additive { columns: Vec<FieldCoeffs> },
}

impl DiffusionKind {
    pub fn is_zero(&self) -> bool {
        match self {
            DiffusionKind::Anderson { alpha, beta } => *alpha == 0.0 && *beta == 0.0,
            DiffusionKind::Additive { columns } => columns
                .iter()
                .all(|c| c.as_slice().iter().all(|v| *v == 0.0)),
            DiffusionKind::Pointwise(_) => false,
        }
    }

    /// `σ e_k` for the noise modes `k = 1..=m_noise`, stored with `n_modes` entries.
    pub fn additive_diagonal(sigma: f64, m_noise: usize, n_modes: usize) -> Self {
        let columns = (1..=m_noise)
            .map(|k| {
                let mut c = FieldCoeffs::zeros(n_modes);
                if k <= n_modes {
                    c.as_mut_slice()[k - 1] = sigma;
                }
                c
            })
            .collect();
        DiffusionKind::Additive { columns }
    }
}

/// Norms of `𝐅` and `𝐁` as declared by the user for bound arithmetic.
/// None of these are estimated from the coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredNorms {
    /// `|𝐅|_{Lip⁰(𝐇₀, 𝐇₀)}`
    pub f_lip: f64,
    /// `|𝐁|_{Lip⁰(𝐇₀, L₂(U, 𝐇₀))}`
    pub b_lip: f64,
    /// `‖𝐅|_{𝐇_ρ}‖_{Lip⁰(𝐇_ρ, 𝐇_{2(γ−β)})}`
    pub f_rho_smooth: f64,
    /// `‖𝐅|_{𝐇_ρ}‖_{Lip⁰(𝐇_ρ, 𝐇_ρ)}`
    pub f_rho: f64,
    /// `‖𝐁|_{𝐇_ρ}‖_{Lip⁰(𝐇_ρ, L(U, 𝐇_γ))}`
    pub b_rho_gamma: f64,
    /// `‖𝐁|_{𝐇_ρ}‖_{Lip⁰(𝐇_ρ, L₂(U, 𝐇_ρ))}`
    pub b_rho_hs: f64,
    /// Bound on the second derivative of `𝐅`.
    pub c_f: f64,
    /// Bound on the second derivative of `𝐁`.
    pub c_b: f64,
}

impl DeclaredNorms {
    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("f_lip", self.f_lip),
            ("b_lip", self.b_lip),
            ("f_rho_smooth", self.f_rho_smooth),
            ("f_rho", self.f_rho),
            ("b_rho_gamma", self.b_rho_gamma),
            ("b_rho_hs", self.b_rho_hs),
            ("c_f", self.c_f),
            ("c_b", self.c_b),
        ];
        for (name, v) in entries {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, v, "declared norms must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientSpec {
    /// `None` is `f ≡ 0`.
    pub drift: Option<PointwiseFn>,
    pub diffusion: DiffusionKind,
    pub declared_norms: Option<DeclaredNorms>,
}

/// Extra inputs for presets that need them.
#[derive(Debug, Clone, Copy)]
pub struct PresetParams {
    pub sigma: f64,
    pub m_noise: usize,
    pub n_modes: usize,
}

impl CoefficientSpec {
    /// Hyperbolic Anderson model `(α + βv) Ẇ` with zero drift.
    pub fn anderson(alpha: f64, beta: f64) -> Self {
        Self {
            drift: None,
            diffusion: DiffusionKind::Anderson { alpha, beta },
            declared_norms: None,
        }
    }

    pub fn zero() -> Self {
        Self::anderson(0.0, 0.0)
    }

    /// Named presets: `anderson`, `zero`, `additive-heat-kick`.
    pub fn preset(key: &str, params: PresetParams) -> Result<Self> {
        match key {
            "anderson" => Ok(Self::anderson(0.0, 1.0)),
            "zero" => Ok(Self::zero()),
            "additive-heat-kick" => Ok(Self {
                drift: None,
                diffusion: DiffusionKind::additive_diagonal(params.sigma, params.m_noise, params.n_modes),
                declared_norms: None,
            }),
            other => Err(Error::Config(format!("unknown coefficient preset `{other}`"))),
        }
    }

    pub fn with_drift(mut self, f: PointwiseFn) -> Self {
        self.drift = Some(f);
        self
    }

    pub fn with_declared_norms(mut self, norms: DeclaredNorms) -> Result<Self> {
        norms.validate()?;
        self.declared_norms = Some(norms);
        Ok(self)
    }

    /// Largest Galerkin size these coefficients can serve (additive columns bound it).
    pub(crate) fn max_modes(&self) -> Option<usize> {
        match &self.diffusion {
            DiffusionKind::Additive { columns } => columns.iter().map(FieldCoeffs::len).min(),
            _ => None,
        }
    }

    pub(crate) fn noise_modes_required(&self) -> Option<usize> {
        match &self.diffusion {
            DiffusionKind::Additive { columns } => Some(columns.len()),
            _ => None,
        }
    }

    fn needs_grid_noise(&self) -> bool {
        match &self.diffusion {
            DiffusionKind::Anderson { beta, .. } => *beta != 0.0,
            DiffusionKind::Pointwise(_) => true,
            DiffusionKind::Additive { .. } => false,
        }
    }
}

/// Coefficients `⟨e_k, ΔW⟩`, `k = 1..=M`, of one Wiener increment over `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

impl NoiseIncrement {
    pub fn new(dw: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", dt, "must be positive"));
        }
        Ok(Self { dw, dt })
    }

    pub fn zeros(m: usize, dt: f64) -> Result<Self> {
        Self::new(vec![0.0; m], dt)
    }

    pub fn m_modes(&self) -> usize {
        self.dw.len()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dw: self.dw.iter().map(|v| s * v).collect(),
            dt: self.dt,
        }
    }
}

/// `M` independent `Normal(0, dt)` draws from `rng`.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, m_modes: usize, dt: f64) -> Result<NoiseIncrement> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", dt, "must be positive"));
    }
    if m_modes == 0 {
        return Err(Error::invalid("m_modes", 0.0, "must be at least 1"));
    }
    let mut dw = vec![0.0; m_modes];
    fill_noise(rng, &mut dw, dt, 1);
    Ok(NoiseIncrement { dw, dt })
}

/// Increment over `dt` assembled from `substeps` finer increments of the same
/// Brownian path. `substeps = 1` consumes the stream exactly like [`sample_noise`].
pub(crate) fn fill_noise<R: Rng + ?Sized>(rng: &mut R, dw: &mut [f64], dt: f64, substeps: usize) {
    let scale = (dt / substeps.max(1) as f64).sqrt();
    dw.iter_mut().for_each(|v| *v = 0.0);
    for _ in 0..substeps.max(1) {
        for v in dw.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += scale * z;
        }
    }
}

/// Buffers for evaluating `𝐅` and `𝐁` at one Galerkin level.
pub struct CoefficientScratch {
    pub(crate) grid: GridScratch,
    pub(crate) values: Vec<f64>,
    pub(crate) product: Vec<f64>,
    pub(crate) coeffs: Vec<f64>,
    pub(crate) nodes: Vec<f64>,
}

impl CoefficientScratch {
    pub fn new(grid: &GridWorkspace) -> Self {
        Self {
            grid: grid.scratch(),
            values: vec![0.0; grid.n_points()],
            product: vec![0.0; grid.n_points()],
            coeffs: vec![0.0; grid.n_points()],
            nodes: grid.nodes(),
        }
    }
}

/// Noise field `ΔW(x_j) = Σ_{k≤M} dw_k e_k(x_j)` on the grid nodes, or `None`
/// when the diffusion never needs point values of the noise.
pub fn noise_on_grid(
    noise: &NoiseIncrement,
    spec: &CoefficientSpec,
    grid: &GridWorkspace,
    scratch: &mut GridScratch,
) -> Option<Vec<f64>> {
    if !spec.needs_grid_noise() {
        return None;
    }
    let mut out = vec![0.0; grid.n_points()];
    grid.synthesize_into(&noise.dw, &mut out, scratch);
    Some(out)
}

/// Adds `scale · P_N f(·, v(·))` to `vel`, with `v` given by the sine coefficients `pos`.
pub(crate) fn add_drift(
    f: &PointwiseFn,
    pos: &[f64],
    vel: &mut [f64],
    scale: f64,
    grid: &GridWorkspace,
    s: &mut CoefficientScratch,
) -> Result<()> {
    grid.synthesize_into(pos, &mut s.values, &mut s.grid);
    for ((p, &v), &x) in s.product.iter_mut().zip(&s.values).zip(&s.nodes) {
        *p = f.eval(x, v);
    }
    if s.product.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("drift function"));
    }
    let n = vel.len();
    grid.analyze_into(&s.product, &mut s.coeffs[..n], &mut s.grid);
    for (c, d) in vel.iter_mut().zip(&s.coeffs[..n]) {
        *c += scale * d;
    }
    Ok(())
}

/// Adds `P_N 𝐁(v) ΔW` (velocity component) to `vel`.
pub(crate) fn add_diffusion(
    spec: &CoefficientSpec,
    pos: &[f64],
    vel: &mut [f64],
    dw: &[f64],
    dw_grid: Option<&[f64]>,
    grid: &GridWorkspace,
    s: &mut CoefficientScratch,
) -> Result<()> {
    let n = vel.len();
    match &spec.diffusion {
        DiffusionKind::Anderson { alpha, beta } => {
            if *beta == 0.0 {
                if *alpha != 0.0 {
                    for (c, w) in vel.iter_mut().zip(dw) {
                        *c += alpha * w;
                    }
                }
                return Ok(());
            }
            let dw_grid = dw_grid.expect("grid noise present for multiplicative diffusion");
            grid.synthesize_into(pos, &mut s.values, &mut s.grid);
            for ((p, &v), &w) in s.product.iter_mut().zip(&s.values).zip(dw_grid) {
                *p = (alpha + beta * v) * w;
            }
        }
        DiffusionKind::Pointwise(b) => {
            let dw_grid = dw_grid.expect("grid noise present for multiplicative diffusion");
            grid.synthesize_into(pos, &mut s.values, &mut s.grid);
            for (((p, &v), &w), &x) in s.product.iter_mut().zip(&s.values).zip(dw_grid).zip(&s.nodes) {
                *p = b.eval(x, v) * w;
            }
        }
        DiffusionKind::Additive { columns } => {
            for (col, &w) in columns.iter().zip(dw) {
                if w != 0.0 {
                    for (c, b) in vel.iter_mut().zip(col.as_slice()) {
                        *c += w * b;
                    }
                }
            }
            if vel.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("diffusion"));
            }
            return Ok(());
        }
    }
    if s.product.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("diffusion"));
    }
    grid.analyze_into(&s.product, &mut s.coeffs[..n], &mut s.grid);
    for (c, d) in vel.iter_mut().zip(&s.coeffs[..n]) {
        *c += d;
    }
    Ok(())
}

fn check_grid(grid: &GridWorkspace, n: usize) -> Result<()> {
    if grid.n_points() < n {
        return Err(Error::invalid(
            "grid_points",
            grid.n_points() as f64,
            "must be at least the number of Galerkin modes",
        ));
    }
    Ok(())
}

/// `𝐏_N 𝐅(x) = (0, P_N f(·, v(·)))`.
pub fn apply_drift(
    state: &PairState,
    spec: &CoefficientSpec,
    grid: &GridWorkspace,
    model: &SpectralModel,
) -> Result<PairState> {
    let n = state.n_modes();
    check_grid(grid, n.max(model.n_modes().min(n)))?;
    let mut out = PairState::zeros(n);
    if let Some(f) = &spec.drift {
        let mut s = CoefficientScratch::new(grid);
        add_drift(f, state.pos.as_slice(), out.vel.as_mut_slice(), 1.0, grid, &mut s)?;
    }
    Ok(out)
}

/// `𝐏_N 𝐁(x) ΔW = (0, P_N[(α + βv)·ΔW])` (or the pointwise/additive analogue).
pub fn apply_diffusion(
    state: &PairState,
    noise: &NoiseIncrement,
    spec: &CoefficientSpec,
    grid: &GridWorkspace,
    model: &SpectralModel,
) -> Result<PairState> {
    let n = state.n_modes();
    if n > model.n_modes() {
        return Err(Error::LengthMismatch {
            expected: model.n_modes(),
            got: n,
        });
    }
    check_grid(grid, n.max(noise.m_modes()))?;
    let mut out = PairState::zeros(n);
    let mut s = CoefficientScratch::new(grid);
    let dw_grid = noise_on_grid(noise, spec, grid, &mut s.grid);
    add_diffusion(
        spec,
        state.pos.as_slice(),
        out.vel.as_mut_slice(),
        &noise.dw,
        dw_grid.as_deref(),
        grid,
        &mut s,
    )?;
    Ok(out)
}

/// `Σ_{k≤M} ‖𝐏_N 𝐁(x) e_k‖²_{𝐇₀}`: the Itô correction rate captured by `M`
/// noise modes. Nondecreasing in `M`; compare against a larger `M` to measure
/// the truncation.
pub fn diffusion_hs_sq(
    state: &PairState,
    spec: &CoefficientSpec,
    grid: &GridWorkspace,
    model: &SpectralModel,
    m_noise: usize,
) -> Result<f64> {
    let n = state.n_modes();
    let weights = &model.inv_abs_lambdas()[..n];
    match &spec.diffusion {
        DiffusionKind::Additive { columns } => Ok(columns
            .iter()
            .take(m_noise)
            .map(|col| {
                col.as_slice()
                    .iter()
                    .zip(weights)
                    .map(|(b, w)| w * b * b)
                    .sum::<f64>()
            })
            .sum()),
        kind => {
            check_grid(grid, n.max(m_noise))?;
            let mut s = CoefficientScratch::new(grid);
            // multiplier g(x) on the grid
            grid.synthesize_into(state.pos.as_slice(), &mut s.values, &mut s.grid);
            let g: Vec<f64> = match kind {
                DiffusionKind::Anderson { alpha, beta } => {
                    s.values.iter().map(|v| alpha + beta * v).collect()
                }
                DiffusionKind::Pointwise(b) => s
                    .values
                    .iter()
                    .zip(&s.nodes)
                    .map(|(&v, &x)| b.eval(x, v))
                    .collect(),
                DiffusionKind::Additive { .. } => unreachable!(),
            };
            // Parseval in the noise index: Σ_k ⟨e_n, g e_k⟩² = ‖P_M (g e_n)‖²
            let mut total = 0.0;
            let mut proj = vec![0.0; m_noise];
            for (i, w) in weights.iter().enumerate() {
                let mode = (i + 1) as f64;
                for ((p, &gv), &x) in s.product.iter_mut().zip(&g).zip(&s.nodes) {
                    *p = gv * std::f64::consts::SQRT_2 * (mode * PI * x).sin();
                }
                grid.analyze_into(&s.product, &mut proj, &mut s.grid);
                total += w * proj.iter().map(|c| c * c).sum::<f64>();
            }
            Ok(total)
        }
    }
}
