//! TOML run configuration.
//!
//! ```toml
//! [model]
//! theta = 1.0
//! n_ref = 128
//! initial_pos = [1.0]        # leading sine coefficients, zero-padded to n_ref
//! initial_vel = []
//!
//! [time]
//! t_final = 1.0
//! n_steps = 512
//!
//! [noise]
//! m_noise = 256              # default 2·n_ref
//! grid_points = 399          # default 4·max(n_ref, m_noise)
//!
//! [coefficients]
//! preset = "anderson"        # anderson | zero | additive-heat-kick
//! alpha = 0.0
//! beta = 1.0
//! drift = "0"                # expression in x, y
//!
//! [coefficients.declared_norms]
//! b_lip = 0.577
//!
//! [study]
//! levels = [4, 8, 16, 32, 64]
//! paths = 20000
//! seed = 2024
//! functional = "exp_neg_norm"
//!
//! [output]
//! dir = "out"
//! ```

use serde::{Deserialize, Serialize};

use crate::analysis::anderson_exponents;
use crate::coefficients::{CoefficientSpec, DeclaredNorms, DiffusionKind, PointwiseFn, PresetParams};
use crate::error::{Error, Result};
use crate::integrator::SimConfig;
use crate::mc::{Component, TestFunctional};
use crate::spectral::{PairState, SpectralModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub time: TimeSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub theta: f64,
    pub n_ref: usize,
    pub initial_pos: Vec<f64>,
    #[serde(default)]
    pub initial_vel: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub m_noise: Option<usize>,
    pub grid_points: Option<usize>,
    pub noise_refinement: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    #[serde(default = "default_preset")]
    pub preset: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub sigma: Option<f64>,
    /// Drift `f(x, y)`.
    pub drift: Option<String>,
    /// Pointwise diffusion multiplier `b(x, y)`; replaces the preset's diffusion.
    pub diffusion: Option<String>,
    pub declared_norms: Option<DeclaredNormsSection>,
}

fn default_preset() -> String {
    "anderson".into()
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        Self {
            preset: default_preset(),
            alpha: None,
            beta: None,
            sigma: None,
            drift: None,
            diffusion: None,
            declared_norms: None,
        }
    }
}

/// Declared norms plus the exponents `(γ, β, ρ)` they refer to.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredNormsSection {
    #[serde(default)]
    pub f_lip: f64,
    #[serde(default)]
    pub b_lip: f64,
    #[serde(default)]
    pub f_rho_smooth: f64,
    #[serde(default)]
    pub f_rho: f64,
    #[serde(default)]
    pub b_rho_gamma: f64,
    #[serde(default)]
    pub b_rho_hs: f64,
    #[serde(default)]
    pub c_f: f64,
    #[serde(default)]
    pub c_b: f64,
    /// Defaults to the Anderson choice at `ε = 1/2`.
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub rho: f64,
    /// Norms at `ρ = 0` for the moment envelope, when `rho` is not 0.
    pub f_rho0: Option<f64>,
    pub b_rho0_hs: Option<f64>,
}

impl DeclaredNormsSection {
    pub fn norms(&self) -> DeclaredNorms {
        DeclaredNorms {
            f_lip: self.f_lip,
            b_lip: self.b_lip,
            f_rho_smooth: self.f_rho_smooth,
            f_rho: self.f_rho,
            b_rho_gamma: self.b_rho_gamma,
            b_rho_hs: self.b_rho_hs,
            c_f: self.c_f,
            c_b: self.c_b,
        }
    }

    pub fn exponents(&self) -> Result<(f64, f64)> {
        let (g0, b0) = anderson_exponents(0.5)?;
        Ok((self.gamma.unwrap_or(g0), self.beta.unwrap_or(b0)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default)]
    pub levels: Vec<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "default_functional")]
    pub functional: String,
    #[serde(default)]
    pub psi_pos: Vec<f64>,
    #[serde(default)]
    pub psi_vel: Vec<f64>,
    pub mode: Option<usize>,
    pub component: Option<String>,
    #[serde(default)]
    pub monitor_rho: f64,
}

fn default_functional() -> String {
    "exp_neg_norm".into()
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            levels: Vec::new(),
            paths: None,
            seed: None,
            functional: default_functional(),
            psi_pos: Vec::new(),
            psi_vel: Vec::new(),
            mode: None,
            component: None,
            monitor_rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

fn padded(v: &[f64], n: usize, name: &str) -> Result<Vec<f64>> {
    if v.len() > n {
        return Err(Error::Config(format!("{name} has {} entries but n_ref = {n}", v.len())));
    }
    let mut out = v.to_vec();
    out.resize(n, 0.0);
    Ok(out)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn m_noise(&self) -> usize {
        self.noise.m_noise.unwrap_or(2 * self.model.n_ref)
    }

    pub fn coefficient_spec(&self) -> Result<CoefficientSpec> {
        let c = &self.coefficients;
        let n_ref = self.model.n_ref;
        let mut spec = CoefficientSpec::preset(
            &c.preset,
            PresetParams {
                sigma: c.sigma.unwrap_or(1.0),
                m_noise: self.m_noise(),
                n_modes: n_ref,
            },
        )?;
        if c.alpha.is_some() || c.beta.is_some() {
            match &mut spec.diffusion {
                DiffusionKind::Anderson { alpha, beta } => {
                    *alpha = c.alpha.unwrap_or(*alpha);
                    *beta = c.beta.unwrap_or(*beta);
                }
                _ => return Err(Error::Config("alpha/beta only apply to the anderson preset".into())),
            }
        }
        if let Some(src) = &c.drift {
            let e = crate::expr::Expr::parse(src)?;
            if !e.is_zero() {
                spec = spec.with_drift(PointwiseFn::from_expr(src)?);
            }
        }
        if let Some(src) = &c.diffusion {
            spec.diffusion = DiffusionKind::Pointwise(PointwiseFn::from_expr(src)?);
        }
        if let Some(d) = &c.declared_norms {
            spec = spec.with_declared_norms(d.norms())?;
        }
        Ok(spec)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let m = &self.model;
        if m.n_ref == 0 {
            return Err(Error::Config("model.n_ref must be at least 1".into()));
        }
        let m_noise = self.m_noise();
        let initial = PairState::from_vecs(
            padded(&m.initial_pos, m.n_ref, "initial_pos")?,
            padded(&m.initial_vel, m.n_ref, "initial_vel")?,
        )?;
        let cfg = SimConfig {
            model: SpectralModel::new(m.theta, m.n_ref)?,
            levels: self.study.levels.clone(),
            t_final: self.time.t_final,
            n_steps: self.time.n_steps,
            m_noise,
            grid_points: self
                .noise
                .grid_points
                .unwrap_or_else(|| crate::grid::GridWorkspace::default_points(m.n_ref, m_noise)),
            spec: self.coefficient_spec()?,
            initial,
            noise_refinement: self.noise.noise_refinement.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn functional(&self) -> Result<TestFunctional> {
        let s = &self.study;
        match s.functional.as_str() {
            "exp_neg_norm" => Ok(TestFunctional::ExpNegNorm),
            "cos_pairing" => {
                let n = self.model.n_ref;
                Ok(TestFunctional::CosPairing(PairState::from_vecs(
                    padded(&s.psi_pos, n, "psi_pos")?,
                    padded(&s.psi_vel, n, "psi_vel")?,
                )?))
            }
            "coordinate" => {
                let mode = s.mode.ok_or_else(|| Error::Config("missing field `mode` for coordinate functional".into()))?;
                let component = match s.component.as_deref().unwrap_or("pos") {
                    "pos" => Component::Pos,
                    "vel" => Component::Vel,
                    other => return Err(Error::Config(format!("component must be pos or vel, got `{other}`"))),
                };
                Ok(TestFunctional::Coordinate { mode, component })
            }
            other => Err(Error::Config(format!("unknown functional `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
theta = 1.0
n_ref = 16
initial_pos = [1.0]

[time]
t_final = 1.0
n_steps = 32

[study]
levels = [2, 4, 8]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(BASE).unwrap();
        let s = c.sim_config().unwrap();
        assert_eq!(s.m_noise, 32);
        assert_eq!(s.grid_points, 128);
        assert!(matches!(s.spec.diffusion, DiffusionKind::Anderson { alpha, beta } if alpha == 0.0 && beta == 1.0));
        assert_eq!(c.functional().unwrap(), TestFunctional::ExpNegNorm);
    }

    #[test]
    fn missing_field_is_named() {
        let text = BASE.replace("n_steps = 32", "");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("n_steps"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = BASE.replace("n_steps = 32", "n_steps = 32\nsteps = 3");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn drift_and_presets() {
        let text = format!("{BASE}\n[coefficients]\npreset = \"zero\"\ndrift = \"sin(pi*x) * tanh(y)\"\n");
        let s = RunConfig::parse(&text).unwrap().sim_config().unwrap();
        assert!(s.spec.drift.is_some());
        assert!(s.spec.diffusion.is_zero());
        let text = format!("{BASE}\n[coefficients]\npreset = \"zero\"\ndrift = \"y / 2\"\n");
        assert!(RunConfig::parse(&text).unwrap().sim_config().is_err());
        let text = format!("{BASE}\n[coefficients]\npreset = \"additive-heat-kick\"\nbeta = 1.0\n");
        assert!(RunConfig::parse(&text).unwrap().sim_config().is_err());
    }

    #[test]
    fn initial_too_long_rejected() {
        let text = BASE.replace("initial_pos = [1.0]", &format!("initial_pos = {:?}", vec![1.0; 17]));
        assert!(RunConfig::parse(&text).unwrap().sim_config().is_err());
    }
}
