//! TOML experiment configuration: a flat, typed key-value file with the
//! sections grids / stencil / cutoff / solver / series / forcing / dynamics.
//! Unknown keys are rejected with the offending key named.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::builder::{BuildInputs, BuildOptions};
use crate::dynamics::VerifyOptions;
use crate::error::{Error, Result};
use crate::forcing::{ForcingFamily, ForcingTerm};
use crate::grid::{Grid1D, Grid2D};
use crate::operator::SolverOptions;

fn default_xi_min() -> f64 {
    -12.0
}
fn default_xi_max() -> f64 {
    12.0
}
fn default_xi_n() -> usize {
    193
}
fn default_x_min() -> f64 {
    -20.0
}
fn default_x_max() -> f64 {
    20.0
}
fn default_x_n() -> usize {
    321
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsConfig {
    #[serde(default = "default_xi_min")]
    pub xi_min: f64,
    #[serde(default = "default_xi_max")]
    pub xi_max: f64,
    #[serde(default = "default_xi_n")]
    pub xi_n: usize,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_x_n")]
    pub x_n: usize,
}

impl Default for GridsConfig {
    fn default() -> Self {
        Self {
            xi_min: default_xi_min(),
            xi_max: default_xi_max(),
            xi_n: default_xi_n(),
            x_min: default_x_min(),
            x_max: default_x_max(),
            x_n: default_x_n(),
        }
    }
}

fn default_u_star() -> f64 {
    0.1
}
fn default_nu() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilConfig {
    #[serde(default = "default_u_star")]
    pub u_star: f64,
    #[serde(default = "default_nu")]
    pub nu: usize,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self {
            u_star: default_u_star(),
            nu: default_nu(),
        }
    }
}

fn default_xi_cap() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    /// Plateau half-width Ξ: the forcing is untouched on |ξ| ≤ Ξ and
    /// smoothly switched off on Ξ < |ξ| < Ξ+1.
    #[serde(default = "default_xi_cap")]
    pub xi_cap: f64,
}

impl Default for CutoffConfig {
    fn default() -> Self {
        Self {
            xi_cap: default_xi_cap(),
        }
    }
}

fn default_alpha() -> u32 {
    1
}
fn default_weighted() -> bool {
    true
}
fn default_solve_tol() -> f64 {
    1e-10
}
fn default_condition_bound() -> f64 {
    1e13
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_alpha")]
    pub alpha: u32,
    #[serde(default = "default_weighted")]
    pub orthogonality_weighted: bool,
    #[serde(default = "default_solve_tol")]
    pub solve_tol: f64,
    #[serde(default = "default_condition_bound")]
    pub condition_bound: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            orthogonality_weighted: default_weighted(),
            solve_tol: default_solve_tol(),
            condition_bound: default_condition_bound(),
        }
    }
}

fn default_order() -> usize {
    4
}
fn default_tail_ratio() -> f64 {
    0.1
}
fn default_eps_scan() -> f64 {
    0.2
}
fn default_guard() -> f64 {
    100.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_tail_ratio")]
    pub tail_ratio_threshold: f64,
    #[serde(default = "default_eps_scan")]
    pub eps_scan_max: f64,
    #[serde(default = "default_guard")]
    pub divergence_guard: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            order: default_order(),
            tail_ratio_threshold: default_tail_ratio(),
            eps_scan_max: default_eps_scan(),
            divergence_guard: default_guard(),
        }
    }
}

/// Forcing section; `csv` defers to an external per-order profile table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ForcingConfig {
    Zero,
    Gaussian { amplitude: f64, x0: f64, sigma: f64 },
    Sech2 { amplitude: f64 },
    Poly { terms: Vec<ForcingTerm> },
    Csv { path: String },
}

impl ForcingConfig {
    pub fn resolve(&self, base_dir: &Path) -> Result<ForcingFamily> {
        let fam = match self {
            ForcingConfig::Zero => ForcingFamily::Zero,
            ForcingConfig::Gaussian {
                amplitude,
                x0,
                sigma,
            } => ForcingFamily::Gaussian {
                amplitude: *amplitude,
                x0: *x0,
                sigma: *sigma,
            },
            ForcingConfig::Sech2 { amplitude } => ForcingFamily::Sech2 {
                amplitude: *amplitude,
            },
            ForcingConfig::Poly { terms } => ForcingFamily::Poly {
                terms: terms.clone(),
            },
            ForcingConfig::Csv { path } => {
                let p = base_dir.join(path);
                let text = std::fs::read_to_string(&p).map_err(|e| {
                    Error::Config(format!("cannot read forcing CSV {}: {e}", p.display()))
                })?;
                ForcingFamily::from_csv(&text)?
            }
        };
        fam.validate()?;
        Ok(fam)
    }
}

impl Default for ForcingConfig {
    /// Finite ε-polynomial with nonzero orders 2..5: every truncation order
    /// in the default experiments sees a genuine next-order term.
    fn default() -> Self {
        ForcingConfig::Poly {
            terms: vec![
                ForcingTerm {
                    order: 2,
                    shape: crate::forcing::Profile::Gaussian {
                        amplitude: 1.0,
                        x0: 0.0,
                        sigma: 1.5,
                    },
                },
                ForcingTerm {
                    order: 3,
                    shape: crate::forcing::Profile::Sech2 { amplitude: 0.8 },
                },
                ForcingTerm {
                    order: 4,
                    shape: crate::forcing::Profile::Gaussian {
                        amplitude: 0.6,
                        x0: 0.5,
                        sigma: 2.0,
                    },
                },
                ForcingTerm {
                    order: 5,
                    shape: crate::forcing::Profile::Gaussian {
                        amplitude: 0.5,
                        x0: -0.5,
                        sigma: 1.0,
                    },
                },
            ],
        }
    }
}

fn default_c_tilde() -> f64 {
    0.5
}
fn default_ode_dt() -> f64 {
    0.01
}
fn default_sample_dt() -> f64 {
    0.5
}
fn default_pde_refine() -> usize {
    12
}
fn default_pde_dt_factor() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "default_c_tilde")]
    pub c_tilde: f64,
    #[serde(default = "default_ode_dt")]
    pub ode_dt: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default = "default_pde_refine")]
    pub pde_refine: usize,
    #[serde(default = "default_pde_dt_factor")]
    pub pde_dt_factor: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            c_tilde: default_c_tilde(),
            ode_dt: default_ode_dt(),
            sample_dt: default_sample_dt(),
            pde_refine: default_pde_refine(),
            pde_dt_factor: default_pde_dt_factor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub grids: GridsConfig,
    #[serde(default)]
    pub stencil: StencilConfig,
    #[serde(default)]
    pub cutoff: CutoffConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default = "ForcingConfig::default")]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a config file; returns the parsed config together with the
    /// SHA-256 of the raw bytes (embedded in every derived output).
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Error::Config("config is not valid UTF-8".into()))?;
        let cfg = Self::from_toml(&text)?;
        Ok((cfg, crate::report::sha256_hex(&bytes)))
    }

    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            order: self.series.order,
            u_star: self.stencil.u_star,
            nu: self.stencil.nu,
            xi_cap: self.cutoff.xi_cap,
            solver: SolverOptions {
                alpha: self.solver.alpha,
                orthogonality_weighted: self.solver.orthogonality_weighted,
                solve_tol: self.solver.solve_tol,
                condition_bound: self.solver.condition_bound,
            },
            tail_ratio_threshold: self.series.tail_ratio_threshold,
            eps_scan_max: self.series.eps_scan_max,
            divergence_guard: self.series.divergence_guard,
            bound_c_floor: 1.0,
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            refine: self.dynamics.pde_refine,
            dt_factor: self.dynamics.pde_dt_factor,
            sample_dt: self.dynamics.sample_dt,
            ode_dt: self.dynamics.ode_dt,
            c_tilde: self.dynamics.c_tilde,
        }
    }

    pub fn grids(&self) -> Result<Arc<Grid2D>> {
        let xi = Grid1D::uniform(self.grids.xi_min, self.grids.xi_max, self.grids.xi_n)?;
        let x = Grid1D::uniform(self.grids.x_min, self.grids.x_max, self.grids.x_n)?;
        Grid2D::new(xi, x, self.cutoff.xi_cap)
    }

    pub fn build_inputs(&self, base_dir: &Path) -> Result<BuildInputs> {
        let grids = self.grids()?;
        let forcing = self.forcing.resolve(base_dir)?;
        BuildInputs::new(grids, forcing, self.build_options())
    }
}
