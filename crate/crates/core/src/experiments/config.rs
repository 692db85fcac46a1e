//! Declarative experiment configuration (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::construct::{BandwidthKernelFamily, KernelPair};
use crate::densities::{density_by_name, DensityModel};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, ORDER_TOL};
use crate::quadrature::QuadratureSpec;

/// Which kernel is used at bandwidth `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelMode {
    /// A conventional order-`s` kernel `K₍₀₎ + c·K₍ₛ₎` with `c` fixed.
    #[serde(rename = "fixed-order-s")]
    FixedOrder,
    /// `K₍₀₎ + hᵃ K₍ₛ₎`.
    #[serde(rename = "bandwidth-dependent")]
    BandwidthDependent,
    /// `K₍₀₎` alone (order above `s`).
    #[serde(rename = "k0-only")]
    K0Only,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "bias-curve")]
    BiasCurve,
    #[serde(rename = "variation-curve")]
    VariationCurve,
    #[serde(rename = "remark3")]
    Remark3,
    /// Compact-support refinement: `bias/hˢ` against the continuity modulus `ω(hM)`.
    #[serde(rename = "modulus-bound")]
    ModulusBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Base profile name.
    pub base: String,
    pub s: usize,
    #[serde(default = "one")]
    pub a_exponent: f64,
    pub mode: KernelMode,
    /// `α_s` of the fixed-order kernel; defaults to the base kernel's own `α_s` (or 1 if that vanishes).
    #[serde(default)]
    pub fixed_alpha: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// Geometric bandwidth grid `start · ratioᵏ`, `k = 0..count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for HGrid {
    fn default() -> Self {
        HGrid { start: 0.5, ratio: 0.5, count: 6 }
    }
}

impl HGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.start * self.ratio.powi(k as i32)).collect()
    }
}

/// `h(n) = scale · n^{−exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HCoupling {
    pub scale: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    /// Fixed bandwidth of the variation curve; defaults to the head of the h grid.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub h_coupling: Option<HCoupling>,
}

/// Settings of the modulus-scaled bias check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    /// Multiplier applied to the largest calibration ratio to obtain `C`; the bound is
    /// an order statement, so `C` is not expected to be sharp.
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
}

fn default_safety() -> f64 {
    2.0
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig { safety_factor: default_safety() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Remark3Config {
    /// Bandwidths of the `(n, h)` grid; `n` comes from the Monte Carlo section.
    pub h_values: Vec<f64>,
}

/// Evaluation grid for L1 errors of estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Grid spacing as a fraction of the bandwidth.
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
    /// Resolution error allowed, relative to each L1 value.
    #[serde(default = "default_grid_tol")]
    pub rel_tol: f64,
    /// Tail mass of the density left outside the grid.
    #[serde(default = "default_tail_mass")]
    pub tail_mass: f64,
}

fn default_step_fraction() -> f64 {
    0.04
}
fn default_grid_tol() -> f64 {
    0.01
}
fn default_tail_mass() -> f64 {
    1e-12
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { step_fraction: default_step_fraction(), rel_tol: default_grid_tol(), tail_mass: default_tail_mass() }
    }
}

/// Declared expectations, reported as pass/fail in the summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub bias_slope: Option<[f64; 2]>,
    #[serde(default)]
    pub variation_slope: Option<[f64; 2]>,
    /// Minimum relative decrease of `bias/hˢ` from the largest to the smallest `h`.
    #[serde(default)]
    pub min_scaled_bias_decrease: Option<f64>,
    #[serde(default)]
    pub max_remark3_violations: Option<usize>,
    #[serde(default)]
    pub max_modulus_violations: Option<usize>,
}

fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec::with_tol(1e-13, 1e-10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub density: String,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub h_grid: HGrid,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloConfig>,
    #[serde(default)]
    pub remark3: Option<Remark3Config>,
    #[serde(default)]
    pub modulus: ModulusConfig,
    pub seed: u64,
    pub experiments: Vec<ExperimentKind>,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_quadrature")]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub expect: Expectations,
}

impl ExperimentConfig {
    /// A config with default grids, tolerances and no experiments selected.
    pub fn new(name: &str, density: &str, kernel: KernelConfig, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            name: name.to_string(),
            density: density.to_string(),
            kernel,
            h_grid: HGrid::default(),
            monte_carlo: None,
            remark3: None,
            modulus: ModulusConfig::default(),
            seed,
            experiments: Vec::new(),
            output: None,
            quadrature: default_quadrature(),
            grid: GridConfig::default(),
            expect: Expectations::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        density_by_name(&self.density)?;
        Kernel::by_name(&self.kernel.base)?;
        if !(self.kernel.a_exponent > 0.0 && self.kernel.a_exponent <= 1.0) {
            return Err(Error::Config(format!("a_exponent must be in (0, 1], got {}", self.kernel.a_exponent)));
        }
        let g = &self.h_grid;
        if !(g.start > 0.0 && g.start <= 1.0) {
            return Err(Error::Config(format!("h_grid.start must be in (0, 1], got {}", g.start)));
        }
        if !(g.ratio > 0.0 && g.ratio < 1.0) {
            return Err(Error::Config("h_grid.ratio must be in (0, 1) so the grid strictly decreases".into()));
        }
        if g.count < 1 {
            return Err(Error::Config("h_grid.count must be at least 1".into()));
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.replications < 1 {
                return Err(Error::Config("monte_carlo.replications must be at least 1".into()));
            }
            if mc.n_grid.is_empty() || mc.n_grid[0] < 1 || mc.n_grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("monte_carlo.n_grid must be non-empty, positive and strictly increasing".into()));
            }
            if let Some(h) = mc.h {
                check_h(h)?;
            }
            if let Some(c) = &mc.h_coupling {
                if !(c.scale > 0.0 && c.exponent >= 0.0) {
                    return Err(Error::Config("h_coupling needs scale > 0 and exponent ≥ 0".into()));
                }
            }
        }
        if let Some(r3) = &self.remark3 {
            if r3.h_values.is_empty() {
                return Err(Error::Config("remark3.h_values must be non-empty".into()));
            }
            r3.h_values.iter().try_for_each(|&h| check_h(h))?;
        }
        for kind in &self.experiments {
            match kind {
                ExperimentKind::VariationCurve | ExperimentKind::Remark3 if self.monte_carlo.is_none() => {
                    return Err(Error::Config(format!("{kind:?} needs a [monte_carlo] section")));
                }
                ExperimentKind::Remark3 if self.kernel.mode != KernelMode::BandwidthDependent => {
                    return Err(Error::Config("remark3 needs kernel.mode = \"bandwidth-dependent\"".into()));
                }
                ExperimentKind::ModulusBound if Kernel::by_name(&self.kernel.base)?.support_radius().is_none() => {
                    return Err(Error::Config("modulus-bound needs a compactly supported base kernel".into()));
                }
                _ => {}
            }
        }
        if !(self.modulus.safety_factor >= 1.0 && self.modulus.safety_factor.is_finite()) {
            return Err(Error::Config("modulus.safety_factor must be a finite value ≥ 1".into()));
        }
        self.quadrature.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.grid.step_fraction > 0.0 && self.grid.rel_tol > 0.0 && self.grid.tail_mass > 0.0) {
            return Err(Error::Config("grid parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn density_model(&self) -> Result<DensityModel> {
        density_by_name(&self.density)
    }

    pub fn schedule(&self) -> Result<KernelSchedule> {
        KernelSchedule::new(&self.kernel)
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("bandwidth {h} outside (0, 1]")))
    }
}

/// Resolves the kernel used at each bandwidth for a kernel mode.
#[derive(Debug, Clone)]
pub struct KernelSchedule {
    pub mode: KernelMode,
    pub family: BandwidthKernelFamily,
    pub fixed_alpha: f64,
}

impl KernelSchedule {
    pub fn new(cfg: &KernelConfig) -> Result<KernelSchedule> {
        let base = Kernel::by_name(&cfg.base)?;
        let pair = KernelPair::construct(&base, cfg.s)?;
        let family = pair.family(cfg.a_exponent)?;
        let fixed_alpha = match cfg.fixed_alpha {
            Some(c) => c,
            None => {
                let own = base.moment(cfg.s)?;
                if own.abs() > ORDER_TOL {
                    own
                } else {
                    1.0
                }
            }
        };
        Ok(KernelSchedule { mode: cfg.mode, family, fixed_alpha })
    }

    pub fn pair(&self) -> &KernelPair {
        &self.family.pair
    }

    pub fn with_exponent(&self, a: f64) -> Result<KernelSchedule> {
        Ok(KernelSchedule { family: self.family.pair.family(a)?, ..self.clone() })
    }

    pub fn at(&self, h: f64) -> Result<Kernel> {
        match self.mode {
            KernelMode::FixedOrder => self.pair().combine(self.fixed_alpha),
            KernelMode::BandwidthDependent => self.family.at(h),
            KernelMode::K0Only => Ok(self.pair().k0.clone()),
        }
    }
}
