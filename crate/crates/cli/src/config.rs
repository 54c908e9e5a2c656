//! Run configuration. TOML, parsed strictly: unknown keys and out-of-range
//! values are rejected before anything is computed.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gfpk_core::{
    ChaosBasis, ChaosDensity, ComponentFn, DeclaredBound, DriftField, DriftKind, FixedPointOptions,
    Kernel, Potential, QuadratureGrid,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

const MAX_DIM: usize = 8;
const MAX_DEGREE: u32 = 64;
const MAX_QUADRATURE: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveLinear,
    SolveNonlinear,
    Ladder,
    Sweep,
    Verify,
    OracleCompare,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SolveLinear => "solve-linear",
            Mode::SolveNonlinear => "solve-nonlinear",
            Mode::Ladder => "ladder",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
            Mode::OracleCompare => "oracle-compare",
        }
    }
}

/// The bounded perturbation `v`. `bound` overrides the analytic bound and
/// is checked by sampling when the drift is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Constant {
        value: Vec<f64>,
        #[serde(default)]
        bound: Option<DeclaredBound>,
    },
    Gradient {
        potential: Potential,
        #[serde(default)]
        bound: Option<DeclaredBound>,
    },
    Vlasov {
        kernel: Kernel,
        /// Nodes per axis used to turn a density argument into point masses.
        measure_quadrature: usize,
        #[serde(default)]
        bound: Option<DeclaredBound>,
    },
    Componentwise {
        components: Vec<ComponentFn>,
        measure_quadrature: usize,
        #[serde(default)]
        bound: Option<DeclaredBound>,
    },
}

impl DriftConfig {
    pub fn build(&self, k: usize) -> Result<DriftField, CliError> {
        let field = match self {
            DriftConfig::Zero => Ok(DriftField::zero(k)),
            DriftConfig::Constant { value, bound } => {
                if value.len() != k {
                    return Err(CliError::Config(format!(
                        "constant drift has {} entries, k = {k}",
                        value.len()
                    )));
                }
                DriftField::new(DriftKind::Constant(value.clone()), k, *bound)
            }
            DriftConfig::Gradient { potential, bound } => {
                DriftField::new(DriftKind::Gradient(potential.clone()), k, *bound)
            }
            DriftConfig::Vlasov {
                kernel,
                measure_quadrature,
                bound,
            } => {
                check_range(
                    "drift.measure_quadrature",
                    *measure_quadrature,
                    1,
                    MAX_QUADRATURE,
                )?;
                DriftField::new(
                    DriftKind::Vlasov {
                        kernel: kernel.clone(),
                        quadrature: *measure_quadrature,
                    },
                    k,
                    *bound,
                )
            }
            DriftConfig::Componentwise {
                components,
                measure_quadrature,
                bound,
            } => {
                check_range(
                    "drift.measure_quadrature",
                    *measure_quadrature,
                    1,
                    MAX_QUADRATURE,
                )?;
                if components.len() != k {
                    return Err(CliError::Config(format!(
                        "componentwise drift has {} components, k = {k}",
                        components.len()
                    )));
                }
                DriftField::new(
                    DriftKind::Componentwise {
                        components: components.clone(),
                        quadrature: *measure_quadrature,
                    },
                    k,
                    *bound,
                )
            }
        };
        field.map_err(|e| CliError::Config(format!("drift: {e}")))
    }
}

/// Frozen measure argument for `solve-linear`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// `ρ ≡ 1`.
    #[default]
    Gaussian,
    CameronMartin {
        shift: Vec<f64>,
    },
    /// A density JSON file.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        let d = FixedPointOptions::default();
        FixedPointConfig {
            damping: d.damping,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
        }
    }
}

impl FixedPointConfig {
    pub fn options(&self) -> FixedPointOptions {
        FixedPointOptions {
            damping: self.damping,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    /// Number of bump tests.
    pub bumps: usize,
    /// Nodes per axis for the bump tests; chosen automatically when absent.
    pub bump_quadrature: Option<usize>,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig {
            bumps: 10,
            bump_quadrature: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Thresholds `t > 1` for the tail check.
    pub tail_levels: Vec<f64>,
    /// Exponent of the log-moment functional, in `(0, 1/4)`.
    pub log_moment_alpha: f64,
    /// Random nodes for the gradient check.
    pub gradient_points: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            tail_levels: vec![2.0, 4.0, 8.0],
            log_moment_alpha: 0.2,
            gradient_points: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderBlock {
    /// Componentwise drift bound `C`.
    pub bound_c: f64,
    /// `α_1..α_K`; `4^{−n}` when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub tail_radii: Option<Vec<f64>>,
}

/// Sweep over `v_u = u · drift` for each `u` in `values`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Density JSON to check against the configured drift.
    pub input: PathBuf,
    /// Frozen measure; the input density itself when absent.
    #[serde(default)]
    pub measure: Option<MeasureConfig>,
}

fn default_one_d_box() -> f64 {
    10.0
}
fn default_one_d_points() -> usize {
    20_001
}
fn default_one_d_tol() -> f64 {
    1e-6
}
fn default_fd_box() -> f64 {
    6.0
}
fn default_fd_mesh() -> usize {
    160
}
fn default_fd_tol() -> f64 {
    5e-3
}
fn default_dt() -> f64 {
    1e-3
}
fn default_steps() -> usize {
    10_000
}
fn default_particles() -> usize {
    100
}
fn default_burn_in() -> f64 {
    0.2
}
fn default_batches() -> usize {
    50
}
fn default_z() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    /// 1-D closed form; self-consistent for Vlasov kernels.
    OneD {
        #[serde(default = "default_one_d_box")]
        box_half_width: f64,
        #[serde(default = "default_one_d_points")]
        points: usize,
        #[serde(default = "default_one_d_tol")]
        tolerance: f64,
    },
    /// 2-D finite volumes; compares both marginals in sup norm.
    Fd2d {
        #[serde(default = "default_fd_box")]
        box_half_width: f64,
        #[serde(default = "default_fd_mesh")]
        mesh: usize,
        #[serde(default = "default_fd_tol")]
        tolerance: f64,
    },
    /// Euler-Maruyama; first and second moments within `z` combined
    /// standard errors.
    Sde {
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_steps")]
        steps: usize,
        #[serde(default = "default_particles")]
        particles: usize,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        #[serde(default = "default_batches")]
        batches: usize,
        #[serde(default = "default_z")]
        z: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Must agree with the mode given on the command line when present.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Dimension `k`.
    pub k: usize,
    /// Total degree `N` of the chaos basis.
    pub degree: u32,
    /// Gauss-Hermite nodes per axis `Q ≥ N + 1`.
    pub quadrature: usize,
    #[serde(default)]
    pub seed: u64,
    pub drift: DriftConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub fixed_point: FixedPointConfig,
    #[serde(default)]
    pub residual: ResidualConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub ladder: Option<LadderBlock>,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

fn check_range<T: PartialOrd + std::fmt::Display>(
    name: &str,
    v: T,
    lo: T,
    hi: T,
) -> Result<(), CliError> {
    if v < lo || v > hi {
        return Err(CliError::Config(format!(
            "{name} = {v} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads and parses `path`; relative file references are resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let MeasureConfig::File { path } = &mut cfg.measure {
            resolve(path);
        }
        if let Some(v) = &mut cfg.verify {
            resolve(&mut v.input);
            if let Some(MeasureConfig::File { path }) = &mut v.measure {
                resolve(path);
            }
        }
        Ok(cfg)
    }

    /// Range checks plus the blocks each mode needs.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::Config(format!(
                    "config declares mode {} but {} was requested",
                    m.name(),
                    mode.name()
                )));
            }
        }
        check_range("k", self.k, 1, MAX_DIM)?;
        check_range("degree", self.degree, 0, MAX_DEGREE)?;
        check_range(
            "quadrature",
            self.quadrature,
            self.degree as usize + 1,
            MAX_QUADRATURE,
        )?;
        let fp = &self.fixed_point;
        if !(fp.damping > 0.0 && fp.damping <= 1.0) {
            return Err(CliError::Config(format!(
                "fixed_point.damping = {} outside (0, 1]",
                fp.damping
            )));
        }
        if !(fp.tolerance > 0.0 && fp.tolerance < 1.0) {
            return Err(CliError::Config(format!(
                "fixed_point.tolerance = {} outside (0, 1)",
                fp.tolerance
            )));
        }
        check_range("fixed_point.max_iterations", fp.max_iterations, 1, 100_000)?;
        check_range("residual.bumps", self.residual.bumps, 1, 1000)?;
        if let Some(q) = self.residual.bump_quadrature {
            check_range(
                "residual.bump_quadrature",
                q,
                self.quadrature,
                MAX_QUADRATURE,
            )?;
        }
        if self.bounds.tail_levels.is_empty() || self.bounds.tail_levels.iter().any(|t| !(*t > 1.0))
        {
            return Err(CliError::Config(
                "bounds.tail_levels must be non-empty and > 1".into(),
            ));
        }
        let a = self.bounds.log_moment_alpha;
        if !(a > 0.0 && a < 0.25) {
            return Err(CliError::Config(format!(
                "bounds.log_moment_alpha = {a} outside (0, 1/4)"
            )));
        }
        check_range(
            "bounds.gradient_points",
            self.bounds.gradient_points,
            1,
            100_000,
        )?;
        if let MeasureConfig::CameronMartin { shift } = &self.measure {
            if shift.len() != self.k {
                return Err(CliError::Config(format!(
                    "measure.shift has {} entries, k = {}",
                    shift.len(),
                    self.k
                )));
            }
        }
        match mode {
            Mode::Ladder => {
                let l = self
                    .ladder
                    .as_ref()
                    .ok_or_else(|| CliError::Config("mode ladder needs a [ladder] block".into()))?;
                if !(l.bound_c >= 0.0) {
                    return Err(CliError::Config(
                        "ladder.bound_c must be non-negative".into(),
                    ));
                }
                if !matches!(
                    self.drift,
                    DriftConfig::Componentwise { .. } | DriftConfig::Zero
                ) {
                    return Err(CliError::Config(
                        "ladder needs a componentwise drift".into(),
                    ));
                }
                if self.degree < 2 {
                    return Err(CliError::Config("ladder needs degree >= 2".into()));
                }
            }
            Mode::Sweep => {
                let s = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| CliError::Config("mode sweep needs a [sweep] block".into()))?;
                if s.values.is_empty() || s.values.iter().any(|u| !u.is_finite()) {
                    return Err(CliError::Config(
                        "sweep.values must be non-empty and finite".into(),
                    ));
                }
            }
            Mode::Verify => {
                if self.verify.is_none() {
                    return Err(CliError::Config(
                        "mode verify needs a [verify] block".into(),
                    ));
                }
            }
            Mode::OracleCompare => match &self.oracle {
                None => {
                    return Err(CliError::Config(
                        "mode oracle-compare needs an [oracle] block".into(),
                    ))
                }
                Some(OracleConfig::OneD {
                    box_half_width,
                    points,
                    tolerance,
                }) => {
                    if self.k != 1 {
                        return Err(CliError::Config("one_d oracle needs k = 1".into()));
                    }
                    if !(*box_half_width > 0.0) || *points < 3 || !(*tolerance > 0.0) {
                        return Err(CliError::Config(
                            "one_d oracle: box, points or tolerance out of range".into(),
                        ));
                    }
                }
                Some(OracleConfig::Fd2d {
                    box_half_width,
                    mesh,
                    tolerance,
                }) => {
                    if self.k != 2 {
                        return Err(CliError::Config("fd_2d oracle needs k = 2".into()));
                    }
                    if !(*box_half_width > 0.0) || *mesh < 4 || *mesh > 1000 || !(*tolerance > 0.0)
                    {
                        return Err(CliError::Config(
                            "fd_2d oracle: box, mesh or tolerance out of range".into(),
                        ));
                    }
                }
                Some(OracleConfig::Sde {
                    dt,
                    steps,
                    particles,
                    burn_in,
                    batches,
                    z,
                }) => {
                    if !(*dt > 0.0 && *dt <= 0.01) {
                        return Err(CliError::Config(format!(
                            "oracle.dt = {dt} outside (0, 0.01]"
                        )));
                    }
                    if !(0.0..1.0).contains(burn_in) || *steps == 0 || !(*z > 0.0) {
                        return Err(CliError::Config(
                            "sde oracle: burn_in, steps or z out of range".into(),
                        ));
                    }
                    if *batches < 2 || particles % batches != 0 || particles < batches {
                        return Err(CliError::Config(
                            "sde oracle: particles must split into >= 2 equal batches".into(),
                        ));
                    }
                }
            },
            Mode::SolveLinear | Mode::SolveNonlinear => {}
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<Arc<ChaosBasis>, CliError> {
        ChaosBasis::new(self.k, self.degree)
            .map(Arc::new)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<QuadratureGrid, CliError> {
        QuadratureGrid::tensor(self.quadrature, self.k).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn frozen_measure(
        &self,
        measure: &MeasureConfig,
        basis: &Arc<ChaosBasis>,
    ) -> Result<ChaosDensity, CliError> {
        match measure {
            MeasureConfig::Gaussian => Ok(ChaosDensity::constant(basis.clone())),
            MeasureConfig::CameronMartin { shift } => {
                ChaosDensity::cameron_martin(basis.clone(), shift)
                    .map_err(|e| CliError::Config(format!("measure: {e}")))
            }
            MeasureConfig::File { path } => read_density(path)?
                .zero_padded(basis.clone())
                .map_err(|e| CliError::Config(format!("measure {}: {e}", path.display()))),
        }
    }
}

pub fn read_density(path: &Path) -> Result<ChaosDensity, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ChaosDensity::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
