//! Bounded drift perturbations `v(p, x)` and the full drift `b = −x + v`.
//!
//! Every field carries a declared bound, either on the Cameron-Martin norm
//! `sup |v|_H ≤ M` or on each component `|v_n| ≤ C`. The bound is checked by
//! sampling when the field is built and again on every evaluation.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos_basis::QuadratureGrid;
use crate::density::{ChaosDensity, PointMeasure};
use crate::error::{Error, Result};

const BOUND_SLACK: f64 = 1e-9;
const VALIDATION_POINTS: usize = 10_000;
const VALIDATION_MEASURES: usize = 8;

/// Declared uniform bound of a drift perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredBound {
    /// `sup_{p,x} |v(p,x)|_H ≤ M`.
    HNorm(f64),
    /// `sup_{p,x} |v_n(p,x)| ≤ C` for every component.
    Componentwise(f64),
}

impl DeclaredBound {
    pub fn value(&self) -> f64 {
        match *self {
            DeclaredBound::HNorm(m) | DeclaredBound::Componentwise(m) => m,
        }
    }

    /// Bound on `|v|_H` in dimension `k`.
    pub fn h_norm(&self, k: usize) -> f64 {
        match *self {
            DeclaredBound::HNorm(m) => m,
            DeclaredBound::Componentwise(c) => c * (k as f64).sqrt(),
        }
    }

    /// `C₀ = 2π sup |v|_H`.
    pub fn c0(&self, k: usize) -> f64 {
        2.0 * PI * self.h_norm(k)
    }

    /// `σ∞ = (2π sup |v|_H)^{-2}`; infinite for the zero drift.
    pub fn sigma_inf(&self, k: usize) -> f64 {
        let c0 = self.c0(k);
        if c0 == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (c0 * c0)
        }
    }

    fn scaled(&self, u: f64) -> DeclaredBound {
        match *self {
            DeclaredBound::HNorm(m) => DeclaredBound::HNorm(m * u.abs()),
            DeclaredBound::Componentwise(c) => DeclaredBound::Componentwise(c * u.abs()),
        }
    }

    fn admits(&self, v: &[f64]) -> bool {
        match *self {
            DeclaredBound::HNorm(m) => {
                v.iter().map(|x| x * x).sum::<f64>().sqrt() <= m * (1.0 + BOUND_SLACK)
            }
            DeclaredBound::Componentwise(c) => v.iter().all(|x| x.abs() <= c * (1.0 + BOUND_SLACK)),
        }
    }
}

/// Bounded scalar potentials; the drift is `v = ∇W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// `W(x) = Σ a_i log cosh x_i`, so `v_i = a_i tanh x_i`: a smoothly
    /// clipped linear gradient.
    SoftClip { strength: Vec<f64> },
    /// `W(x) = A exp(−|x − c|² / (2w²))`.
    GaussianLobe {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
}

impl Potential {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::SoftClip { strength } => strength
                .iter()
                .zip(x)
                .map(|(a, &xi)| a * log_cosh(xi))
                .sum(),
            Potential::GaussianLobe {
                amplitude,
                width,
                center,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::SoftClip { strength } => {
                for ((o, a), &xi) in out.iter_mut().zip(strength).zip(x) {
                    *o = a * xi.tanh();
                }
            }
            Potential::GaussianLobe {
                amplitude,
                width,
                center,
            } => {
                let w2 = width * width;
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                let f = -amplitude / w2 * (-r2 / (2.0 * w2)).exp();
                for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(center) {
                    *o = f * (xi - ci);
                }
            }
        }
    }

    fn bound(&self, k: usize) -> f64 {
        match self {
            Potential::SoftClip { strength } => norm(&strength[..k]),
            Potential::GaussianLobe {
                amplitude, width, ..
            } => amplitude.abs() * (-0.5f64).exp() / width,
        }
    }

    fn available(&self) -> usize {
        match self {
            Potential::SoftClip { strength } => strength.len(),
            Potential::GaussianLobe { center, .. } => center.len(),
        }
    }

    fn truncated(&self, k: usize) -> Potential {
        match self {
            Potential::SoftClip { strength } => Potential::SoftClip {
                strength: strength[..k].to_vec(),
            },
            Potential::GaussianLobe {
                amplitude,
                width,
                center,
            } => Potential::GaussianLobe {
                amplitude: *amplitude,
                width: *width,
                center: center[..k].to_vec(),
            },
        }
    }

    fn scaled(&self, u: f64) -> Potential {
        match self {
            Potential::SoftClip { strength } => Potential::SoftClip {
                strength: strength.iter().map(|a| a * u).collect(),
            },
            Potential::GaussianLobe {
                amplitude,
                width,
                center,
            } => Potential::GaussianLobe {
                amplitude: amplitude * u,
                width: *width,
                center: center.clone(),
            },
        }
    }
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bounded convolution kernels `b₀ : R^k → H` for Vlasov drifts
/// `v(p, x) = ∫ b₀(x − y) p(y) γ(dy)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `b₀ ≡ h`.
    Constant { value: Vec<f64> },
    /// `b₀(z)_i = s_i tanh(z_i)`.
    Tanh { scale: Vec<f64> },
    /// `b₀(z) = A (z / w) exp(−|z|² / (2w²))`, bounded by `A e^{-1/2}`.
    GaussianLobe { amplitude: f64, width: f64 },
    /// `b₀(z)_i = s · clamp(z_i, −r, r)`.
    ClippedLinear { slope: f64, radius: f64 },
}

impl Kernel {
    pub fn eval(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Kernel::Constant { value } => out.copy_from_slice(&value[..out.len()]),
            Kernel::Tanh { scale } => {
                for ((o, s), &zi) in out.iter_mut().zip(scale).zip(z) {
                    *o = s * zi.tanh();
                }
            }
            Kernel::GaussianLobe { amplitude, width } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let f = amplitude / width * (-r2 / (2.0 * width * width)).exp();
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o = f * zi;
                }
            }
            Kernel::ClippedLinear { slope, radius } => {
                for (o, &zi) in out.iter_mut().zip(z) {
                    *o = slope * zi.clamp(-radius, *radius);
                }
            }
        }
    }

    /// Scalar profile of coordinate `i` for kernels acting coordinatewise.
    fn coordinate(&self, i: usize, z: f64) -> Option<f64> {
        match self {
            Kernel::Constant { value } => Some(value[i]),
            Kernel::Tanh { scale } => Some(scale[i] * z.tanh()),
            Kernel::ClippedLinear { slope, radius } => Some(slope * z.clamp(-radius, *radius)),
            Kernel::GaussianLobe { .. } => None,
        }
    }

    fn is_separable(&self) -> bool {
        !matches!(self, Kernel::GaussianLobe { .. })
    }

    fn bound(&self, k: usize) -> f64 {
        match self {
            Kernel::Constant { value } => norm(&value[..k]),
            Kernel::Tanh { scale } => norm(&scale[..k]),
            Kernel::GaussianLobe { amplitude, .. } => amplitude.abs() * (-0.5f64).exp(),
            Kernel::ClippedLinear { slope, radius } => slope.abs() * radius * (k as f64).sqrt(),
        }
    }

    fn available(&self) -> Option<usize> {
        match self {
            Kernel::Constant { value } => Some(value.len()),
            Kernel::Tanh { scale } => Some(scale.len()),
            _ => None,
        }
    }

    fn truncated(&self, k: usize) -> Kernel {
        match self {
            Kernel::Constant { value } => Kernel::Constant {
                value: value[..k].to_vec(),
            },
            Kernel::Tanh { scale } => Kernel::Tanh {
                scale: scale[..k].to_vec(),
            },
            other => other.clone(),
        }
    }

    fn scaled(&self, u: f64) -> Kernel {
        match self {
            Kernel::Constant { value } => Kernel::Constant {
                value: value.iter().map(|v| v * u).collect(),
            },
            Kernel::Tanh { scale } => Kernel::Tanh {
                scale: scale.iter().map(|v| v * u).collect(),
            },
            Kernel::GaussianLobe { amplitude, width } => Kernel::GaussianLobe {
                amplitude: amplitude * u,
                width: *width,
            },
            Kernel::ClippedLinear { slope, radius } => Kernel::ClippedLinear {
                slope: slope * u,
                radius: *radius,
            },
        }
    }
}

/// One component `v_n(μ, x)` of a componentwise-bounded drift. Coordinates
/// beyond the working dimension read as zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentFn {
    Zero,
    Const {
        value: f64,
    },
    /// `s · tanh(x_coord + shift)`.
    Tanh {
        scale: f64,
        coord: usize,
        #[serde(default)]
        shift: f64,
    },
    /// `s · ∫ tanh(x_coord − y_coord + shift) μ(dy)`.
    VlasovTanh {
        scale: f64,
        coord: usize,
        #[serde(default)]
        shift: f64,
    },
    Sum {
        terms: Vec<ComponentFn>,
    },
}

impl ComponentFn {
    fn bound(&self) -> f64 {
        match self {
            ComponentFn::Zero => 0.0,
            ComponentFn::Const { value } => value.abs(),
            ComponentFn::Tanh { scale, .. } | ComponentFn::VlasovTanh { scale, .. } => scale.abs(),
            ComponentFn::Sum { terms } => terms.iter().map(ComponentFn::bound).sum(),
        }
    }

    fn needs_measure(&self) -> bool {
        match self {
            ComponentFn::VlasovTanh { .. } => true,
            ComponentFn::Sum { terms } => terms.iter().any(ComponentFn::needs_measure),
            _ => false,
        }
    }

    fn scaled(&self, u: f64) -> ComponentFn {
        match self {
            ComponentFn::Zero => ComponentFn::Zero,
            ComponentFn::Const { value } => ComponentFn::Const { value: value * u },
            ComponentFn::Tanh {
                scale,
                coord,
                shift,
            } => ComponentFn::Tanh {
                scale: scale * u,
                coord: *coord,
                shift: *shift,
            },
            ComponentFn::VlasovTanh {
                scale,
                coord,
                shift,
            } => ComponentFn::VlasovTanh {
                scale: scale * u,
                coord: *coord,
                shift: *shift,
            },
            ComponentFn::Sum { terms } => ComponentFn::Sum {
                terms: terms.iter().map(|t| t.scaled(u)).collect(),
            },
        }
    }

    fn prepare(&self, measure: Option<&PointMeasure>) -> PreparedComponent {
        match self {
            ComponentFn::Zero => PreparedComponent::Const(0.0),
            ComponentFn::Const { value } => PreparedComponent::Const(*value),
            ComponentFn::Tanh {
                scale,
                coord,
                shift,
            } => PreparedComponent::Tanh {
                scale: *scale,
                coord: *coord,
                shift: *shift,
            },
            ComponentFn::VlasovTanh {
                scale,
                coord,
                shift,
            } => {
                let m = measure.expect("measure-dependent component prepared without a measure");
                let (atoms, masses) = m.marginal_1d(*coord);
                PreparedComponent::VlasovTanh {
                    scale: *scale,
                    coord: *coord,
                    shift: *shift,
                    atoms,
                    masses,
                }
            }
            ComponentFn::Sum { terms } => {
                PreparedComponent::Sum(terms.iter().map(|t| t.prepare(measure)).collect())
            }
        }
    }
}

#[derive(Clone, Debug)]
enum PreparedComponent {
    Const(f64),
    Tanh {
        scale: f64,
        coord: usize,
        shift: f64,
    },
    VlasovTanh {
        scale: f64,
        coord: usize,
        shift: f64,
        atoms: Vec<f64>,
        masses: Vec<f64>,
    },
    Sum(Vec<PreparedComponent>),
}

impl PreparedComponent {
    fn eval(&self, x: &[f64]) -> f64 {
        let at = |c: usize| x.get(c).copied().unwrap_or(0.0);
        match self {
            PreparedComponent::Const(v) => *v,
            PreparedComponent::Tanh {
                scale,
                coord,
                shift,
            } => scale * (at(*coord) + shift).tanh(),
            PreparedComponent::VlasovTanh {
                scale,
                coord,
                shift,
                atoms,
                masses,
            } => {
                let xc = at(*coord) + shift;
                scale
                    * atoms
                        .iter()
                        .zip(masses)
                        .map(|(y, m)| m * (xc - y).tanh())
                        .sum::<f64>()
            }
            PreparedComponent::Sum(terms) => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }
}

/// The measure argument of `v(p, x)`: a chaos density (read through its
/// point-mass view) or a point measure directly.
#[derive(Clone, Copy, Debug)]
pub enum MeasureArg<'a> {
    Density(&'a ChaosDensity),
    Points(&'a PointMeasure),
}

/// User-supplied drift evaluator.
pub type CustomEval = dyn Fn(MeasureArg<'_>, &[f64], &mut [f64]) + Send + Sync;

/// A drift given by a closure. The declared bound is checked by sampling,
/// but continuity of `p ↦ v(p, ·)` under weak convergence is not: callers
/// with `measure_dependent = true` are responsible for it.
#[derive(Clone)]
pub struct CustomDrift {
    pub name: String,
    pub eval: Arc<CustomEval>,
    pub measure_dependent: bool,
}

impl fmt::Debug for CustomDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDrift")
            .field("name", &self.name)
            .field("measure_dependent", &self.measure_dependent)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum DriftKind {
    /// `v ≡ h`.
    Constant(Vec<f64>),
    /// `v = ∇W`.
    Gradient(Potential),
    /// `v(p, x) = ∫ b₀(x − y) p(y) γ(dy)`; densities are converted to point
    /// measures on a tensor Gauss-Hermite grid with `quadrature` nodes per axis.
    Vlasov {
        kernel: Kernel,
        quadrature: usize,
    },
    /// Components `v_n(μ, x)` with a shared bound; densities are converted as
    /// for Vlasov drifts.
    Componentwise {
        components: Vec<ComponentFn>,
        quadrature: usize,
    },
    Custom(CustomDrift),
}

/// A registered drift perturbation of dimension `k` with a validated bound.
#[derive(Clone, Debug)]
pub struct DriftField {
    kind: DriftKind,
    dim: usize,
    bound: DeclaredBound,
}

impl DriftField {
    /// Registers a drift. Built-in kinds may omit the bound and get their
    /// analytic one; custom kinds must declare it. The bound is validated by
    /// sampling and a violation is an error.
    pub fn new(kind: DriftKind, dim: usize, bound: Option<DeclaredBound>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("drift dimension must be at least 1".into()));
        }
        let available = Self::available_dim(&kind);
        if let Some(a) = available {
            if a < dim {
                return Err(Error::Argument(format!(
                    "drift provides {a} components, dimension {dim} requested"
                )));
            }
        }
        match &kind {
            DriftKind::Vlasov { quadrature, .. } | DriftKind::Componentwise { quadrature, .. }
                if *quadrature == 0 =>
            {
                return Err(Error::Argument(
                    "measure quadrature needs at least one node".into(),
                ));
            }
            _ => {}
        }
        let bound = match bound {
            Some(b) => b,
            None => Self::analytic_bound(&kind, dim)
                .ok_or_else(|| Error::Argument("custom drifts must declare their bound".into()))?,
        };
        if !(bound.value() >= 0.0 && bound.value().is_finite()) {
            return Err(Error::Argument(format!("invalid declared bound {bound:?}")));
        }
        let field = DriftField { kind, dim, bound };
        field.validate_bound()?;
        Ok(field)
    }

    pub fn zero(dim: usize) -> Self {
        DriftField::new(DriftKind::Constant(vec![0.0; dim]), dim, None).expect("zero drift")
    }

    pub fn constant(h: Vec<f64>) -> Result<Self> {
        let k = h.len();
        DriftField::new(DriftKind::Constant(h), k, None)
    }

    pub fn kind(&self) -> &DriftKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bound(&self) -> DeclaredBound {
        self.bound
    }

    pub fn c0(&self) -> f64 {
        self.bound.c0(self.dim)
    }

    pub fn sigma_inf(&self) -> f64 {
        self.bound.sigma_inf(self.dim)
    }

    fn available_dim(kind: &DriftKind) -> Option<usize> {
        match kind {
            DriftKind::Constant(h) => Some(h.len()),
            DriftKind::Gradient(p) => Some(p.available()),
            DriftKind::Vlasov { kernel, .. } => kernel.available(),
            DriftKind::Componentwise { components, .. } => Some(components.len()),
            DriftKind::Custom(_) => None,
        }
    }

    fn analytic_bound(kind: &DriftKind, k: usize) -> Option<DeclaredBound> {
        Some(match kind {
            DriftKind::Constant(h) => DeclaredBound::HNorm(norm(&h[..k])),
            DriftKind::Gradient(p) => DeclaredBound::HNorm(p.bound(k)),
            DriftKind::Vlasov { kernel, .. } => DeclaredBound::HNorm(kernel.bound(k)),
            DriftKind::Componentwise { components, .. } => DeclaredBound::Componentwise(
                components[..k]
                    .iter()
                    .map(ComponentFn::bound)
                    .fold(0.0, f64::max),
            ),
            DriftKind::Custom(_) => return None,
        })
    }

    /// Whether `v` depends on the measure argument at all.
    pub fn is_measure_dependent(&self) -> bool {
        match &self.kind {
            DriftKind::Constant(_) | DriftKind::Gradient(_) => false,
            DriftKind::Vlasov { kernel, .. } => !matches!(kernel, Kernel::Constant { .. }),
            DriftKind::Componentwise { components, .. } => components[..self.dim]
                .iter()
                .any(ComponentFn::needs_measure),
            DriftKind::Custom(c) => c.measure_dependent,
        }
    }

    /// Quadrature nodes per axis used to turn a density argument into a measure.
    pub fn measure_quadrature(&self) -> Option<usize> {
        match &self.kind {
            DriftKind::Vlasov { quadrature, .. } | DriftKind::Componentwise { quadrature, .. } => {
                Some(*quadrature)
            }
            _ => None,
        }
    }

    /// Fixes the measure argument; the result evaluates `v(p, ·)`.
    pub fn freeze(&self, p: MeasureArg<'_>) -> Result<FrozenDrift> {
        let measure_dim = match p {
            MeasureArg::Density(d) => d.dim(),
            MeasureArg::Points(m) => m.dim(),
        };
        if measure_dim != self.dim {
            return Err(Error::Argument(format!(
                "measure dimension {measure_dim} does not match drift dimension {}",
                self.dim
            )));
        }
        let to_points = |q: usize| -> Result<PointMeasure> {
            match p {
                MeasureArg::Points(m) => Ok(m.clone()),
                MeasureArg::Density(d) => {
                    let grid = QuadratureGrid::tensor(q, self.dim)?;
                    d.as_measure(&grid)
                }
            }
        };
        let prepared = match &self.kind {
            DriftKind::Constant(h) => Prepared::Constant(h[..self.dim].to_vec()),
            DriftKind::Gradient(pot) => Prepared::Gradient(pot.clone()),
            DriftKind::Vlasov { kernel, quadrature } => {
                if let Kernel::Constant { value } = kernel {
                    Prepared::Constant(value[..self.dim].to_vec())
                } else {
                    let measure = to_points(*quadrature)?;
                    if kernel.is_separable() {
                        let marginals = (0..self.dim).map(|i| measure.marginal_1d(i)).collect();
                        Prepared::SeparableVlasov {
                            kernel: kernel.clone(),
                            marginals,
                        }
                    } else {
                        Prepared::Vlasov {
                            kernel: kernel.clone(),
                            measure,
                        }
                    }
                }
            }
            DriftKind::Componentwise {
                components,
                quadrature,
            } => {
                let comps = &components[..self.dim];
                let measure = if comps.iter().any(ComponentFn::needs_measure) {
                    Some(to_points(*quadrature)?)
                } else {
                    None
                };
                Prepared::Components(comps.iter().map(|c| c.prepare(measure.as_ref())).collect())
            }
            DriftKind::Custom(c) => Prepared::Custom {
                eval: c.eval.clone(),
                measure: match p {
                    MeasureArg::Density(d) => OwnedMeasure::Density(d.clone()),
                    MeasureArg::Points(m) => OwnedMeasure::Points(m.clone()),
                },
            },
        };
        Ok(FrozenDrift {
            dim: self.dim,
            bound: self.bound,
            prepared,
        })
    }

    /// `v(p, x)`.
    pub fn eval_v(&self, p: MeasureArg<'_>, x: &[f64]) -> Result<Vec<f64>> {
        self.freeze(p)?.eval_v(x)
    }

    /// `b(p, x) = −x + v(p, x)`.
    pub fn eval_b(&self, p: MeasureArg<'_>, x: &[f64]) -> Result<Vec<f64>> {
        self.freeze(p)?.eval_b(x)
    }

    /// The `k`-dimensional restriction `v^k_n = v_n`, `n ≤ k`, with the
    /// declared bound inherited. Measure and point arguments of the result
    /// live on `R^k`, embedded in the larger space by zero padding.
    pub fn truncate_to_k(&self, k: usize) -> Result<DriftField> {
        if k == 0 || k > self.dim {
            return Err(Error::Argument(format!(
                "cannot truncate a {}-dimensional drift to {k} components",
                self.dim
            )));
        }
        let kind = match &self.kind {
            DriftKind::Constant(h) => DriftKind::Constant(h[..k].to_vec()),
            DriftKind::Gradient(p) => DriftKind::Gradient(p.truncated(k)),
            DriftKind::Vlasov { kernel, quadrature } => DriftKind::Vlasov {
                kernel: kernel.truncated(k),
                quadrature: *quadrature,
            },
            DriftKind::Componentwise {
                components,
                quadrature,
            } => DriftKind::Componentwise {
                components: components[..k].to_vec(),
                quadrature: *quadrature,
            },
            DriftKind::Custom(c) => {
                if k != self.dim {
                    return Err(Error::Argument(format!(
                        "custom drift {:?} cannot be truncated",
                        c.name
                    )));
                }
                DriftKind::Custom(c.clone())
            }
        };
        Ok(DriftField {
            kind,
            dim: k,
            bound: self.bound,
        })
    }

    /// `u · v`, the one-parameter family used by parameter sweeps.
    pub fn scaled(&self, u: f64) -> Result<DriftField> {
        let kind = match &self.kind {
            DriftKind::Constant(h) => DriftKind::Constant(h.iter().map(|v| v * u).collect()),
            DriftKind::Gradient(p) => DriftKind::Gradient(p.scaled(u)),
            DriftKind::Vlasov { kernel, quadrature } => DriftKind::Vlasov {
                kernel: kernel.scaled(u),
                quadrature: *quadrature,
            },
            DriftKind::Componentwise {
                components,
                quadrature,
            } => DriftKind::Componentwise {
                components: components.iter().map(|c| c.scaled(u)).collect(),
                quadrature: *quadrature,
            },
            DriftKind::Custom(c) => {
                let inner = c.eval.clone();
                DriftKind::Custom(CustomDrift {
                    name: format!("{}*{u}", c.name),
                    measure_dependent: c.measure_dependent,
                    eval: Arc::new(move |p, x, out| {
                        inner(p, x, out);
                        out.iter_mut().for_each(|o| *o *= u);
                    }),
                })
            }
        };
        Ok(DriftField {
            kind,
            dim: self.dim,
            bound: self.bound.scaled(u),
        })
    }

    fn validate_bound(&self) -> Result<()> {
        let k = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(0x005e_edb0_u64);
        let gauss = |rng: &mut ChaCha8Rng, scale: f64| -> f64 {
            scale * rng.sample::<f64, _>(StandardNormal)
        };
        let n_measures = if self.is_measure_dependent() {
            VALIDATION_MEASURES
        } else {
            1
        };
        let mut frozen = Vec::with_capacity(n_measures);
        for _ in 0..n_measures {
            let atoms = 12;
            let points: Vec<f64> = (0..atoms * k).map(|_| gauss(&mut rng, 2.0)).collect();
            let masses: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 1e-3).collect();
            let m = PointMeasure::from_atoms(k, points, masses)?;
            frozen.push(self.freeze(MeasureArg::Points(&m))?);
        }
        let mut out = vec![0.0; k];
        let mut x = vec![0.0; k];
        for s in 0..VALIDATION_POINTS {
            // mix typical and far-out points
            let scale = if s % 4 == 0 { 8.0 } else { 2.0 };
            x.iter_mut().for_each(|xi| *xi = gauss(&mut rng, scale));
            let f = &frozen[s % n_measures];
            f.eval_unchecked(&x, &mut out);
            if !self.bound.admits(&out) {
                return Err(Error::Contract(format!(
                    "declared bound {:?} violated by v = {:?} at x = {:?}",
                    self.bound, out, x
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum OwnedMeasure {
    Density(ChaosDensity),
    Points(PointMeasure),
}

#[derive(Clone)]
enum Prepared {
    Constant(Vec<f64>),
    Gradient(Potential),
    SeparableVlasov {
        kernel: Kernel,
        marginals: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Vlasov {
        kernel: Kernel,
        measure: PointMeasure,
    },
    Components(Vec<PreparedComponent>),
    Custom {
        eval: Arc<CustomEval>,
        measure: OwnedMeasure,
    },
}

/// `v(p, ·)` for a fixed measure argument.
#[derive(Clone)]
pub struct FrozenDrift {
    dim: usize,
    bound: DeclaredBound,
    prepared: Prepared,
}

impl fmt::Debug for FrozenDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrozenDrift")
            .field("dim", &self.dim)
            .field("bound", &self.bound)
            .finish()
    }
}

impl FrozenDrift {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn eval_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match &self.prepared {
            Prepared::Constant(h) => out.copy_from_slice(h),
            Prepared::Gradient(p) => p.gradient(x, out),
            Prepared::SeparableVlasov { kernel, marginals } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (atoms, masses) = &marginals[i];
                    *o = atoms
                        .iter()
                        .zip(masses)
                        .map(|(y, m)| m * kernel.coordinate(i, x[i] - y).unwrap_or(0.0))
                        .sum();
                }
            }
            Prepared::Vlasov { kernel, measure } => {
                let k = self.dim;
                let mut z = vec![0.0; k];
                let mut b = vec![0.0; k];
                out.iter_mut().for_each(|o| *o = 0.0);
                for j in 0..measure.len() {
                    let y = measure.point(j);
                    for i in 0..k {
                        z[i] = x[i] - y[i];
                    }
                    kernel.eval(&z, &mut b);
                    let m = measure.masses()[j];
                    for i in 0..k {
                        out[i] += m * b[i];
                    }
                }
            }
            Prepared::Components(comps) => {
                for (o, c) in out.iter_mut().zip(comps) {
                    *o = c.eval(x);
                }
            }
            Prepared::Custom { eval, measure } => {
                let arg = match measure {
                    OwnedMeasure::Density(d) => MeasureArg::Density(d),
                    OwnedMeasure::Points(m) => MeasureArg::Points(m),
                };
                eval(arg, x, out);
            }
        }
    }

    /// Writes `v(p, x)` into `out`, enforcing the declared bound.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_unchecked(x, out);
        if out.iter().any(|v| !v.is_finite()) || !self.bound.admits(out) {
            return Err(Error::Contract(format!(
                "|v| exceeds declared bound {:?} at x = {:?}: v = {:?}",
                self.bound, x, out
            )));
        }
        Ok(())
    }

    pub fn eval_v(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_b(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.eval_v(x)?;
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= xi;
        }
        Ok(out)
    }
}

/// `∫ b₀(x − y) p(y) γ(dy)` through the point-mass view of `p` on `grid`.
pub fn vlasov_eval(
    kernel: &Kernel,
    p: &ChaosDensity,
    x: &[f64],
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    let measure = p.as_measure(grid)?;
    let k = p.dim();
    let mut out = vec![0.0; k];
    let mut z = vec![0.0; k];
    let mut b = vec![0.0; k];
    for j in 0..measure.len() {
        let y = measure.point(j);
        for i in 0..k {
            z[i] = x[i] - y[i];
        }
        kernel.eval(&z, &mut b);
        for i in 0..k {
            out[i] += measure.masses()[j] * b[i];
        }
    }
    Ok(out)
}

/// `e²`, the prefactor of the Gaussian tail bound on densities.
pub const E_SQUARED: f64 = E * E;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos_basis::ChaosBasis;

    fn basis(k: usize, n: u32) -> Arc<ChaosBasis> {
        Arc::new(ChaosBasis::new(k, n).unwrap())
    }

    fn vlasov(kernel: Kernel, k: usize, q: usize) -> DriftField {
        DriftField::new(
            DriftKind::Vlasov {
                kernel,
                quadrature: q,
            },
            k,
            None,
        )
        .unwrap()
    }

    #[test]
    fn constant_ignores_arguments() {
        let v = DriftField::constant(vec![0.3]).unwrap();
        let one = ChaosDensity::constant(basis(1, 4));
        let cm = ChaosDensity::cameron_martin(basis(1, 4), &[0.7]).unwrap();
        assert_eq!(
            v.eval_v(MeasureArg::Density(&one), &[5.0]).unwrap(),
            vec![0.3]
        );
        assert_eq!(
            v.eval_v(MeasureArg::Density(&cm), &[-2.0]).unwrap(),
            vec![0.3]
        );
        assert_eq!(v.bound(), DeclaredBound::HNorm(0.3));
    }

    #[test]
    fn vlasov_constant_kernel_is_the_constant() {
        let v = vlasov(
            Kernel::Constant {
                value: vec![0.2, -0.1],
            },
            2,
            6,
        );
        let cm = ChaosDensity::cameron_martin(basis(2, 4), &[0.3, 0.1]).unwrap();
        assert_eq!(
            v.eval_v(MeasureArg::Density(&cm), &[1.0, 2.0]).unwrap(),
            vec![0.2, -0.1]
        );
        assert!(!v.is_measure_dependent());
    }

    #[test]
    fn vlasov_tanh_is_odd_against_the_gaussian() {
        let v = vlasov(Kernel::Tanh { scale: vec![1.0] }, 1, 20);
        let one = ChaosDensity::constant(basis(1, 6));
        let out = v.eval_v(MeasureArg::Density(&one), &[0.0]).unwrap();
        assert!(out[0].abs() < 1e-15);
    }

    #[test]
    fn vlasov_eval_matches_independent_quadrature() {
        // oracle: ∫ tanh(−y) exp(0.5y − 0.125) γ(dy) by composite Simpson on [-14, 14]
        let n = 40_000;
        let (a, b) = (-14.0f64, 14.0f64);
        let h = (b - a) / n as f64;
        let f = |y: f64| {
            (-y).tanh() * (0.5 * y - 0.125).exp() * (-0.5 * y * y).exp() / (2.0 * PI).sqrt()
        };
        let mut s = f(a) + f(b);
        for i in 1..n {
            let y = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
        }
        let oracle = s * h / 3.0;

        let cm = ChaosDensity::cameron_martin(basis(1, 30), &[0.5]).unwrap();
        let grid = QuadratureGrid::tensor(120, 1).unwrap();
        let got = vlasov_eval(&Kernel::Tanh { scale: vec![1.0] }, &cm, &[0.0], &grid).unwrap();
        assert!(
            (got[0] - oracle).abs() < 1e-8,
            "got {} oracle {}",
            got[0],
            oracle
        );
    }

    #[test]
    fn weak_continuity_along_coefficient_perturbations() {
        let v = vlasov(
            Kernel::Tanh {
                scale: vec![0.4, 0.2],
            },
            2,
            8,
        );
        let b = basis(2, 4);
        let limit = ChaosDensity::cameron_martin(b.clone(), &[0.2, -0.1]).unwrap();
        let grid = QuadratureGrid::tensor(8, 2).unwrap();
        let frozen_limit = v.freeze(MeasureArg::Density(&limit)).unwrap();
        let mut prev = f64::INFINITY;
        for m in 1..=6 {
            let eps = 0.5f64.powi(m);
            let mut c = limit.coefficients().to_vec();
            for (i, ci) in c.iter_mut().enumerate().skip(1) {
                *ci += eps * ((i as f64).sin());
            }
            let pm = ChaosDensity::new(b.clone(), c).unwrap();
            let frozen = v.freeze(MeasureArg::Density(&pm)).unwrap();
            let mut worst: f64 = 0.0;
            for j in 0..grid.len() {
                let x = grid.node(j);
                let a = frozen.eval_v(x).unwrap();
                let l = frozen_limit.eval_v(x).unwrap();
                worst = worst.max(
                    a.iter()
                        .zip(&l)
                        .map(|(p, q)| (p - q).abs())
                        .fold(0.0, f64::max),
                );
            }
            assert!(worst < prev, "distance must shrink along the sequence");
            prev = worst;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn full_drift_is_minus_x_plus_v() {
        let v = DriftField::new(
            DriftKind::Gradient(Potential::SoftClip {
                strength: vec![0.5, 0.25],
            }),
            2,
            None,
        )
        .unwrap();
        let one = ChaosDensity::constant(basis(2, 2));
        let x = [0.3, -1.7];
        let bv = v.eval_b(MeasureArg::Density(&one), &x).unwrap();
        let vv = v.eval_v(MeasureArg::Density(&one), &x).unwrap();
        for i in 0..2 {
            assert!((bv[i] + x[i] - vv[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn understated_bound_is_rejected_at_registration() {
        let err = DriftField::new(
            DriftKind::Constant(vec![0.3, 0.4]),
            2,
            Some(DeclaredBound::HNorm(0.4)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));

        let err = DriftField::new(
            DriftKind::Gradient(Potential::SoftClip {
                strength: vec![1.0],
            }),
            1,
            Some(DeclaredBound::HNorm(0.9)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn runtime_bound_violation_is_a_contract_error() {
        // declared loosely enough to pass sampling, but evaluation far out breaks it
        let custom = CustomDrift {
            name: "ramp".into(),
            measure_dependent: false,
            eval: Arc::new(|_, x, out| out[0] = (x[0] / 100.0).clamp(-1.0, 1.0)),
        };
        let v = DriftField::new(
            DriftKind::Custom(custom),
            1,
            Some(DeclaredBound::HNorm(0.5)),
        )
        .unwrap();
        let m = PointMeasure::from_atoms(1, vec![0.0], vec![1.0]).unwrap();
        assert!(v.eval_v(MeasureArg::Points(&m), &[10.0]).is_ok());
        assert!(matches!(
            v.eval_v(MeasureArg::Points(&m), &[90.0]),
            Err(Error::Contract(_))
        ));
        // custom without a declared bound
        let custom = CustomDrift {
            name: "free".into(),
            measure_dependent: false,
            eval: Arc::new(|_, _, out| out[0] = 0.0),
        };
        assert!(DriftField::new(DriftKind::Custom(custom), 1, None).is_err());
    }

    #[test]
    fn sampled_bounds_hold_for_builtins() {
        let fields = vec![
            vlasov(
                Kernel::GaussianLobe {
                    amplitude: 0.7,
                    width: 1.3,
                },
                2,
                5,
            ),
            vlasov(
                Kernel::ClippedLinear {
                    slope: 0.3,
                    radius: 2.0,
                },
                3,
                4,
            ),
            DriftField::new(
                DriftKind::Gradient(Potential::GaussianLobe {
                    amplitude: 1.2,
                    width: 0.8,
                    center: vec![0.5, 0.0],
                }),
                2,
                None,
            )
            .unwrap(),
        ];
        let m = PointMeasure::from_atoms(2, vec![0.3, 0.1, -1.0, 2.0], vec![0.4, 0.6]).unwrap();
        for f in &fields {
            let m3;
            let arg = if f.dim() == 2 {
                MeasureArg::Points(&m)
            } else {
                m3 = PointMeasure::from_atoms(3, vec![0.0, 1.0, -1.0], vec![1.0]).unwrap();
                MeasureArg::Points(&m3)
            };
            let frozen = f.freeze(arg).unwrap();
            for s in 0..500 {
                let x: Vec<f64> = (0..f.dim())
                    .map(|i| ((s * 7 + i * 13) as f64).sin() * 5.0)
                    .collect();
                assert!(frozen.eval_v(&x).is_ok());
            }
        }
    }

    #[test]
    fn truncation_examples() {
        let c = 0.8;
        let comps: Vec<ComponentFn> = (1..=4)
            .map(|n| ComponentFn::Const {
                value: c * 4f64.powi(-n),
            })
            .collect();
        let v = DriftField::new(
            DriftKind::Componentwise {
                components: comps,
                quadrature: 4,
            },
            4,
            Some(DeclaredBound::Componentwise(c)),
        )
        .unwrap();
        let v2 = v.truncate_to_k(2).unwrap();
        let m = PointMeasure::from_atoms(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        let out = v2.eval_v(MeasureArg::Points(&m), &[0.1, 0.2]).unwrap();
        assert_eq!(out, vec![c / 4.0, c / 16.0]);
        assert_eq!(v2.bound(), DeclaredBound::Componentwise(c));
        assert!(v.truncate_to_k(5).is_err());

        // composition identity
        let a = v.truncate_to_k(3).unwrap().truncate_to_k(2).unwrap();
        let m2 = PointMeasure::from_atoms(2, vec![0.5, -0.5], vec![1.0]).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0]] {
            assert_eq!(
                a.eval_v(MeasureArg::Points(&m2), &x).unwrap(),
                v2.eval_v(MeasureArg::Points(&m2), &x).unwrap()
            );
        }

        let h = DriftField::constant(vec![0.1, 0.2, 0.3]).unwrap();
        let h2 = h.truncate_to_k(2).unwrap();
        assert_eq!(
            h2.eval_v(MeasureArg::Points(&m), &[0.0, 0.0]).unwrap(),
            vec![0.1, 0.2]
        );
    }

    #[test]
    fn componentwise_reads_zero_beyond_dimension() {
        let comps = vec![
            ComponentFn::Tanh {
                scale: 0.5,
                coord: 1,
                shift: 0.0,
            },
            ComponentFn::Tanh {
                scale: 0.5,
                coord: 2,
                shift: 0.3,
            },
        ];
        let v = DriftField::new(
            DriftKind::Componentwise {
                components: comps,
                quadrature: 4,
            },
            2,
            None,
        )
        .unwrap();
        let m = PointMeasure::from_atoms(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        let out = v.eval_v(MeasureArg::Points(&m), &[0.0, 1.0]).unwrap();
        assert!((out[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
        assert!((out[1] - 0.5 * 0.3f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn scaled_family_scales_values_and_bound() {
        let v = DriftField::constant(vec![1.0, 0.0]).unwrap();
        let s = v.scaled(0.2).unwrap();
        let m = PointMeasure::from_atoms(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        assert_eq!(
            s.eval_v(MeasureArg::Points(&m), &[0.0, 0.0]).unwrap(),
            vec![0.2, 0.0]
        );
        assert!((s.bound().value() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sigma_inf_and_c0() {
        let v = DriftField::constant(vec![0.3]).unwrap();
        assert!((v.c0() - 0.6 * PI).abs() < 1e-15);
        assert!((v.sigma_inf() - 1.0 / (0.6 * PI).powi(2)).abs() < 1e-15);
        assert!(DriftField::zero(2).sigma_inf().is_infinite());
    }
}
