//! Dimension ladder: solve the `k`-dimensional truncations for `k = 1..K`,
//! certify the Lyapunov moment bound `∫V dμ_k ≤ (2 + C²)T` with
//! `V = Σ α_n x_n²`, and measure how the marginals settle as `k` grows.
//!
//! The limit measure on the sequence space is not constructed; uniform
//! moments and battery distances are what the report offers as evidence.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos_basis::{ChaosBasis, MultiIndex, QuadratureGrid};
use crate::density::{Bump, ChaosDensity, DensityDocument, TestFunction};
use crate::drift::{DeclaredBound, DriftField};
use crate::error::{Error, Result};
use crate::nonlinear::{fixed_point_solve, FixedPointOptions};

/// Nodes per axis for the low-dimensional quadrature of bump expectations.
const BATTERY_Q: usize = 80;

#[derive(Clone, Debug)]
pub struct LadderConfig {
    /// `α_1, …, α_K`.
    pub weights: Vec<f64>,
    /// Declared componentwise drift bound `C`.
    pub bound_c: f64,
    /// Largest dimension `K`; levels are `1..=K`.
    pub max_dim: usize,
    /// Basis degree per level (index `k − 1`).
    pub degrees: Vec<u32>,
    /// Gauss-Hermite nodes per axis per level.
    pub quadrature: Vec<usize>,
    pub fixed_point: FixedPointOptions,
    /// Radii `R` for the tail masses `μ_k(V > R)`.
    pub tail_radii: Vec<f64>,
    pub battery: Vec<TestFunction>,
}

impl LadderConfig {
    /// `α_n = 4^{−n}`, uniform degree and quadrature, default battery.
    pub fn new(max_dim: usize, bound_c: f64, degree: u32, quadrature: usize) -> Self {
        LadderConfig {
            weights: (1..=max_dim).map(|n| 4f64.powi(-(n as i32))).collect(),
            bound_c,
            max_dim,
            degrees: vec![degree; max_dim],
            quadrature: vec![quadrature; max_dim],
            fixed_point: FixedPointOptions::default(),
            tail_radii: vec![0.5, 1.0, 2.0],
            battery: default_battery(max_dim),
        }
    }

    /// Largest ratio `α_{n+1}/α_n`; the tail beyond `K` is bounded by a
    /// geometric series with this ratio.
    pub fn weight_ratio(&self) -> f64 {
        self.weights
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }

    /// `T`: the configured weights plus the geometric tail bound
    /// `α_K r / (1 − r)`.
    pub fn total_weight(&self) -> f64 {
        let r = self.weight_ratio();
        let partial: f64 = self.weights.iter().sum();
        let last = *self.weights.last().unwrap_or(&0.0);
        partial + last * r / (1.0 - r)
    }

    /// `(2 + C²) T`.
    pub fn moment_bound(&self) -> f64 {
        (2.0 + self.bound_c * self.bound_c) * self.total_weight()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_dim == 0 {
            return Err(Error::Argument("ladder needs at least one level".into()));
        }
        if self.weights.len() < self.max_dim
            || self.degrees.len() < self.max_dim
            || self.quadrature.len() < self.max_dim
        {
            return Err(Error::Argument(format!(
                "weights, degrees and quadrature must cover {} levels",
                self.max_dim
            )));
        }
        if self.weights.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Argument("ladder weights must be positive".into()));
        }
        if self.weights.len() > 1 && !(self.weight_ratio() < 1.0) {
            return Err(Error::Argument(format!(
                "ladder weights must decay geometrically; ratio {} is not below 1",
                self.weight_ratio()
            )));
        }
        if !(self.bound_c >= 0.0) {
            return Err(Error::Argument("drift bound C must be non-negative".into()));
        }
        if self.degrees.iter().any(|&n| n < 2) {
            return Err(Error::Argument(
                "Lyapunov moments need basis degree >= 2".into(),
            ));
        }
        if self.tail_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Argument("tail radii must be positive".into()));
        }
        if self.battery.is_empty() {
            return Err(Error::Argument("test battery is empty".into()));
        }
        self.fixed_point.validate()
    }
}

/// Coordinates `x_n`, squares `x_n²` and three bumps per coordinate, `n < K`.
pub fn default_battery(max_dim: usize) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for n in 0..max_dim {
        out.push(TestFunction::Moment { coord: n, power: 1 });
        out.push(TestFunction::Moment { coord: n, power: 2 });
        for c in [-1.0, 0.0, 1.0] {
            out.push(TestFunction::Bump(
                Bump::new(vec![n], vec![c], 1.5, 6).expect("valid bump"),
            ));
        }
    }
    out
}

/// `∫ V ρ dγ = Σ α_n (1 + √2 c_{2e_n})`, from `x² = √2 h₂(x) + 1`.
pub fn lyapunov_moment(rho: &ChaosDensity, weights: &[f64]) -> Result<f64> {
    let k = rho.dim();
    if rho.basis().degree() < 2 {
        return Err(Error::Argument(
            "Lyapunov moment needs basis degree >= 2".into(),
        ));
    }
    if weights.len() < k {
        return Err(Error::Argument(format!(
            "{} weights for dimension {k}",
            weights.len()
        )));
    }
    Ok((0..k)
        .map(|n| {
            let c = rho.coefficient(&MultiIndex::unit(k, n, 2));
            weights[n] * (1.0 + std::f64::consts::SQRT_2 * c)
        })
        .sum())
}

/// `∫ φ ρ dγ`, or `None` when `φ` reads coordinates beyond the density's
/// dimension. Hermite and moment tests are read off the coefficients; bumps
/// are integrated against the marginal on their coordinates.
pub fn expectation(rho: &ChaosDensity, phi: &TestFunction) -> Result<Option<f64>> {
    let k = rho.dim();
    if phi.max_coord().is_some_and(|c| c >= k) {
        return Ok(None);
    }
    Ok(Some(match phi {
        TestFunction::HermitePoly(beta) => {
            if beta.dim() != k {
                let mut e = beta.exponents().to_vec();
                e.resize(k, 0);
                rho.coefficient(&MultiIndex::new(e))
            } else {
                rho.coefficient(beta)
            }
        }
        TestFunction::Moment { coord, power } => match power {
            1 => rho.coefficient(&MultiIndex::unit(k, *coord, 1)),
            2 => 1.0 + std::f64::consts::SQRT_2 * rho.coefficient(&MultiIndex::unit(k, *coord, 2)),
            p => {
                return Err(Error::Argument(format!(
                    "moment power {p} is not supported"
                )));
            }
        },
        TestFunction::Bump(b) => {
            let mut keep = b.coords.clone();
            keep.sort_unstable();
            keep.dedup();
            let marginal = rho.marginal(&keep)?;
            let local = Bump {
                coords: b
                    .coords
                    .iter()
                    .map(|c| keep.binary_search(c).expect("coordinate kept"))
                    .collect(),
                ..b.clone()
            };
            let grid = QuadratureGrid::tensor(BATTERY_Q, keep.len())?;
            let phi = TestFunction::Bump(local);
            marginal.integrate(|x| phi.value(x), &grid)?
        }
    }))
}

/// `max_φ |∫φ dμ − ∫φ dμ'|` over the battery tests both densities can see.
pub fn marginal_distance(
    a: &ChaosDensity,
    b: &ChaosDensity,
    battery: &[TestFunction],
) -> Result<f64> {
    if battery.is_empty() {
        return Err(Error::Argument("test battery is empty".into()));
    }
    let mut worst: f64 = 0.0;
    for phi in battery {
        if let (Some(x), Some(y)) = (expectation(a, phi)?, expectation(b, phi)?) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailMass {
    pub radius: f64,
    /// `μ_k(V > R)` under the clipped point measure.
    pub mass: f64,
    /// `m_k / R` with the point-measure moment.
    pub chebyshev_bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub k: usize,
    pub degree: u32,
    pub quadrature: usize,
    pub iterations: usize,
    /// `m_k` from the chaos coefficients.
    pub lyapunov_moment: f64,
    /// `∫V dμ_k` under the clipped point measure on the level grid.
    pub lyapunov_moment_measure: f64,
    /// `|m_k − m_k^measure|`, the reported quadrature error.
    pub eps_quad: f64,
    pub bound: f64,
    pub pass: bool,
    /// `d(k, k+1)` over the battery; `None` on the last level.
    pub d_next: Option<f64>,
    pub tail: Vec<TailMass>,
    pub clip_defect: f64,
    pub density: DensityDocument,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub weights: Vec<f64>,
    pub total_weight: f64,
    pub bound_c: f64,
    pub moment_bound: f64,
    pub levels: Vec<LadderLevel>,
    /// Set when a level failed; the levels before it are kept.
    pub aborted: Option<String>,
}

impl LadderReport {
    pub fn passed(&self) -> bool {
        self.aborted.is_none()
            && self
                .levels
                .iter()
                .all(|l| l.pass && l.tail.iter().all(|t| t.ok))
    }

    pub fn densities(&self) -> Result<Vec<ChaosDensity>> {
        self.levels
            .iter()
            .map(|l| ChaosDensity::from_document(&l.density))
            .collect()
    }

    /// One row per level: `k,m_k,bound,eps_quad,pass,d_next,tail@R...`.
    pub fn to_csv(&self) -> String {
        let radii: Vec<f64> = self
            .levels
            .first()
            .map(|l| l.tail.iter().map(|t| t.radius).collect())
            .unwrap_or_default();
        let mut out = String::from("k,m_k,bound,eps_quad,pass,d_next");
        for r in &radii {
            let _ = write!(out, ",tail@{r}");
        }
        out.push('\n');
        for l in &self.levels {
            let d = l.d_next.map_or(String::new(), |d| format!("{d:e}"));
            let _ = write!(
                out,
                "{},{:e},{:e},{:e},{},{}",
                l.k, l.lyapunov_moment, l.bound, l.eps_quad, l.pass, d
            );
            for t in &l.tail {
                let _ = write!(out, ",{:e}", t.mass);
            }
            out.push('\n');
        }
        out
    }
}

fn weighted_square(weights: &[f64], x: &[f64]) -> f64 {
    x.iter().zip(weights).map(|(xi, a)| a * xi * xi).sum()
}

/// Solves levels `k = 1..=K` in order, seeding each with the zero-padded
/// solution of the level below. A failing level stops the ladder; the report
/// then carries the levels solved so far and the reason.
pub fn run_ladder(v: &DriftField, cfg: &LadderConfig) -> Result<LadderReport> {
    cfg.validate()?;
    match v.bound() {
        DeclaredBound::Componentwise(c) if c <= cfg.bound_c * (1.0 + 1e-12) => {}
        other => {
            return Err(Error::Argument(format!(
                "ladder needs a componentwise drift bound <= C = {}, got {other:?}",
                cfg.bound_c
            )))
        }
    }
    if v.dim() < cfg.max_dim {
        return Err(Error::Argument(format!(
            "drift has {} components, ladder needs {}",
            v.dim(),
            cfg.max_dim
        )));
    }
    let bound = cfg.moment_bound();
    let mut report = LadderReport {
        weights: cfg.weights[..cfg.max_dim].to_vec(),
        total_weight: cfg.total_weight(),
        bound_c: cfg.bound_c,
        moment_bound: bound,
        levels: Vec::new(),
        aborted: None,
    };
    let mut solutions: Vec<ChaosDensity> = Vec::new();
    for k in 1..=cfg.max_dim {
        let level = (|| -> Result<(ChaosDensity, LadderLevel)> {
            let vk = v.truncate_to_k(k)?;
            let basis = Arc::new(ChaosBasis::new(k, cfg.degrees[k - 1])?);
            let grid = QuadratureGrid::tensor(cfg.quadrature[k - 1], k)?;
            let opts = FixedPointOptions {
                initial: solutions
                    .last()
                    .cloned()
                    .or(cfg.fixed_point.initial.clone()),
                ..cfg.fixed_point.clone()
            };
            let sol = fixed_point_solve(&vk, &basis, &grid, &opts)?;
            let rho = sol.density;
            let m = lyapunov_moment(&rho, &cfg.weights)?;
            let measure = rho.as_measure(&grid)?;
            let m_measure = measure.integrate(|x| weighted_square(&cfg.weights, x));
            let eps_quad = (m - m_measure).abs();
            let tail = cfg
                .tail_radii
                .iter()
                .map(|&r| {
                    let mass = measure.integrate(|x| {
                        if weighted_square(&cfg.weights, x) > r {
                            1.0
                        } else {
                            0.0
                        }
                    });
                    let chebyshev_bound = m_measure / r;
                    TailMass {
                        radius: r,
                        mass,
                        chebyshev_bound,
                        ok: mass <= chebyshev_bound * (1.0 + 1e-12),
                    }
                })
                .collect();
            let level = LadderLevel {
                k,
                degree: cfg.degrees[k - 1],
                quadrature: cfg.quadrature[k - 1],
                iterations: sol.trace.iterations(),
                lyapunov_moment: m,
                lyapunov_moment_measure: m_measure,
                eps_quad,
                bound,
                pass: m <= bound + eps_quad,
                d_next: None,
                tail,
                clip_defect: measure.clip_defect(),
                density: rho.to_document(),
            };
            Ok((rho, level))
        })();
        match level {
            Ok((rho, level)) => {
                if let (Some(prev), Some(prev_level)) = (solutions.last(), report.levels.last_mut())
                {
                    prev_level.d_next = Some(marginal_distance(prev, &rho, &cfg.battery)?);
                }
                solutions.push(rho);
                report.levels.push(level);
            }
            Err(e) => {
                report.aborted = Some(format!("level k={k}: {e}"));
                break;
            }
        }
    }
    Ok(report)
}
