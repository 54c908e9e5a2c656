//! Densities with respect to `γ_k` stored as Hermite chaos coefficients,
//! cylindrical test functions, and the clipped point-mass view of a density.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos_basis::{hermite_table, BasisTable, ChaosBasis, MultiIndex, QuadratureGrid};
use crate::error::{Error, Result};

/// A density `ρ = Σ_α c_α h_α` relative to the standard Gaussian `γ_k`.
///
/// `c_0 = 1` always holds, so `∫ρ dγ = 1`. Truncation may make `ρ` negative
/// somewhere; that is only acted on by [`ChaosDensity::as_measure`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosDensity {
    basis: Arc<ChaosBasis>,
    coefficients: Vec<f64>,
}

impl ChaosDensity {
    pub fn new(basis: Arc<ChaosBasis>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::Argument(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                coefficients.len()
            )));
        }
        if coefficients[0] != 1.0 {
            return Err(Error::Argument(format!(
                "probability normalization requires c_0 = 1, got {}",
                coefficients[0]
            )));
        }
        if let Some(c) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(Error::Argument(format!("non-finite coefficient {c}")));
        }
        Ok(ChaosDensity {
            basis,
            coefficients,
        })
    }

    /// The Gaussian itself, `ρ ≡ 1`.
    pub fn constant(basis: Arc<ChaosBasis>) -> Self {
        let mut coefficients = vec![0.0; basis.len()];
        coefficients[0] = 1.0;
        ChaosDensity {
            basis,
            coefficients,
        }
    }

    /// Truncated expansion of the Cameron-Martin density `exp(⟨h,x⟩ − |h|²/2)`,
    /// whose coefficients are `Π h_i^{α_i} / √(α_i!)`.
    pub fn cameron_martin(basis: Arc<ChaosBasis>, shift: &[f64]) -> Result<Self> {
        if shift.len() != basis.dim() {
            return Err(Error::Argument(format!(
                "shift has dimension {}, basis has {}",
                shift.len(),
                basis.dim()
            )));
        }
        let coefficients = basis
            .indices()
            .iter()
            .map(|a| {
                a.exponents()
                    .iter()
                    .zip(shift)
                    .map(|(&e, &h)| {
                        let mut v = 1.0;
                        for m in 1..=e {
                            v *= h / (m as f64).sqrt();
                        }
                        v
                    })
                    .product()
            })
            .collect();
        ChaosDensity::new(basis, coefficients)
    }

    pub fn basis(&self) -> &Arc<ChaosBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.basis
            .position(alpha)
            .map_or(0.0, |p| self.coefficients[p])
    }

    /// `‖ρ‖²_{L²(γ)} = Σ c_α²` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum()
    }

    pub fn l2_distance(&self, other: &ChaosDensity) -> Result<f64> {
        self.check_same_basis(other)?;
        Ok(self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    fn check_same_basis(&self, other: &ChaosDensity) -> Result<()> {
        if self.basis.dim() != other.basis.dim() || self.basis.degree() != other.basis.degree() {
            return Err(Error::Argument(
                "densities live on different chaos bases".into(),
            ));
        }
        Ok(())
    }

    /// `(1 − θ) self + θ other`; `c_0 = 1` is kept exactly.
    pub fn relaxed_towards(&self, other: &ChaosDensity, theta: f64) -> Result<ChaosDensity> {
        self.check_same_basis(other)?;
        let mut coefficients: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a + theta * (b - a))
            .collect();
        coefficients[0] = 1.0;
        Ok(ChaosDensity {
            basis: self.basis.clone(),
            coefficients,
        })
    }

    /// Re-expresses the density on `target`, a basis of equal or larger
    /// dimension; new coordinates get exponent zero. Coefficients whose degree
    /// exceeds the target degree are dropped.
    pub fn zero_padded(&self, target: Arc<ChaosBasis>) -> Result<ChaosDensity> {
        if target.dim() < self.dim() {
            return Err(Error::Argument(format!(
                "cannot embed dimension {} into {}",
                self.dim(),
                target.dim()
            )));
        }
        let mut coefficients = vec![0.0; target.len()];
        for (alpha, &c) in self.basis.indices().iter().zip(&self.coefficients) {
            let mut e = alpha.exponents().to_vec();
            e.resize(target.dim(), 0);
            if let Some(pos) = target.position(&MultiIndex::new(e)) {
                coefficients[pos] = c;
            }
        }
        ChaosDensity::new(target, coefficients)
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let tables = self.hermite_tables(x);
        self.basis
            .indices()
            .iter()
            .zip(&self.coefficients)
            .map(|(a, &c)| c * a.eval_from_tables(&tables))
            .sum()
    }

    /// `∇ρ(x)` from `∂_i h_α = √α_i h_{α−e_i}`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let tables = self.hermite_tables(x);
        let k = self.dim();
        let mut grad = vec![0.0; k];
        for (alpha, &c) in self.basis.indices().iter().zip(&self.coefficients) {
            if c == 0.0 {
                continue;
            }
            for (i, g) in grad.iter_mut().enumerate() {
                let ai = alpha.exponents()[i];
                if ai == 0 {
                    continue;
                }
                let mut term = c * (ai as f64).sqrt();
                for (j, &e) in alpha.exponents().iter().enumerate() {
                    let idx = if j == i { e - 1 } else { e };
                    term *= tables[j][idx as usize];
                }
                *g += term;
            }
        }
        grad
    }

    fn hermite_tables(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.basis.degree() as usize;
        x.iter().map(|&xi| hermite_table(n, xi)).collect()
    }

    /// Node values using a precomputed table on the same basis.
    pub fn values_on(&self, table: &BasisTable) -> Vec<f64> {
        table.combine(&self.coefficients)
    }

    /// `∫ f ρ dγ ≈ Σ_j w_j f(x_j) ρ(x_j)`.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(
        &self,
        mut f: F,
        grid: &QuadratureGrid,
    ) -> Result<f64> {
        self.check_grid(grid)?;
        let mut acc = 0.0;
        for j in 0..grid.len() {
            let x = grid.node(j);
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFinite {
                    node: x.to_vec(),
                    value: fx,
                });
            }
            acc += grid.weights()[j] * fx * self.evaluate(x);
        }
        Ok(acc)
    }

    fn check_grid(&self, grid: &QuadratureGrid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::Argument(format!(
                "grid dimension {} does not match density dimension {}",
                grid.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Marginal on the coordinates in `keep` (0-based). Orthonormality kills
    /// every term with a nonzero exponent on a dropped coordinate.
    pub fn marginal(&self, keep: &[usize]) -> Result<ChaosDensity> {
        if keep.is_empty() {
            return Err(Error::Argument(
                "marginal needs at least one coordinate".into(),
            ));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&bad) = keep.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::Argument(format!(
                "coordinate {bad} out of range for dimension {}",
                self.dim()
            )));
        }
        if keep.len() == self.dim() {
            return Ok(self.clone());
        }
        let basis = Arc::new(ChaosBasis::new(keep.len(), self.basis.degree())?);
        let mut coefficients = vec![0.0; basis.len()];
        for (alpha, &c) in self.basis.indices().iter().zip(&self.coefficients) {
            let e = alpha.exponents();
            let dropped_zero = (0..self.dim())
                .filter(|i| !keep.contains(i))
                .all(|i| e[i] == 0);
            if !dropped_zero {
                continue;
            }
            let reduced = MultiIndex::new(keep.iter().map(|&i| e[i]).collect());
            let pos = basis
                .position(&reduced)
                .expect("reduced degree within basis");
            coefficients[pos] = c;
        }
        ChaosDensity::new(basis, coefficients)
    }

    /// Clipped, renormalized point-mass view on `grid`.
    pub fn as_measure(&self, grid: &QuadratureGrid) -> Result<PointMeasure> {
        self.check_grid(grid)?;
        let table = BasisTable::new(&self.basis, grid)?;
        PointMeasure::from_node_values(grid, &self.values_on(&table))
    }

    pub fn to_document(&self) -> DensityDocument {
        DensityDocument {
            k: self.dim(),
            n: self.basis.degree(),
            ordering: GRLEX.to_string(),
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn from_document(doc: &DensityDocument) -> Result<ChaosDensity> {
        if doc.ordering != GRLEX {
            return Err(Error::Argument(format!(
                "unsupported coefficient ordering {:?}",
                doc.ordering
            )));
        }
        let basis = Arc::new(ChaosBasis::new(doc.k, doc.n)?);
        ChaosDensity::new(basis, doc.coefficients.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<ChaosDensity> {
        let doc: DensityDocument = serde_json::from_str(text)?;
        ChaosDensity::from_document(&doc)
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let text = self.to_json().map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    pub fn read_json(path: &Path) -> std::io::Result<ChaosDensity> {
        let text = std::fs::read_to_string(path)?;
        ChaosDensity::from_json(&text).map_err(std::io::Error::other)
    }
}

const GRLEX: &str = "grlex";

/// On-disk form of a [`ChaosDensity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDocument {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u32,
    pub ordering: String,
    pub coefficients: Vec<f64>,
}

/// Non-negative point masses summing to one, obtained by clipping a density
/// at quadrature nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMeasure {
    dim: usize,
    points: Vec<f64>,
    masses: Vec<f64>,
    clip_defect: f64,
}

impl PointMeasure {
    /// Builds the measure from density values at the nodes of `grid`.
    ///
    /// `clip_defect` is the quadrature mass of the negative part that was
    /// discarded. Fails when the positive mass drops below one half.
    pub fn from_node_values(grid: &QuadratureGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Argument(format!(
                "{} node values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let mut positive = 0.0;
        let mut negative = 0.0;
        for (&w, &v) in grid.weights().iter().zip(values) {
            if v > 0.0 {
                positive += w * v;
            } else {
                negative -= w * v;
            }
        }
        if !(positive >= 0.5) {
            return Err(Error::Degenerate {
                positive_mass: positive,
            });
        }
        let k = grid.dim();
        let mut points = Vec::new();
        let mut masses = Vec::new();
        for (j, (&w, &v)) in grid.weights().iter().zip(values).enumerate() {
            if v > 0.0 {
                points.extend_from_slice(grid.node(j));
                masses.push(w * v / positive);
            }
        }
        Ok(PointMeasure {
            dim: k,
            points,
            masses,
            clip_defect: negative,
        })
    }

    /// Explicit atoms; masses are renormalized to one.
    pub fn from_atoms(dim: usize, points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * masses.len() || masses.is_empty() {
            return Err(Error::Argument("inconsistent atom layout".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Argument(
                "atom masses must be finite and non-negative".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Argument("atoms carry no mass".into()));
        }
        Ok(PointMeasure {
            dim,
            points,
            masses: masses.into_iter().map(|m| m / total).collect(),
            clip_defect: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn clip_defect(&self) -> f64 {
        self.clip_defect
    }

    /// Coordinate of atom `j`, zero beyond the measure's dimension (the
    /// embedding of `R^k` into the sequence space).
    pub fn coordinate(&self, j: usize, coord: usize) -> f64 {
        if coord < self.dim {
            self.points[j * self.dim + coord]
        } else {
            0.0
        }
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        (0..self.len())
            .map(|j| self.masses[j] * f(self.point(j)))
            .sum()
    }

    /// Pushforward onto one coordinate, atoms at equal positions merged and
    /// sorted ascending.
    pub fn marginal_1d(&self, coord: usize) -> (Vec<f64>, Vec<f64>) {
        let mut pairs: Vec<(f64, f64)> = (0..self.len())
            .map(|j| (self.coordinate(j, coord), self.masses[j]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs: Vec<f64> = Vec::new();
        let mut ms: Vec<f64> = Vec::new();
        for (x, m) in pairs {
            match xs.last() {
                Some(&last) if last == x => *ms.last_mut().unwrap() += m,
                _ => {
                    xs.push(x);
                    ms.push(m);
                }
            }
        }
        (xs, ms)
    }
}

/// Compactly supported polynomial bump `ψ(y) = (1 − |y − c|²/r²)_+^m` on a
/// subset of coordinates. With `m ≥ 3` the profile and its first two
/// derivatives vanish on the boundary of the support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub coords: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub order: u32,
}

impl Bump {
    pub fn new(coords: Vec<usize>, center: Vec<f64>, radius: f64, order: u32) -> Result<Self> {
        if coords.is_empty() || coords.len() != center.len() {
            return Err(Error::Argument(
                "bump needs matching coordinates and center".into(),
            ));
        }
        if !(radius > 0.0) || order < 3 {
            return Err(Error::Argument(
                "bump needs a positive radius and smoothness order >= 3".into(),
            ));
        }
        Ok(Bump {
            coords,
            center,
            radius,
            order,
        })
    }

    fn offsets(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let r2 = self.radius * self.radius;
        let d: Vec<f64> = self
            .coords
            .iter()
            .zip(&self.center)
            .map(|(&c, &m)| x[c] - m)
            .collect();
        let s = d.iter().map(|v| v * v).sum::<f64>() / r2;
        (d, s)
    }
}

/// Cylindrical test functions for the weak stationary identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `h_β`: polynomial cylindrical tests.
    HermitePoly(MultiIndex),
    /// Compactly supported bump on finitely many coordinates.
    Bump(Bump),
    /// `x_coord^power` with `power ∈ {1, 2}`.
    Moment { coord: usize, power: u32 },
}

impl TestFunction {
    /// Largest coordinate index the function reads.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            TestFunction::HermitePoly(b) => b.exponents().iter().rposition(|&e| e > 0),
            TestFunction::Bump(b) => b.coords.iter().copied().max(),
            TestFunction::Moment { coord, .. } => Some(*coord),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::HermitePoly(b) => hermite_product(b, x, None),
            TestFunction::Bump(b) => {
                let (_, s) = b.offsets(x);
                if s >= 1.0 {
                    0.0
                } else {
                    (1.0 - s).powi(b.order as i32)
                }
            }
            TestFunction::Moment { coord, power } => x[*coord].powi(*power as i32),
        }
    }

    /// Writes `∇φ(x)` into `grad` (length `x.len()`).
    pub fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        match self {
            TestFunction::HermitePoly(b) => {
                for (i, g) in grad.iter_mut().enumerate() {
                    let bi = b.exponents()[i];
                    if bi > 0 {
                        *g = (bi as f64).sqrt() * hermite_product(b, x, Some((i, 1)));
                    }
                }
            }
            TestFunction::Bump(b) => {
                let (d, s) = b.offsets(x);
                if s < 1.0 {
                    let m = b.order as f64;
                    let r2 = b.radius * b.radius;
                    let f = m * (1.0 - s).powi(b.order as i32 - 1) * (-2.0 / r2);
                    for (&c, &dc) in b.coords.iter().zip(&d) {
                        grad[c] += f * dc;
                    }
                }
            }
            TestFunction::Moment { coord, power } => {
                grad[*coord] = match power {
                    1 => 1.0,
                    _ => 2.0 * x[*coord],
                };
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::HermitePoly(b) => (0..x.len())
                .filter(|&i| b.exponents()[i] >= 2)
                .map(|i| {
                    let bi = b.exponents()[i] as f64;
                    (bi * (bi - 1.0)).sqrt() * hermite_product(b, x, Some((i, 2)))
                })
                .sum(),
            TestFunction::Bump(b) => {
                let (d, s) = b.offsets(x);
                if s >= 1.0 {
                    return 0.0;
                }
                let m = b.order as f64;
                let r2 = b.radius * b.radius;
                let g = 1.0 - s;
                let first = m * g.powi(b.order as i32 - 1) * (-2.0 / r2);
                let second = m * (m - 1.0) * g.powi(b.order as i32 - 2) * 4.0 / (r2 * r2);
                let d2: f64 = d.iter().map(|v| v * v).sum();
                second * d2 + first * d.len() as f64
            }
            TestFunction::Moment { power, .. } => {
                if *power == 2 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `Π_j h_{β_j − δ}(x_j)`, with the exponent of one coordinate lowered by `shift`.
fn hermite_product(beta: &MultiIndex, x: &[f64], lowered: Option<(usize, u32)>) -> f64 {
    beta.exponents()
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            let e = match lowered {
                Some((i, by)) if i == j => e - by,
                _ => e,
            };
            crate::chaos_basis::hermite_eval(e as usize, x[j])
        })
        .product()
}
