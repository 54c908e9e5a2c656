//! Galerkin discretization of the stationary equation for a frozen measure
//! argument: the map `Ψ : p ↦ ρ_p`.
//!
//! Testing `∫ L_b φ ρ dγ = 0` with `φ = h_β` gives
//! `−|β| c_β + Σ_α A_{βα} c_α = 0`, where
//! `A_{βα} = Σ_i √β_i ∫ v_i h_{β−e_i} h_α dγ`. With `c_0 = 1` fixed the rows
//! `β ≠ 0` form a square system for the remaining coefficients.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos_basis::{hermite_table, BasisTable, ChaosBasis, MultiIndex, QuadratureGrid};
use crate::density::{Bump, ChaosDensity, TestFunction};
use crate::drift::{DriftField, FrozenDrift, MeasureArg};
use crate::error::{Error, Result};

/// Largest acceptable condition estimate of the Galerkin system.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Hermite-test residual tolerance, relative to `1 + ‖D − A‖∞`.
pub const HERMITE_RESIDUAL_TOL: f64 = 1e-10;

/// Bump-test residual tolerance; bumps are only piecewise smooth, so this is
/// set by quadrature accuracy.
pub const BUMP_RESIDUAL_TOL: f64 = 1e-3;

/// The assembled system for one frozen measure argument.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    basis: Arc<ChaosBasis>,
    diagonal: Vec<f64>,
    interaction: DMatrix<f64>,
}

impl GalerkinSystem {
    pub fn basis(&self) -> &Arc<ChaosBasis> {
        &self.basis
    }

    /// `D_ββ = |β|`, the Ornstein-Uhlenbeck spectrum.
    pub fn ou_diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// The drift block `A`.
    pub fn interaction(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    /// `D − A` restricted to `β, α ≠ 0`.
    pub fn system_matrix(&self) -> DMatrix<f64> {
        let m = self.basis.len() - 1;
        let mut s = DMatrix::from_fn(m, m, |r, c| -self.interaction[(r + 1, c + 1)]);
        for r in 0..m {
            s[(r, r)] += self.diagonal[r + 1];
        }
        s
    }

    /// `A_{β,0}` for `β ≠ 0`, the contribution of the fixed `c_0 = 1`.
    pub fn rhs(&self) -> DVector<f64> {
        let m = self.basis.len() - 1;
        DVector::from_fn(m, |r, _| self.interaction[(r + 1, 0)])
    }

    /// `‖D − A‖∞` on the reduced system.
    pub fn norm_inf(&self) -> f64 {
        inf_norm(&self.system_matrix())
    }

    pub fn solve(&self) -> Result<LinearSolution> {
        let m = self.basis.len() - 1;
        if m == 0 {
            return Ok(LinearSolution {
                density: ChaosDensity::constant(self.basis.clone()),
                condition_estimate: 1.0,
                system_norm: 0.0,
            });
        }
        let s = self.system_matrix();
        let system_norm = inf_norm(&s);

        // Neumann bound: with q = ‖D⁻¹A‖∞ < 1, ‖(D − A)⁻¹‖∞ ≤ 1/(1 − q) since D ≥ 1.
        let q = (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| self.interaction[(r + 1, c + 1)].abs())
                    .sum::<f64>()
                    / self.diagonal[r + 1]
            })
            .fold(0.0, f64::max);
        let lu = s.clone().lu();
        let inverse_norm = if q < 0.99 {
            1.0 / (1.0 - q)
        } else {
            match lu.try_inverse() {
                Some(inv) => inf_norm(&inv),
                None => f64::INFINITY,
            }
        };
        let condition_estimate = system_norm * inverse_norm;
        if !(condition_estimate <= CONDITION_LIMIT) {
            return Err(Error::IllConditioned {
                condition: condition_estimate,
            });
        }
        let rhs = self.rhs();
        let sol = lu.solve(&rhs).ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        let mut coefficients = Vec::with_capacity(m + 1);
        coefficients.push(1.0);
        coefficients.extend(sol.iter().copied());
        Ok(LinearSolution {
            density: ChaosDensity::new(self.basis.clone(), coefficients)?,
            condition_estimate,
            system_norm,
        })
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Output of [`GalerkinSystem::solve`].
#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub density: ChaosDensity,
    pub condition_estimate: f64,
    /// `‖D − A‖∞`, the scale for the Hermite residual tolerance.
    pub system_norm: f64,
}

fn check_inputs(v: &DriftField, basis: &ChaosBasis, grid: &QuadratureGrid) -> Result<()> {
    if v.dim() != basis.dim() || grid.dim() != basis.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: drift {}, basis {}, grid {}",
            v.dim(),
            basis.dim(),
            grid.dim()
        )));
    }
    if grid.q() < basis.degree() as usize + 1 {
        return Err(Error::Argument(format!(
            "quadrature with Q={} cannot resolve degree {}; need Q >= N+1",
            grid.q(),
            basis.degree()
        )));
    }
    Ok(())
}

/// Assembles the system for `v(p, ·)` with the measure argument frozen at `p`.
pub fn assemble(
    v: &DriftField,
    p: &ChaosDensity,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
) -> Result<GalerkinSystem> {
    check_inputs(v, basis, grid)?;
    let frozen = v.freeze(MeasureArg::Density(p))?;
    assemble_frozen(&frozen, basis, grid)
}

/// Drift values at every grid node, node-major.
pub(crate) fn drift_at_nodes(frozen: &FrozenDrift, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    let k = grid.dim();
    let mut values = vec![0.0; grid.len() * k];
    values
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(j, out)| frozen.eval_into(grid.node(j), out))?;
    Ok(values)
}

/// Assembly for an already frozen drift.
pub fn assemble_frozen(
    frozen: &FrozenDrift,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
) -> Result<GalerkinSystem> {
    if frozen.dim() != basis.dim() || grid.dim() != basis.dim() {
        return Err(Error::Argument(
            "drift, basis and grid dimensions differ".into(),
        ));
    }
    let k = basis.dim();
    let m = basis.len();
    let diagonal: Vec<f64> = basis.indices().iter().map(|a| a.degree() as f64).collect();
    if basis.degree() == 0 {
        return Ok(GalerkinSystem {
            basis: basis.clone(),
            diagonal,
            interaction: DMatrix::zeros(m, m),
        });
    }
    let table = BasisTable::new(basis, grid)?;
    let h = table.matrix();
    let v = drift_at_nodes(frozen, grid)?;
    let lower = basis.prefix_len(basis.degree() - 1);
    let h_lower = h.rows(0, lower);

    // G_i[μ, α] = ∫ v_i h_μ h_α dγ for |μ| ≤ N − 1.
    let blocks: Vec<DMatrix<f64>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut weighted = h.clone();
            for (j, mut col) in weighted.column_iter_mut().enumerate() {
                col *= grid.weights()[j] * v[j * k + i];
            }
            h_lower * weighted.transpose()
        })
        .collect();

    let mut interaction = DMatrix::zeros(m, m);
    for (row, beta) in basis.indices().iter().enumerate() {
        for (i, g) in blocks.iter().enumerate() {
            let Some(mu) = beta.lowered(i) else { continue };
            let mu = basis
                .position(&mu)
                .expect("lowered index lies in the basis");
            let s = (beta.exponents()[i] as f64).sqrt();
            for col in 0..m {
                interaction[(row, col)] += s * g[(mu, col)];
            }
        }
    }
    Ok(GalerkinSystem {
        basis: basis.clone(),
        diagonal,
        interaction,
    })
}

/// `Ψ(p)`: the Galerkin solution of the linear equation with `v(p, ·)` frozen.
pub fn solve_linear(
    v: &DriftField,
    p: &ChaosDensity,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
) -> Result<ChaosDensity> {
    Ok(assemble(v, p, basis, grid)?.solve()?.density)
}

/// `∫ [Δφ − x·∇φ + v(p,x)·∇φ] ρ dγ` on `grid`.
pub fn residual(
    rho: &ChaosDensity,
    v: &DriftField,
    p_frozen: &ChaosDensity,
    phi: &TestFunction,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let frozen = v.freeze(MeasureArg::Density(p_frozen))?;
    let nodes = NodeData::new(rho, &frozen, grid)?;
    Ok(nodes.residual(phi))
}

/// Density and drift values cached on a grid for repeated residual tests.
pub struct NodeData<'a> {
    grid: &'a QuadratureGrid,
    rho: Vec<f64>,
    drift: Vec<f64>,
}

impl<'a> NodeData<'a> {
    pub fn new(rho: &ChaosDensity, frozen: &FrozenDrift, grid: &'a QuadratureGrid) -> Result<Self> {
        if rho.dim() != grid.dim() {
            return Err(Error::Argument("density and grid dimensions differ".into()));
        }
        let rho_values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|j| rho.evaluate(grid.node(j)))
            .collect();
        Ok(NodeData {
            grid,
            rho: rho_values,
            drift: drift_at_nodes(frozen, grid)?,
        })
    }

    pub fn residual(&self, phi: &TestFunction) -> f64 {
        let k = self.grid.dim();
        let mut grad = vec![0.0; k];
        let mut total = 0.0;
        for j in 0..self.grid.len() {
            let x = self.grid.node(j);
            phi.gradient(x, &mut grad);
            let mut l = phi.laplacian(x);
            for i in 0..k {
                l += (self.drift[j * k + i] - x[i]) * grad[i];
            }
            total += self.grid.weights()[j] * l * self.rho[j];
        }
        total
    }
}

/// Residuals of one solved density against both test classes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResidualSummary {
    /// Largest `|residual|` over `h_β`, `0 < |β| ≤ N`.
    pub hermite_max: f64,
    pub hermite_tolerance: f64,
    pub hermite_count: usize,
    /// Largest `|residual|` over `h_β` with `|β| = N + 1`; reported only,
    /// this is the truncation signal.
    pub beyond_degree_max: f64,
    pub bump_max: f64,
    pub bump_tolerance: f64,
    pub bump_count: usize,
    pub pass: bool,
}

/// A deterministic battery of `count` bump tests in dimension `k`: single
/// coordinates first, then coordinate pairs when `k ≥ 2`.
pub fn default_bumps(k: usize, count: usize) -> Vec<Bump> {
    let centers = [-0.8, 0.0, 0.7, -0.3, 0.4, 1.1, -1.2, 0.2, -0.5, 0.9];
    (0..count)
        .map(|j| {
            let c = centers[j % centers.len()];
            if k >= 2 && j % 2 == 1 {
                let a = (j / 2) % k;
                let b = (a + 1) % k;
                Bump::new(vec![a, b], vec![c, -0.5 * c], 3.5, 12).expect("valid bump")
            } else {
                Bump::new(vec![(j / 2) % k], vec![c], 3.0, 12).expect("valid bump")
            }
        })
        .collect()
}

/// Grid for bump residuals: finer than the solve grid (`max(2Q, 40)` nodes
/// per axis), reduced until the tensor grid has at most a million nodes but
/// never below `Q`.
pub fn default_bump_grid(k: usize, q: usize) -> Result<QuadratureGrid> {
    let mut qb = (2 * q).max(40);
    while qb > q && (qb as f64).powi(k as i32) > 1e6 {
        qb -= 1;
    }
    QuadratureGrid::tensor(qb, k)
}

/// Evaluates the residual suite: every Hermite test up to degree `N` on the
/// solve grid (asserted), degree `N + 1` (reported), and the bump battery on
/// a finer grid (asserted at [`BUMP_RESIDUAL_TOL`]).
pub fn residual_suite(
    rho: &ChaosDensity,
    v: &DriftField,
    p_frozen: &ChaosDensity,
    grid: &QuadratureGrid,
    system_norm: f64,
    bumps: &[Bump],
    bump_grid: &QuadratureGrid,
) -> Result<ResidualSummary> {
    let frozen = v.freeze(MeasureArg::Density(p_frozen))?;
    let basis = rho.basis();
    let k = basis.dim();
    let n = basis.degree();
    let nodes = NodeData::new(rho, &frozen, grid)?;

    let mut hermite_max: f64 = 0.0;
    let mut hermite_count = 0;
    for beta in basis.indices().iter().skip(1) {
        let r = hermite_residual(&nodes, beta);
        hermite_max = hermite_max.max(r.abs());
        hermite_count += 1;
    }
    let next = ChaosBasis::with_cap(k, n + 1, usize::MAX)?;
    let beyond_degree_max = next
        .indices()
        .iter()
        .filter(|b| b.degree() == n + 1)
        .map(|b| hermite_residual(&nodes, b).abs())
        .fold(0.0, f64::max);

    let fine = NodeData::new(rho, &frozen, bump_grid)?;
    let bump_max = bumps
        .iter()
        .map(|b| fine.residual(&TestFunction::Bump(b.clone())).abs())
        .fold(0.0, f64::max);

    let hermite_tolerance = HERMITE_RESIDUAL_TOL * (1.0 + system_norm);
    Ok(ResidualSummary {
        hermite_max,
        hermite_tolerance,
        hermite_count,
        beyond_degree_max,
        bump_max,
        bump_tolerance: BUMP_RESIDUAL_TOL,
        bump_count: bumps.len(),
        pass: hermite_max <= hermite_tolerance && bump_max <= BUMP_RESIDUAL_TOL,
    })
}

/// Hermite-test residual using per-node Hermite tables; same integrand as
/// [`NodeData::residual`] for `φ = h_β`, evaluated faster.
fn hermite_residual(nodes: &NodeData<'_>, beta: &MultiIndex) -> f64 {
    let grid = nodes.grid;
    let k = grid.dim();
    let e = beta.exponents();
    let top = *e.iter().max().unwrap_or(&0) as usize;
    let mut total = 0.0;
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..grid.len() {
        let x = grid.node(j);
        tables.clear();
        tables.extend(x.iter().map(|&xi| hermite_table(top, xi)));
        let value: f64 = (0..k).map(|i| tables[i][e[i] as usize]).product();
        // L_OU h_β = −|β| h_β
        let mut l = -(beta.degree() as f64) * value;
        for i in 0..k {
            if e[i] == 0 {
                continue;
            }
            let d: f64 = (0..k)
                .map(|c| {
                    let p = if c == i { e[c] - 1 } else { e[c] };
                    tables[c][p as usize]
                })
                .product();
            l += nodes.drift[j * k + i] * (e[i] as f64).sqrt() * d;
        }
        total += grid.weights()[j] * l * nodes.rho[j];
    }
    total
}
