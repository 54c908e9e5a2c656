//! Damped fixed-point iteration `p ← (1 − θ)p + θΨ(p)` for the nonlinear
//! stationary equation, with membership tracking in the a-priori set
//! `S = {ρ : ‖ρ‖²_{L²(γ)} ≤ B(C₀)}`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaos_basis::{ChaosBasis, QuadratureGrid};
use crate::density::ChaosDensity;
use crate::diagnostics::b1_bound;
use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::linear::{assemble, LinearSolution};

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    /// `θ ∈ (0, 1]`.
    pub damping: f64,
    /// Stop once `‖Ψ(p_m) − p_m‖_{L²(γ)} ≤ τ`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed density; `ρ ≡ 1` when absent. A seed on a smaller basis is
    /// zero-padded.
    pub initial: Option<ChaosDensity>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            damping: 1.0,
            tolerance: 1e-10,
            max_iterations: 200,
            initial: None,
        }
    }
}

impl FixedPointOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Argument(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Argument(format!(
                "tolerance {} must be positive",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// One outer iteration, describing the new iterate `p_{m+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖p_{m+1} − p_m‖`.
    pub delta: f64,
    /// `‖Ψ(p_{m+1}) − p_{m+1}‖`.
    pub psi_residual: f64,
    /// `‖p_{m+1}‖²`.
    pub l2sq: f64,
    pub in_schauder_set: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointTrace {
    pub records: Vec<IterationRecord>,
    /// `B(C₀)` used for the membership flag.
    pub schauder_bound: f64,
}

impl FixedPointTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.psi_residual)
    }

    /// CSV with header `iteration,delta,psi_residual,l2sq,in_schauder_set`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,delta,psi_residual,l2sq,in_schauder_set\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{}",
                r.iteration, r.delta, r.psi_residual, r.l2sq, r.in_schauder_set
            );
        }
        out
    }

    /// Ratios of consecutive Ψ-residuals for iterates within `radius` of the
    /// final one (measured by the residual itself).
    pub fn contraction_factors(&self, radius: f64) -> Vec<f64> {
        self.records
            .windows(2)
            .filter(|w| w[0].psi_residual <= radius && w[1].psi_residual > 0.0)
            .map(|w| w[1].psi_residual / w[0].psi_residual)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointSolution {
    pub density: ChaosDensity,
    pub trace: FixedPointTrace,
    /// The linear solve `Ψ(ρ)` at the returned density.
    pub last_linear: LinearSolution,
}

/// `(Σ c_α² ≤ B(C₀), B(C₀) − Σ c_α²)`.
pub fn schauder_membership(rho: &ChaosDensity, c0: f64) -> Result<(bool, f64)> {
    let margin = b1_bound(c0)? - rho.l2_norm_sq();
    Ok((margin >= 0.0, margin))
}

fn psi(
    v: &DriftField,
    p: &ChaosDensity,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
) -> Result<LinearSolution> {
    assemble(v, p, basis, grid)?.solve()
}

/// Runs the damped iteration from the configured seed.
pub fn fixed_point_solve(
    v: &DriftField,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    opts.validate()?;
    let schauder_bound = b1_bound(v.c0())?;
    let mut p = match &opts.initial {
        Some(seed) => seed.zero_padded(basis.clone())?,
        None => ChaosDensity::constant(basis.clone()),
    };
    let mut psi_p = psi(v, &p, basis, grid)?;
    let mut trace = FixedPointTrace {
        records: Vec::new(),
        schauder_bound,
    };
    for iteration in 1..=opts.max_iterations {
        let next = p.relaxed_towards(&psi_p.density, opts.damping)?;
        let delta = next.l2_distance(&p)?;
        let psi_next = psi(v, &next, basis, grid)?;
        let psi_residual = psi_next.density.l2_distance(&next)?;
        let l2sq = next.l2_norm_sq();
        trace.records.push(IterationRecord {
            iteration,
            delta,
            psi_residual,
            l2sq,
            in_schauder_set: l2sq <= schauder_bound,
        });
        p = next;
        psi_p = psi_next;
        if psi_residual <= opts.tolerance {
            return Ok(FixedPointSolution {
                density: p,
                trace,
                last_linear: psi_p,
            });
        }
    }
    Err(Error::NonConvergence {
        trace: Box::new(trace),
    })
}

/// Result of running the iteration from several seeds.
#[derive(Debug)]
pub struct SeedExploration {
    pub solutions: Vec<Result<FixedPointSolution>>,
    /// Largest pairwise L² distance among converged seeds.
    pub max_spread: f64,
}

/// Runs [`fixed_point_solve`] once per seed. Distinct limits indicate
/// multiple fixed points; they are reported, not reconciled.
pub fn explore_seeds(
    v: &DriftField,
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
    opts: &FixedPointOptions,
    seeds: &[ChaosDensity],
) -> SeedExploration {
    let solutions: Vec<Result<FixedPointSolution>> = seeds
        .iter()
        .map(|s| {
            let o = FixedPointOptions {
                initial: Some(s.clone()),
                ..opts.clone()
            };
            fixed_point_solve(v, basis, grid, &o)
        })
        .collect();
    let ok: Vec<&ChaosDensity> = solutions
        .iter()
        .filter_map(|s| s.as_ref().ok().map(|s| &s.density))
        .collect();
    let mut max_spread: f64 = 0.0;
    for i in 0..ok.len() {
        for j in i + 1..ok.len() {
            if let Ok(d) = ok[i].l2_distance(ok[j]) {
                max_spread = max_spread.max(d);
            }
        }
    }
    SeedExploration {
        solutions,
        max_spread,
    }
}
