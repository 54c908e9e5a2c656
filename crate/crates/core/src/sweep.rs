//! Parameter sweeps `u ↦ p_u` over a drift family. Every point starts from
//! `p₀ ≡ 1` with the same iteration policy, so the selected solution is a
//! deterministic function of `u`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos_basis::{ChaosBasis, QuadratureGrid};
use crate::density::{ChaosDensity, DensityDocument};
use crate::drift::DriftField;
use crate::error::{Error, Result};
use crate::nonlinear::{fixed_point_solve, FixedPointOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub u: f64,
    pub iterations: Option<usize>,
    pub final_residual: Option<f64>,
    pub l2sq: Option<f64>,
    pub density: Option<DensityDocument>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// `‖p_{u_{j+1}} − p_{u_j}‖_{L²(γ)}`, absent when either point failed.
    pub adjacent_distances: Vec<Option<f64>>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn densities(&self) -> Vec<Option<ChaosDensity>> {
        self.rows
            .iter()
            .map(|r| {
                r.density
                    .as_ref()
                    .and_then(|d| ChaosDensity::from_document(d).ok())
            })
            .collect()
    }

    /// `u,iterations,final_residual,l2sq,dist_next,error`.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
        let mut out = String::from("u,iterations,final_residual,l2sq,dist_next,error\n");
        for (j, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:e},{},{},{},{},{}",
                r.u,
                r.iterations.map_or(String::new(), |n| n.to_string()),
                opt(r.final_residual),
                opt(r.l2sq),
                opt(self.adjacent_distances.get(j).copied().flatten()),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            );
        }
        out
    }
}

/// Solves at every `u` in parallel. A failing point is recorded and the
/// sweep carries on.
pub fn sweep<F>(
    family: F,
    grid_u: &[f64],
    basis: &Arc<ChaosBasis>,
    grid: &QuadratureGrid,
    opts: &FixedPointOptions,
) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<DriftField> + Sync,
{
    if grid_u.is_empty() {
        return Err(Error::Argument("sweep parameter grid is empty".into()));
    }
    opts.validate()?;
    let opts = FixedPointOptions {
        initial: None,
        ..opts.clone()
    };
    let solved: Vec<(SweepRow, Option<ChaosDensity>)> = grid_u
        .par_iter()
        .map(|&u| {
            let result = family(u).and_then(|v| fixed_point_solve(&v, basis, grid, &opts));
            match result {
                Ok(sol) => (
                    SweepRow {
                        u,
                        iterations: Some(sol.trace.iterations()),
                        final_residual: sol.trace.final_residual(),
                        l2sq: Some(sol.density.l2_norm_sq()),
                        density: Some(sol.density.to_document()),
                        error: None,
                    },
                    Some(sol.density),
                ),
                Err(e) => (
                    SweepRow {
                        u,
                        iterations: None,
                        final_residual: None,
                        l2sq: None,
                        density: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let adjacent_distances = solved
        .windows(2)
        .map(|w| match (&w[0].1, &w[1].1) {
            (Some(a), Some(b)) => a.l2_distance(b).ok(),
            _ => None,
        })
        .collect();
    Ok(SweepTable {
        rows: solved.into_iter().map(|(r, _)| r).collect(),
        adjacent_distances,
    })
}
