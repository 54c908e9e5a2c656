//! Hermite-Galerkin solvers for stationary Fokker-Planck-Kolmogorov
//! equations with respect to the standard Gaussian measure.
//!
//! The drift has the form `b(p, x) = −x + v(p, x)` with `v` bounded. Densities
//! are stored relative to `γ_k` as coefficients in the normalized Hermite
//! chaos basis, so the Ornstein-Uhlenbeck part of the operator is diagonal
//! and only the bounded perturbation needs quadrature.

// `!(x > 0.0)` style guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos_basis;
pub mod density;
pub mod diagnostics;
pub mod drift;
pub mod error;
pub mod ladder;
pub mod linear;
pub mod nonlinear;
pub mod oracles;
pub mod sweep;

pub use chaos_basis::{
    gauss_hermite, hermite_eval, BasisTable, ChaosBasis, GaussHermite1d, MultiIndex, QuadratureGrid,
};
pub use density::{Bump, ChaosDensity, DensityDocument, PointMeasure, TestFunction};
pub use diagnostics::{b1_bound, BoundReport, BoundRow, FisherReport};
pub use drift::{
    ComponentFn, CustomDrift, DeclaredBound, DriftField, DriftKind, FrozenDrift, Kernel,
    MeasureArg, Potential,
};
pub use error::{Error, Result};
pub use ladder::{run_ladder, LadderConfig, LadderLevel, LadderReport};
pub use linear::{
    assemble, residual, solve_linear, GalerkinSystem, LinearSolution, ResidualSummary,
};
pub use nonlinear::{
    fixed_point_solve, schauder_membership, FixedPointOptions, FixedPointSolution, FixedPointTrace,
    IterationRecord,
};
pub use oracles::{
    oracle_1d, oracle_fd_2d, oracle_sde, oracle_vlasov_1d, GridDensity1D, GridDensity2D,
    SdeEstimates, SdeOptions,
};
pub use sweep::{sweep, SweepRow, SweepTable};
