//! Ground truth computed without the chaos machinery: closed-form 1-D
//! stationary densities, an Euler-Maruyama sampler and a 2-D
//! finite-volume solver. They share only scalar special functions with the
//! rest of the crate.

mod fd2d;
mod one_d;
mod sde;

pub use fd2d::{oracle_fd_2d, GridDensity2D};
pub use one_d::{oracle_1d, oracle_vlasov_1d, GridDensity1D, SelfConsistent1D};
pub use sde::{oracle_sde, Estimate, SdeEstimates, SdeOptions};
