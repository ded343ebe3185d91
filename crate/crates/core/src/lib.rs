//! Minimizing-movement solver for the one-dimensional advective Cahn-Hilliard
//! equation
//!
//! ```text
//! u_t = (-u_xx + d_s W(x, u))_xx - beta u_x     on (0, L)
//! u(0) = 0, u_x(L) = 0, mu(0) = 0, mu_x(L) = 0
//! ```
//!
//! Each implicit step minimizes the energy plus a squared dual-norm distance
//! to the previous state, the transport term is resolved by an outer Picard
//! loop, and [`analysis`] checks the resulting trajectories against the
//! energy balance, a-priori bounds, dissipativity and small-advection rates.

// `!(x > 0.0)` guards deliberately reject NaN; index loops mirror the stencils.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod banded;
pub mod coupling;
mod error;
pub mod grid;
pub mod hilbert;
pub mod potential;
pub mod scheme;
pub mod trajectory;

pub use coupling::{
    solve_fixed_point, solve_forced, solve_monolithic, Advection, CoupledSolution, PicardConfig,
    PicardStart,
};
pub use error::{Error, Result};
pub use grid::{make_grid, DiscreteLaplacian, Grid};
pub use hilbert::{DualRep, Field};
pub use potential::{LBParams, Potential, PotentialKind, PotentialModel};
pub use scheme::{StepConfig, StepRecord};
pub use trajectory::Trajectory;
