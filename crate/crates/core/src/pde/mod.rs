//! Deterministic reference solutions: finite differences, Cole-Hopf, heat semigroup.

pub mod cole_hopf;
pub mod fd;
pub mod grid;
pub mod heat;
pub mod quadrature;

pub use cole_hopf::{cole_hopf, cole_hopf_with, ColeHopfScheme};
pub use fd::{padded_grid, solve_fd, solve_fd_frames};
pub use grid::{GridFamily, GridFunction, SpatialGrid};
pub use heat::{heat_apply, heat_apply_grid, heat_apply_grid_gradient};
