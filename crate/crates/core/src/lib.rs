//! Numerical toolkit for the planar Schrödinger–Poisson equation with a
//! logarithmic convolution term,
//!
//! ```text
//! -Δu + u + (log|·| * u²) u = |u|^{p-2} u   in ℝ²,
//! ```
//!
//! discretised on a truncated square. The crate provides the discrete energy
//! and its derivatives, the scaling fiber and the Nehari–Pohozaev projection,
//! signed symmetry groups, and solvers for ground states and symmetric
//! sign-changing solutions.

pub mod energy;
pub mod error;
pub mod fiber;
pub mod grid;
pub mod io;
pub mod logkernel;
pub mod par;
pub mod solver;
mod spectral;
pub mod symmetry;

pub use energy::{EnergyBreakdown, Functional, Params, State};
pub use error::{Error, Result};
pub use fiber::{FiberScan, Moments};
pub use grid::{Field, GridSpec};
pub use logkernel::{Kernel, KernelTables};
pub use solver::{SolveReport, SolverConfig, Strategy};
pub use symmetry::SymmetryGroup;
