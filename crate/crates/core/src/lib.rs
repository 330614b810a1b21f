//! Numerical toolkit for the regularized Smilansky model.
//!
//! The 2D Hamiltonian
//!
//! ```text
//! H = −∂²ₓ − ∂²ᵧ + ω²y² − Σ_j λ_j y² V_j((x − b_j) y)
//! ```
//!
//! has a spectrum bounded from below exactly when every 1D comparison
//! operator `L_j = −d²/dx² + ω² − λ_j V_j` is nonnegative. The modules here
//! compute those thresholds, demonstrate the transition on truncated grids,
//! build explicit Weyl quasi-modes in the supercritical regime and produce
//! strip-bracketing lower bounds in the subcritical one.

pub mod bracketing;
pub mod cli;
pub mod eigs;
pub mod error;
pub mod grid2d;
pub(crate) mod interp;
pub mod model;
pub mod oned;
pub mod quad;
pub mod weyl;

pub use error::Error;
pub use model::{BoundaryCondition, ChannelSpec, ModelConfig, PotentialProfile, ProfileFamily, XDomain};
