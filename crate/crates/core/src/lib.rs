//! Sparse command generation for remote-controlled SISO LTI plants.
//!
//! A command `u(t)` is represented by a coefficient vector over the
//! control-theoretic spline basis `g_i(t) = cᵀ e^{A(t_i - t)} b` (zero for
//! `t >= t_i`). Three designs are provided:
//!
//! * [`solvers::solve_l2`]: the smoothing-spline ridge solution `(μI + G)⁻¹ y_ref`;
//! * [`solvers::solve_fista`]: the ℓ¹-ℓ² minimizer of `½‖Φθ − y_ref‖² + κ‖θ‖₁`;
//! * [`solvers::solve_eta`]: the closed-form shrinkage `S_ν(y_ref)` in the
//!   `η = Gθ` coordinates.
//!
//! The [`channel`] module quantizes and packs vectors for a bandwidth-limited
//! link, and [`simulator`] reconstructs `u(t)` at the receiver and integrates
//! the plant.

// NaN must fail range checks, so `!(x >= 0.0)` is intentional throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::excessive_precision)]

pub mod basis;
pub mod channel;
mod error;
pub mod numerics;
pub mod plant;
pub mod simulator;
pub mod solvers;

pub use basis::{BasisKind, CommandBasis, FunctionBasis, GramSet, ReferenceData, SplineBasis};
pub use channel::{DensePayload, QuantizerConfig, SparsePayload};
pub use error::{Error, Result};
pub use numerics::Matrix;
pub use plant::{PlantModel, ValidationReport};
pub use simulator::{SimulationGrid, SimulationResult};
pub use solvers::{CommandVector, Convention, SolveTrace, SolverConfig, SolverKind};
