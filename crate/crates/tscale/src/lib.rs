//! Calculus on time scales and solvers for dynamic equations.
//!
//! A time scale is an arbitrary nonempty closed subset of the real line; it
//! unifies differential equations (on ℝ), difference equations (on ℤ) and
//! hybrids of the two under one delta calculus. This crate implements that
//! calculus on bounded windows and builds four solution procedures on top
//! of it:
//!
//! - [`picard`]: Picard–Lindelöf fixed-point iteration for
//!   `x^Δ = f(t, x)` with the a-priori contraction estimate, defect
//!   verification and a uniqueness probe;
//! - [`polygon`]: ε-approximate Euler polygons with measured defect and a
//!   continuity-modulus step selector;
//! - [`delay`]: delay dynamic equations by the method of steps;
//! - [`depca`]: piecewise-constant-argument discretization of semilinear
//!   delay systems, with the node recurrence, reconstruction, error
//!   constants and exponential-stability margins.
//!
//! The structural layer lives in [`timescale`] (jump operators, graininess,
//! grids) and [`calculus`] (delta derivative/integral, time-scale
//! monomials and exponential, transition matrices, Gronwall–Bellman).
//!
//! Everything is deterministic and pure: no randomness, no global state.
//! `TimeScale` and `GridFunction` values are immutable and can be shared
//! across threads.

pub mod calculus;
pub mod delay;
pub mod depca;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod picard;
pub mod polygon;
pub mod timescale;

pub use error::{Result, TsError};
pub use field::{MatrixField, Rhs, ScalarField, StateFn};
pub use grid::GridFunction;
pub use linalg::Mat;
pub use timescale::{PointClass, TimeScale, TimeScaleConfig};
