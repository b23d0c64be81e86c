//! Discrete elastic rod simulation core.
//!
//! A rod is a chain of `N` nodes joined by `N - 1` edges, each edge carrying a
//! twist angle. The generalized coordinate vector interleaves node positions
//! and edge angles, `[q0, θ0, q1, θ1, ..., θ(N-2), q(N-1)]`, for a total of
//! `4N - 1` degrees of freedom. Elastic energies (stretch, bend, twist) couple
//! only neighbouring nodes and edges, so every Hessian in this crate is banded.
//!
//! The crate is `no_std` with `alloc`. Float intrinsics go through [`math`],
//! which forwards to `libm`.
//!
//! Modules:
//! - [`geometry`]: rod construction, tangents, reference/material frames, curvature.
//! - [`elasticity`]: energies with analytic gradients and banded Hessians.
//! - [`contact`]: rod vs. capsule/sphere detection, smooth implicit contact and the
//!   explicit penalty model.
//! - [`dynamics`]: backward-Euler Newton stepper and the explicit symplectic baseline.
//! - [`control`]: delta natural curvature / twist actuation.
//! - [`envs`]: the four manipulation tasks.
//! - [`validation`]: finite-difference self checks used by the `validate` command.

#![no_std]
// Index loops mirror the stencil formulas; `!(x > tol)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod banded;
pub mod contact;
pub mod control;
pub mod dynamics;
pub mod eigen;
pub mod elasticity;
pub mod envs;
pub mod error;
pub mod geometry;
pub mod math;
pub mod validation;

pub use error::{Error, Result};
pub use math::{Mat3, Vec3};
