//! Simulation and verification toolkit for a two-component peakon system.
//!
//! The model couples a Camassa–Holm velocity field u with a density field ρ
//! through the Helmholtz operator 1 − ∂ₓₓ:
//!
//!   m_t + u m_x + 2 m u_x + ρ̄_x ρ = 0,     m = u − u_xx,
//!   ρ_t + (uρ)_x = 0,                       ρ = ρ̄ − ρ̄_xx.
//!
//! The crate provides three complementary views of its dynamics:
//!
//! * [`peakon_dynamics`] — the finite-dimensional ODE system governing
//!   multipeakon solutions, integrated with an adaptive embedded Runge–Kutta
//!   pair and peak-collision detection;
//! * [`closed_form`] — exact symmetric peakon–antipeakon solutions in all
//!   three criticality regimes, used as reference oracles;
//! * [`lagrangian`] — a semi-linear formulation in Lagrangian coordinates
//!   that continues conservative solutions through wave breaking, with
//!   [`diagnostics`] providing a monitored run harness.
//!
//! All solvers are generic over the scalar type via the [`Real`] trait
//! (implemented for `f32` and `f64`); the aliases below fix `f64`, the
//! precision used throughout the test suite.

// Validation deliberately writes `!(a < b)`: unlike `a >= b`, it also fails
// when either side is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod diagnostics;
pub mod dynamics;
pub mod lagrangian;
pub mod peakon;
pub mod real;

pub use real::Real;

pub mod core_types {
    pub use crate::peakon::*;
}
pub mod peakon_dynamics {
    pub use crate::dynamics::*;
}

/// `f64` multipeakon state.
pub type PeakonState = peakon::PeakonState<f64>;
/// `f64` Eulerian field sample.
pub type EulerianSample = peakon::EulerianSample<f64>;
/// `f64` trajectory record.
pub type TrajectoryRecord = dynamics::TrajectoryRecord<f64>;
/// `f64` integration options.
pub type IntegrateOpts = dynamics::IntegrateOpts<f64>;
/// `f64` symmetric peakon–antipeakon case.
pub type AntisymCase = closed_form::AntisymCase<f64>;
/// `f64` Lagrangian grid.
pub type LagrangianGrid = lagrangian::LagrangianGrid<f64>;
/// `f64` grid specification.
pub type GridSpec = lagrangian::GridSpec<f64>;
/// `f64` run options.
pub type RunOpts = diagnostics::RunOpts<f64>;
/// `f64` run record.
pub type RunRecord = diagnostics::RunRecord<f64>;
