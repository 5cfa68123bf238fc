// SPDX-License-Identifier: Apache-2.0

//! Parametric finite elements for anisotropic curve shortening flow.
//!
//! Closed curves are evolved by a fully discrete, unconditionally stable
//! scheme built from a density `Φ(z, p) = ½ a²(z) γ²(z, p⊥)`, a mass-lumped
//! mobility `H` and a convex/concave split of the spatial derivative `Φ_z`.
//! All kernels are generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix `f64`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod curve;
pub mod cyclic;
pub mod energy_density;
pub mod error;
pub mod geodesic;
pub mod linalg;
pub mod scalar;
pub mod scheme;
pub mod verify;

pub use anisotropy::{AnisotropyDensity as GenericDensity, AnisotropyKind, Weight};
pub use curve::{circle, discrete_energy, mikula_curve, phi_energy, PeriodicGrid, PolygonalCurve as GenericCurve};
pub use energy_density::{DensityBundle as GenericBundle, Part, SplitMode};
pub use error::{Error, NonConvergence};
pub use geodesic::{geodesic_bundle, lift, FlatSurface, GraphSurface, MountainSurface};
pub use linalg::{Mat2, Vec2};
pub use scalar::Real;
pub use scheme::{
    assemble_jacobian, assemble_residual, run, solve_step, Forcing, JacobianMode, LinearSolver,
    Observer, SchemeParams as GenericParams, Solver, StepRecord, StepReport, StopReason, Trajectory,
};

pub type Point = Vec2<f64>;
pub type Curve = curve::PolygonalCurve<f64>;
pub type Density = anisotropy::AnisotropyDensity<f64>;
pub type Bundle = energy_density::DensityBundle<f64>;
pub type Params = scheme::SchemeParams<f64>;
pub type Grid = curve::PeriodicGrid<f64>;

pub type Result<T, E = Error> = std::result::Result<T, E>;
