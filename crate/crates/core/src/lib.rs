//! Pressure and fluid-flow model for a thin curved vessel attached to a planar wall,
//! coupled to the surrounding half-space.

pub mod bem3d1d;
pub mod check;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod greens;
pub mod harness;
pub mod quadrature;
pub mod solver1d;

pub use check::Check;
pub use error::{Error, Result};
pub use geometry::{Centerline, RadiusProfile, VesselGeometry};

/// Cartesian vector with `z` normal to the wall.
pub type Vec3 = nalgebra::Vector3<f64>;
