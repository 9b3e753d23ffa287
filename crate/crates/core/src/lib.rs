//! Stern-Gerlach deflection of an electron under four models: a classical
//! rigid sphere, a classical point particle, a Pauli wave packet and a
//! classical Dirac field.
//!
//! Kernels are generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar for the common cases.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod detector;
pub mod dirac;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod lumps;
pub mod num;
pub mod ode;
pub mod params;
pub mod pauli;
pub mod point;
pub mod scenario;
pub mod spectral;
pub mod sphere;
pub mod vec3;

pub use error::{Result, SimError};
pub use field::{EmField, FieldFree, SternGerlachField};
pub use grid::{Grid3, ScalarGridField, VecGridField};
pub use num::Real;
pub use params::{PhysParams, UnitSystem};
pub use vec3::Vec3;

pub type Vec3f64 = Vec3<f64>;
pub type Vec3f32 = Vec3<f32>;
pub type PhysParams64 = PhysParams<f64>;
pub type PhysParams32 = PhysParams<f32>;
pub type Grid3f64 = Grid3<f64>;
pub type Grid3f32 = Grid3<f32>;
