//! Numerical toolkit for equidistribution of zeros of random holomorphic
//! sections of line bundles over the Riemann sphere.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod bergman;
pub mod discrepancy;
pub mod envelope;
pub mod error;
pub mod harmonics;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod sections;
pub mod sphere;
pub mod table;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Real;
pub use sphere::{Chart, SpherePoint};

pub type Point = sphere::SpherePoint<f64>;
pub type Grid = quadrature::QuadratureGrid<f64>;
pub type Weight = weights::Weight<f64>;
