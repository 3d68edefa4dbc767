//! Layered elastic pavement response and traffic speed deflectometer
//! (TSD) simulation.
//!
//! * [`elastic`]: surface deflection of an n-layer elastic system under a
//!   circular load (layered kernel plus inverse Hankel quadrature).
//! * [`tsd`]: multi-wheel superposition, slope profiles, reference-sensor
//!   correction and sensor sampling.
//! * [`dataset`]: subgrade modulus sweeps and the slope database files.
//! * [`inverse`]: subgrade modulus backcalculation from sensor slopes.
//!
//! The numerical modules are generic over [`Real`]; the aliases below fix
//! the scalar to `f64` (or `f32` where a single-precision variant is
//! useful).

pub mod dataset;
pub mod elastic;
pub mod error;
pub mod inverse;
pub mod scalar;
pub mod tsd;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Layer = elastic::ElasticLayer<f64>;
pub type Structure = elastic::PavementStructure<f64>;
pub type Structure32 = elastic::PavementStructure<f32>;
pub type Load = elastic::CircularLoad<f64>;
pub type Solver = elastic::DeflectionSolver<f64>;
pub type Solver32 = elastic::DeflectionSolver<f32>;
pub type TsdConfig = tsd::TsdConfiguration<f64>;
pub type Simulator = tsd::TsdSimulator<f64>;
