//! Simulation and analysis toolkit for the two-dimensional one-component
//! plasma (Coulomb gas) with a uniform neutralizing background on the unit
//! disk.

pub mod error;
pub mod extremes;
pub mod fluctuations;
pub mod geometry;
pub mod gmc;
mod linalg;
pub mod model;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Configuration, Point};
pub use model::{Density, Ensemble, ModelParams};
pub use profile::RadialProfile;
