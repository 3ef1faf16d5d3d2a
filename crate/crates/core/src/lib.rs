//! Tools for probing the energy balance of rough variable-density and
//! compressible Euler flows: mollification, Besov-type increment seminorms,
//! commutator scaling experiments, boundary-layer functionals and
//! energy-budget decompositions along spectral trajectories.

pub mod besov;
pub mod commutator;
pub mod domain;
pub mod error;
pub mod euler;
pub mod field;
pub mod hypothesis;
pub mod mollify;
pub mod roughfield;
pub mod spectral;

pub use error::{Error, Result};
