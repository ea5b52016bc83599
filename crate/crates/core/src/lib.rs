//! Onset of phototactic bioconvection in a scattering algal suspension lit by
//! diffuse and oblique collimated light.
//!
//! The crate solves the basic-state radiation and concentration problem and
//! the linear-stability eigenproblem, and traces neutral curves and critical
//! points.

pub mod basicstate;
pub mod cli;
pub mod error;
pub mod numerics;
pub mod perturbation;
pub mod photomodel;
pub mod radiative;
pub mod specfun;
pub mod stability;
pub mod upswim;

pub use error::{Error, Result};
