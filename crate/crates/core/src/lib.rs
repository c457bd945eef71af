//! Pseudospectral simulation and numerical verification for the stochastic Schrödinger–KdV
//! system with multiplicative noise.

pub mod bourgain;
pub mod cutoffs;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod noise;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
