//! Numerical laboratory for Airy-flow Strichartz estimates on rescaled tori.

pub mod arithmetic;
pub mod bilinear;
pub mod counterexample;
pub mod error;
pub mod extremizer;
pub mod lattice;
pub mod numeric;
pub mod norm;
pub mod profile;
pub mod rng;
pub mod runner;
pub mod scaling;

pub use error::{LabError, Result};
