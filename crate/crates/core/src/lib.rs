//! Quasi-static finite-element solver for the shear-compression gradient
//! damage model applied to block caving.

pub mod app;
pub mod continuum;
pub mod error;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
