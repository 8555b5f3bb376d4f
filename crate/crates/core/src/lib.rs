pub mod bifurcation;
pub mod cli;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod perturbation;
pub mod simulation;
pub mod spectral;
pub mod stability;
pub mod verify;

pub use error::{Error, Result};
