pub mod error;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod observations;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
