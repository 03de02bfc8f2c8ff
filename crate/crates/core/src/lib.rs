pub mod asymptotics;
pub mod error;
pub mod exact_transform;
pub mod montecarlo;
pub mod specfun;
pub mod tilt;
pub mod validate;

pub use error::{CbeError, Result};
