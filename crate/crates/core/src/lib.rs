pub mod error;
pub mod estimation;
pub mod gof;
pub mod io;
pub mod ode;
pub mod sim;
pub mod smoothing;

pub use error::{Error, Result};
