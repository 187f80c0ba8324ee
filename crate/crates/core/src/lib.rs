pub mod a3c;
pub mod config;
pub mod env;
pub mod error;
pub mod experiments;
pub mod io;
pub mod interferometer;
pub mod metrology;
pub mod reference;
pub mod spin;

pub use error::{Error, Result};
