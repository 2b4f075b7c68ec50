pub mod attribution;
mod binio;
pub mod encoders;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod params;
pub mod synthetic;
pub mod system;
pub mod trainer;
pub mod transformer;

pub use error::{Error, Result};
