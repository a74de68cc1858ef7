pub mod audio;
pub mod error;
pub mod eval;
pub mod media;
pub mod model;
pub mod training;
pub mod nn;

pub use error::{Error, Result};
