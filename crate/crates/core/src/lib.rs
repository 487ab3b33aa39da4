pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod scorer;
pub mod tensor;
pub mod text;

pub use error::{Error, Result};
