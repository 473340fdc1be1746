pub mod cli_io;
pub mod cone;
pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod torus;

pub use error::{Error, Result};
