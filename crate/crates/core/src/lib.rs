pub mod bubbles;
pub mod cartan;
pub mod error;
pub mod fit;
pub mod torus;

pub use error::{Result, TodaError};
