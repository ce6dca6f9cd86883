pub mod demand;
pub mod discrete;
pub mod error;
pub mod experiment;
pub mod policies;
pub mod relaxed;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result, Violation};
