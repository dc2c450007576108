pub mod error;
pub mod graph;
pub mod harness;
pub mod material;
pub mod maxwell;
pub mod monotone;
pub mod scenario;
pub mod solver;
pub mod suite;
pub mod weighted_time;

pub use error::{Error, Result};
pub use weighted_time::{Signal, TimeGrid, Weight};
