pub mod autograd;
pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod rating_stats;

pub use error::{Error, Result};
