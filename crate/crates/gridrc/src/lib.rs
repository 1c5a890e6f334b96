//! File formats, dataset directories, parallel evaluation and the agent loop.

pub mod agent;
pub mod dataset_dir;
pub mod error;
pub mod io;
pub mod parallel;

pub use error::{Category, Error, Result};
