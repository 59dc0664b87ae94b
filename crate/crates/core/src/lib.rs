pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod keypoints;
pub mod media;
pub mod model;
pub mod sampling;
pub mod selection;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
