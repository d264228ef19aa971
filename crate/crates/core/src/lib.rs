//! Simulation, detection and classification of critical transitions between
//! a low-amplitude and a high-amplitude oscillatory state.

pub mod classifier;
pub mod config;
pub mod detector;
pub mod error;
pub mod features;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::CtType;
pub use trajectory::Trajectory;
