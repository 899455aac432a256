pub mod beampattern;
pub mod beamspace;
pub mod config;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod geometry;
pub mod mpc;
pub mod scenarios;
pub mod synthesis;

pub use error::{Error, Result};
