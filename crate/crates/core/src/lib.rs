pub mod asd;
pub mod benchmarks;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod output;
pub mod problem;
pub mod runner;
pub mod sensitivity;
pub mod sparse;
pub mod surrogate;
pub mod weights;

pub use error::{Error, Result};
