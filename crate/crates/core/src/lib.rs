pub mod autodiff;
pub mod commands;
pub mod error;
pub mod models;
pub mod stats;
pub mod synth;
pub mod text;
pub mod training;
pub mod util;

pub use error::{Error, Result};
