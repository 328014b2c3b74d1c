pub mod cli;
pub mod error;
pub mod estimators;
pub mod io;
pub mod model;
pub mod mp;
pub mod quad;
pub mod sim;
pub mod solver;
pub mod special;
pub mod spectrum;

pub use error::{Error, Result};
