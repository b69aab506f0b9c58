pub mod allocate;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod io;
pub mod model;
pub mod plan;
pub mod recall;
pub mod rng;
pub mod serde_util;
pub mod simlab;
pub mod stratify;

pub use error::{Error, Result};
