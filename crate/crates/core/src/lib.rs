pub mod analysis;
pub mod control;
pub mod error;
pub mod hazard;
pub mod normal;
pub mod output;
pub mod returns;
pub mod ruin;
pub mod simulate;
pub mod solver;
pub mod textfmt;

pub use error::{Error, Result};
