pub mod circuit;
pub mod cli;
pub mod cliffords;
pub mod error;
pub mod gf2;
pub mod observables;
pub mod oracle;
pub mod scaling;
pub mod stabilizer;

pub use error::{Error, Result};
