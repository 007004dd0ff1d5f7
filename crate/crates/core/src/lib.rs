//! Synthesis of effective high-order nonlinear cavity processes from
//! low-order vertices, with engines to verify the result.

pub mod cli;
pub mod counting;
pub mod error;
pub mod fock;
pub mod io;
pub mod process_algebra;
pub mod semiclassical;

pub use error::{Error, Result};
