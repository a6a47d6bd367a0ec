pub mod cli_io;
pub mod error;
pub mod experiments;
pub mod global_solver;
pub mod model;
pub mod local_solvers;
pub mod numerics;
pub mod penalty;
pub mod reformulate;

pub use error::{Error, Result};
