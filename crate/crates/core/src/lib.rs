pub mod bitstring;
pub mod bounds;
pub mod error;
pub mod graph;
pub mod isometry;
pub mod lemmas;
pub mod linalg;
pub mod protocol;
pub mod runner;
pub mod strategy;

pub use error::{LabError, Result};
