pub mod channel;
pub mod design;
pub mod error;
pub mod flops;
pub mod harness;
pub mod linalg;
pub mod update;

pub use error::{BeamError, Result};
