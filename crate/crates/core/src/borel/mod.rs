//! Borel codes and the complement/union unraveling pipeline.

pub mod code;
pub mod pipeline;

pub use code::*;
pub use pipeline::*;
