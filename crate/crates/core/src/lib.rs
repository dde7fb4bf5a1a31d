pub mod completion;
pub mod config;
pub mod document;
pub mod execution;
pub mod harness;
pub mod markup;
pub mod protocol;
pub mod prover;
pub mod range;
pub mod sources;

pub use range::Range;
