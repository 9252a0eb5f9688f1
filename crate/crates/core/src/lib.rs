//! Test-driven program synthesis guided by types and effects.
//!
//! Candidate method bodies are enumerated by filling typed holes, checked
//! against unit-test specs, and repaired with effect holes when an assertion
//! fails. Per-spec solutions are then merged into a branching program.

pub mod lang;
pub mod interp;
pub mod world;
pub mod typegen;
pub mod effgen;
pub mod search;
pub mod merge;
pub mod driver;
