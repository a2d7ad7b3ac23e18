//! Library surface of the mediation CLI: corpus loading, batch evaluation,
//! and report emission, kept separate from argument parsing so tests can
//! drive them directly.

pub mod corpus;
pub mod eval;
pub mod report;
