//! Core of the mawen mathematics working environment: the term language,
//! rewriting, the knowledge store, and the specification and solving engines.

pub mod knowledge;
pub mod par;
pub mod rewrite;
pub mod solve;
pub mod spec;
pub mod term;
