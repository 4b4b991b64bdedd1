//! Theories (an import DAG), problem patterns and methods (trees), and
//! examples with their hidden formalisations.

mod model;
mod store;

pub use model::*;
pub use store::{load_store, undeclared, Collection, KnowledgeStore, LoadError, LoadErrorKind, LoadReport, Refinement, StoreOutline, UnknownId};
