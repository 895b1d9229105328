//! First-order logic under team semantics with first-order definable
//! dependency atoms.
//!
//! The crate evaluates formulas on finite models and teams, rewrites them
//! into normal forms (including elimination of totality atoms), and checks
//! claimed equivalences and graph-theoretic facts by exhaustive search.

pub mod ast;
pub mod corpus;
pub mod deps;
pub mod equiv;
pub mod parse;
pub mod rewrite;
pub mod semantics;
pub mod structures;

pub use ast::{Formula, Literal, Signature, Term};
pub use deps::Registry;
pub use semantics::{Model, Team};
