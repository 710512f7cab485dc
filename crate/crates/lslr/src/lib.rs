//! A second-order intuitionistic modal logic over lambda-calculus terms:
//! relation syntax, a bounded evaluator for the step-indexed Kripke
//! semantics, syntactic logical-relation builders with a direct membership
//! checker, an LCF-style proof kernel, and derived-rule tactics.

pub mod logrel;
pub mod model;
pub mod prelude;
pub mod rel;
pub mod sugar;
