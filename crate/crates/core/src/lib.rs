//! Regular tree grammars, affine-context decomposition of trees, and a
//! simply-typed λ-term toolkit for measuring how often large random terms
//! contain a fixed explosive subterm.

pub mod counting;
pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod lambda;
pub mod normalize;
pub mod par;
pub mod rng;
pub mod rtg;
pub mod trees;

pub use error::{Error, Result};
