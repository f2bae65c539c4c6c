//! Verification laboratory for sharp lower bounds of the localized dyadic
//! maximal operator on N-homogeneous tree-like families: exact finite-depth
//! tree simulation, closed-form bound evaluators, explicit extremizer
//! constructions and a brute-force infimum oracle bracketing each bound.

pub mod cli;
pub mod error;
pub mod extremizers;
pub mod forms;
pub mod oracle;
pub mod scalar;
pub mod tree;

pub use error::{Error, Result};
