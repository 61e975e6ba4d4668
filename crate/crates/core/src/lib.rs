//! Coherence measures, recovery conditions and solvers for piecewise sparse
//! signals over dictionaries made of several blocks (bases).
//!
//! Column and block indices are 0-based throughout.

pub mod bound;
pub mod coherence;
pub mod conditions;
pub mod dictionary;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod solvers;
pub mod support;

pub use bound::Bound;
pub use coherence::{coherence_profile, CoherenceProfile};
pub use conditions::{evaluate_all, ConditionId, ConditionInputs, ConditionReport};
pub use dictionary::{BlockPartition, Dictionary};
pub use error::{Error, Result};
pub use solvers::{RecoveryProblem, RecoveryResult};
pub use support::{SparsityPattern, SupportPartition};
