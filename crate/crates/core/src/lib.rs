//! Exact marginal posterior probabilities for every directed edge of a
//! discrete Bayesian network, computed from complete data in O(n 2^n) time
//! by forward-backward dynamic programming over the subset lattice together
//! with truncated subset-sum transforms.
//!
//! The crate also ships a definition-level brute-force reference for small
//! problems and a synthetic-network study harness with ROC summaries.

pub mod engine;
pub mod error;
pub mod lattice;
pub mod mobius;
pub mod model;
pub mod oracle;
pub mod study;
pub mod verify;

pub use engine::{edge_posteriors, EdgePosteriors, EngineConfig};
pub use error::{Error, Result};
pub use lattice::{NodeSet, ProblemDims};
pub use mobius::{LatticeTable, LogWeight};
pub use model::{Dataset, PriorSpec, RhoFamily, ScoreFamily};
pub use study::{GroundTruthNetwork, RocCurve};
