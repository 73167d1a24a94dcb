//! Auxiliary-variable machinery for Multi-Dirichlet (MD) priors.
//!
//! An MD prior places a Dirichlet prior on multinomial parameters whose
//! `k`-th pseudo-count is a sum `Σ_j α_jk` over `J` parent parameter
//! vectors. This crate provides
//!
//! * log-space special functions and Stirling numbers of the first kind
//!   ([`special`]),
//! * plain Dirichlet-multinomial marginals, posteriors and table counts
//!   ([`dirichlet`]),
//! * the MD prior with its parent-count and parent-table auxiliaries
//!   ([`multi`]),
//! * a hierarchical multi-group model with collapsed Gibbs and
//!   expectation sweeps ([`hierarchy`]),
//! * brute-force enumeration and urn-simulation ground truth ([`oracle`])
//!   and a verification suite built on it ([`verify`]).
//!
//! All likelihoods are sequence-level: they omit the multinomial
//! coefficient over orderings of the observations. The coefficient only
//! appears when splitting a count between parents.

pub mod dirichlet;
pub mod error;
pub mod hierarchy;
pub mod matrix;
pub mod multi;
pub mod oracle;
pub mod special;
pub mod verify;

pub use dirichlet::{CountVector, DirichletParams, SimplexVector};
pub use error::{Error, Result};
pub use hierarchy::{GroupData, ModelState, ParentSpec, Scheme, UpdateMode};
pub use matrix::Matrix;
pub use multi::{MDPrior, ParentCounts, ParentTables};
pub use special::StirlingTable;
