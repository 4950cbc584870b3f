//! Node pruning of stable Galton-Watson trees and the discrete
//! β(1+α, 1−α)-coalescent, with exact small-n oracles and seeded Monte Carlo.

// Comparisons are negated so that NaN arguments are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod error;
pub mod fenwick;
pub mod numerics;
pub mod offspring;
pub mod oracle;
pub mod partition;
pub mod pruning;
pub mod rng;
pub mod sampler;
pub mod specfn;
pub mod stats;
pub mod trace;
pub mod tree;
pub mod verify;

pub use error::{Error, Result};
pub use offspring::Alpha;
pub use partition::Partition;
pub use tree::{NodeId, Tree};
