//! Desk-scale exploration-RL laboratory.
//!
//! The crate couples temporal contrastive representation learning with
//! intrinsic-reward policy training on exactly-solvable toy environments,
//! plus tabular oracles that make the information-theoretic quantities
//! (discounted occupancies, KL rewards, mutual-information bounds)
//! computable in closed form for testing.

pub mod error;
pub mod nn;
pub mod agent;
pub mod contrastive;
pub mod env;
pub mod oracle;
pub mod replay;
pub mod reward;

pub use error::{Error, Result};
