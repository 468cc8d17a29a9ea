//! Fair sequential allocation of a scarce divisible resource.
//!
//! Agents arrive one at a time with random demands; a policy decides each
//! allocation irrevocably, aiming to maximize the expected minimum fill rate.
//! The crate provides demand models, allocation policies (projected
//! proportional allocation, target fill rate, dynamic programs), exact and
//! Monte Carlo evaluation, closed-form guarantees, hard-instance generators,
//! and a networked SEIR simulator producing correlated demand paths.

pub mod bounds;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod extensions;
pub mod instances;
pub mod io;
pub mod model;
pub mod numeric;
pub mod policies;
pub mod seir;
pub mod tree;

pub use error::{Error, Result};
pub use eval::{evaluate_policy, ex_post_fairness, FairnessReport};
pub use model::{fill_rate, normalization_factor, AllocationTrace, DemandModel, InstanceSpec};
pub use policies::{Policy, PolicySpec};
