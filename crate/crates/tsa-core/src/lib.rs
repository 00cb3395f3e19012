//! Two-sided assortment optimization on choice-based matching markets.
//!
//! Customers and suppliers each see an assortment of the other side and pick at most one
//! option under a discrete choice model; a match forms when two agents pick each other.
//! This crate provides the choice models, policy simulation and exact evaluation, exact
//! optima for every policy class on small markets, the adaptive and fully static
//! approximation algorithms, and relaxation-based upper bounds.

pub mod assortment;
pub mod bounds;
pub mod choice;
pub mod dp;
pub mod error;
pub mod exec;
pub mod fullstatic;
pub mod generate;
pub mod greedy;
pub mod instance;
pub mod limits;
pub mod lp;
pub mod oracle;
pub mod policy;

pub use assortment::Assortment;
pub use choice::ChoiceSpec;
pub use error::{Error, Result};
pub use instance::{Budget, CardinalityProfile, Instance, Side};
pub use limits::{Caps, Deadline, Limits};
