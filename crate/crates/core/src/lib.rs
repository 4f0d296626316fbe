//! Stackelberg equilibrium solver for markets in which a mobile operator
//! rewards users with data for watching ads.
//!
//! Stage II: users choose whether to subscribe to the data plan and how many
//! ads to watch ([`user`]); advertisers buy ad slots subject to a wear-out
//! effect ([`admarket`]). Stage I: the operator picks the unit data reward
//! and ad price(s) to maximise revenue within network capacity
//! ([`operator`]). [`oracle`] re-derives every stage by brute force.

// Negated comparisons double as NaN rejection in parameter checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admarket;
pub mod error;
pub mod model;
pub mod operator;
pub mod oracle;
pub mod presets;
pub mod quadrature;
pub mod scenario;
pub mod user;

pub use error::{Error, Result};
pub use model::{MarketParams, Scheme, TypeDistribution, Utility};
pub use operator::{solve, OperatorOutcome, SolverConfig};
pub use scenario::Scenario;
