//! Information-bundling position auctions.
//!
//! The publisher sells ranked ad slots on an impression whose inventory type it
//! observes (possibly coarsely). Each advertiser faces a slot-normalized menu of
//! lotteries over inventory types; marginal revenues derived from per-advertiser
//! revenue curves decide the ranking, and critical quantiles set payments.

pub mod error;
pub mod gsp;
pub mod ibpa;
pub mod io;
pub mod model;
pub mod outcome;
pub mod quantile;
pub mod revenue_curve;
pub mod single_agent;

pub use error::{Error, Result};
