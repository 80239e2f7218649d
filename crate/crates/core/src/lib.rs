//! Agent-based market simulator comparing strategy evaluation schemes
//! on exogenous price series.
//!
//! Traders hold a small fixed set of lookup-table strategies mapping the
//! recent m-bit price history to buy/sell/abstain decisions, and follow
//! whichever strategy their evaluation scheme currently scores highest:
//!
//! - the wealth game (WG) scores a strategy by the mark-to-market wealth of
//!   a virtual book that always follows it,
//! - the minority game (MinG) rewards trend-opposing actions,
//! - the majority game (MajG) rewards trend-following actions.
//!
//! Each scheme also has a finite-score-memory variant (DWG, DMinG, DMajG)
//! that ranks strategies by the score gained over the last `T` steps only.
//!
//! Prices are exogenous — real index closes loaded from CSV, a biased random
//! walk, or an order-2 Markov chain parameterized by a long-term and a
//! short-term trend strength. The [`experiments`] module sweeps these
//! sources over parameter grids and reports per-scheme average wealth and
//! chance-of-best statistics with fully reproducible seeding.

pub mod domain;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod prices;
pub mod rng;
pub mod schemes;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
