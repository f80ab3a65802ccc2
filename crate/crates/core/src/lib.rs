//! Toolkit for anecdote-based trial endpoints: quality-checked anecdote
//! records, blinded panel ranking sessions, rank-sum analysis from ranks,
//! sensitivity re-analysis and Monte Carlo operating characteristics.

pub mod stats;
pub mod anecdote;
pub mod session;
pub mod analysis;
pub mod sim;
