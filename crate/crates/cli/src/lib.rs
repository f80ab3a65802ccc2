//! Command-line tool and HTTP service over `impact-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod ops;
pub mod server;
pub mod store;

pub use cli::run;
pub use error::ApiError;
