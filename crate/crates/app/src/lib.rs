//! Command line pipeline and HTTP recommendation service.

pub mod cli;
pub mod server;

pub use cli::run_cli;
