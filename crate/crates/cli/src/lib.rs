//! Run management for the search simulation engine: file-based run
//! persistence, a FIFO run scheduler and the HTTP service the dashboard
//! talks to. The `searchsim` binary wraps these for the command line.

pub mod commands;
pub mod scheduler;
pub mod service;
pub mod store;
