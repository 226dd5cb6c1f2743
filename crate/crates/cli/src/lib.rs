//! Config-driven front end for the `punctura` solver.

pub mod commands;
pub mod config;
