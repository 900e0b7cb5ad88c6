//! HTTP session service and command line for interplan.

pub mod cli;
pub mod config;
pub mod service;
