//! Command line pipeline and HTTP service for cmdgraph.

pub mod commands;
pub mod service;
