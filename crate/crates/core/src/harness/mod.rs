//! Configuration, persistence, the experiment suite and the command line.

pub mod cli;
pub mod config;
pub mod container;
pub mod experiments;
pub mod reference;
