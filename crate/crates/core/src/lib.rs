pub mod error;
pub mod kernels;
pub mod regression;
pub mod envs;
pub mod fqi;
pub mod oracle;
pub mod harness;
