//! Command-line and HTTP front ends over `robosetup_core`.

pub mod cli;
pub mod error;
pub mod ops;
pub mod service;
